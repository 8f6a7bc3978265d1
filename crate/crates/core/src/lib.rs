//! Simulation and training of analog Rydberg-atom neural-ODE classifiers.
//!
//! The pipeline is: raw features → PCA → MinMax scaling into pulse and
//! coupling inputs → piecewise-linear Rabi/detuning schedules and per-atom
//! local detuning weights → time evolution of the Rydberg Hamiltonian →
//! mean Rydberg population as the soft label. Pulse parameters are trained
//! with Adam on binary cross-entropy.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod export;
pub mod grid;
pub mod hamiltonian;
pub mod noise;
pub mod pulse;
pub mod seed;
pub mod simulator;
pub mod training;

pub use error::{Error, Result};
pub use grid::{AtomGrid, GridKind, InteractionMatrix};
pub use hamiltonian::{HamiltonianSpec, HermitianOperator};
pub use pulse::{Channel, ChannelLimits, PulseSchedule, PulseTiming};
pub use simulator::{evolve, predict, rydberg_probabilities, EvolutionConfig, NoiseSpec, QuantumState};

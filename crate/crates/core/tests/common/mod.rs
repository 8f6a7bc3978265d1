#![allow(dead_code)]

use rand::Rng;
use rydberg_ode::data::EncodedSample;
use rydberg_ode::grid::{AtomGrid, GridKind};
use rydberg_ode::pulse::PulseTiming;
use rydberg_ode::seed;
use rydberg_ode::training::ModelParameters;

pub const REFERENCE_SEED: u64 = 2024;

/// N=4 square at 12 µm, M=3, parameters jittered around the all-ones start
/// with couplings kept strictly inside (0, 1), and a two-sample batch.
pub fn reference_instance() -> (ModelParameters, Vec<EncodedSample>) {
    let grid = AtomGrid::build(GridKind::Square, 4, 12.0).unwrap();
    let mut params = ModelParameters::new(grid, PulseTiming::new(3)).unwrap();
    let mut rng = seed::rng(REFERENCE_SEED);
    let mut v: Vec<f64> = params.to_vec().iter().map(|x| x + rng.gen_range(-0.3..0.3)).collect();
    v[18] = 0.35;
    v[19] = 0.65;
    params.set_from_slice(&v).unwrap();
    let batch = vec![
        EncodedSample { pulse_inputs: [4.0, 2.5, -3.0], coupling_inputs: vec![0.2, 0.8], label: 1 },
        EncodedSample { pulse_inputs: [2.0, 5.0, -5.5], coupling_inputs: vec![0.9, 0.1], label: 0 },
    ];
    (params, batch)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

//! State-vector evolution under a [`HamiltonianSpec`].
//!
//! Integration uses midpoint-exponential steps,
//! `ψ ← exp(-i H(t + dt/2) dt) ψ`, on a grid aligned to the union of all
//! schedule breakpoints. On segments where every channel is constant the
//! midpoint rule is exact for any step, so the whole segment is applied as a
//! single exponential.
//!
//! The exponential is applied directly to the state with a truncated Taylor
//! series (terms below 1e-18 are dropped, phase per sub-step ≤ 1 rad), and
//! H is applied structurally: a diagonal plus one bit flip per atom.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::MIN_SPACING_UM;
use crate::hamiltonian::{Drive, HamiltonianSpec};
use crate::pulse::Channel;
use crate::seed;

const NORM_TOL: f64 = 1e-6;
const TAYLOR_MAX_PHASE: f64 = 1.0;
const TAYLOR_TOL: f64 = 1e-18;
const PERTURB_RETRIES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    /// `|0…0⟩` on `n_atoms` atoms.
    pub fn ground(n_atoms: usize) -> Self {
        Self::basis(n_atoms, 0)
    }

    pub fn basis(n_atoms: usize, index: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_atoms];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        QuantumState { amplitudes }
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() || !amplitudes.len().is_power_of_two() {
            return Err(Error::State(format!("length {} is not a power of two", amplitudes.len())));
        }
        let s = QuantumState { amplitudes };
        if (s.norm_sqr() - 1.0).abs() > NORM_TOL {
            return Err(Error::State(format!("state is not normalized (|psi|^2 = {})", s.norm_sqr())));
        }
        Ok(s)
    }

    pub fn n_atoms(&self) -> usize {
        self.amplitudes.len().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Euclidean distance between amplitude vectors.
    pub fn distance(&self, other: &QuantumState) -> f64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }

    /// Apply `exp(-i angle P)` on one atom, `P` ∈ {X, Z}.
    pub fn rotate(&mut self, atom: usize, pauli: Pauli, angle: f64) {
        let bit = 1usize << atom;
        let (c, s) = (angle.cos(), angle.sin());
        match pauli {
            Pauli::X => {
                let mi_s = Complex64::new(0.0, -s);
                for k in 0..self.amplitudes.len() {
                    if k & bit == 0 {
                        let (a0, a1) = (self.amplitudes[k], self.amplitudes[k | bit]);
                        self.amplitudes[k] = a0 * c + a1 * mi_s;
                        self.amplitudes[k | bit] = a0 * mi_s + a1 * c;
                    }
                }
            }
            Pauli::Z => {
                let down = Complex64::new(c, -s);
                let up = Complex64::new(c, s);
                for (k, a) in self.amplitudes.iter_mut().enumerate() {
                    *a *= if k & bit == 0 { down } else { up };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    /// Bound on ‖H‖·dt per midpoint step, in rad.
    pub max_step_phase: f64,
    /// Absolute cap on the midpoint step, in µs.
    pub dt_max: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig { max_step_phase: 0.05, dt_max: 0.001 }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_step_phase > 0.0 && self.dt_max > 0.0) {
            return Err(Error::Config(format!(
                "evolution step bounds must be positive (max_step_phase={}, dt_max={})",
                self.max_step_phase, self.dt_max
            )));
        }
        Ok(())
    }
}

/// Scratch buffers reused across steps.
struct Workspace {
    diag: Vec<f64>,
    term: Vec<Complex64>,
    next: Vec<Complex64>,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        Workspace { diag: vec![0.0; dim], term: vec![Complex64::default(); dim], next: vec![Complex64::default(); dim] }
    }
}

/// `out = c · H x` with H = diag + (Ω/2) Σ_i X_i.
fn apply_scaled_h(n_atoms: usize, rabi_half: f64, diag: &[f64], x: &[Complex64], c: Complex64, out: &mut [Complex64]) {
    for (k, o) in out.iter_mut().enumerate() {
        let mut flip = Complex64::default();
        for i in 0..n_atoms {
            flip += x[k ^ (1 << i)];
        }
        *o = (x[k] * diag[k] + flip * rabi_half) * c;
    }
}

fn taylor_terms(phase: f64) -> usize {
    let mut mag = 1.0;
    let mut j = 0usize;
    loop {
        j += 1;
        mag *= phase / j as f64;
        if mag < TAYLOR_TOL || j >= 60 {
            return j.saturating_sub(1).max(1);
        }
    }
}

/// ψ ← exp(-i H tau) ψ for H fixed by `rabi` and `ws.diag`.
fn expm_apply(n_atoms: usize, rabi: f64, bound: f64, tau: f64, psi: &mut [Complex64], ws: &mut Workspace) {
    if tau <= 0.0 || bound == 0.0 {
        return;
    }
    let phase = bound * tau;
    let substeps = (phase / TAYLOR_MAX_PHASE).ceil().max(1.0) as usize;
    let h = tau / substeps as f64;
    let terms = taylor_terms(bound * h);
    let rabi_half = 0.5 * rabi;
    for _ in 0..substeps {
        ws.term.copy_from_slice(psi);
        for j in 1..=terms {
            let c = Complex64::new(0.0, -h / j as f64);
            apply_scaled_h(n_atoms, rabi_half, &ws.diag, &ws.term, c, &mut ws.next);
            std::mem::swap(&mut ws.term, &mut ws.next);
            for (p, t) in psi.iter_mut().zip(&ws.term) {
                *p += t;
            }
        }
    }
}

type Observer<'a> = &'a mut dyn FnMut(f64, &[Complex64]);

fn propagate(
    spec: &HamiltonianSpec,
    config: &EvolutionConfig,
    psi: &mut [Complex64],
    t0: f64,
    t1: f64,
    mut observer: Option<Observer<'_>>,
) {
    let n = spec.n_atoms();
    let mut ws = Workspace::new(psi.len());
    let mut cuts = vec![t0];
    cuts.extend(spec.knots().iter().copied().filter(|&t| t > t0 && t < t1));
    cuts.push(t1);

    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = b - a;
        if len <= 0.0 {
            continue;
        }
        let (da, db) = (spec.drive(a), spec.drive(b));
        if da == db && observer.is_none() {
            spec.fill_diagonal(da, &mut ws.diag);
            let bound = spec.norm_bound(da, &ws.diag);
            expm_apply(n, da.rabi, bound, len, psi, &mut ws);
            continue;
        }
        spec.fill_diagonal(da, &mut ws.diag);
        let mut bound = spec.norm_bound(da, &ws.diag);
        spec.fill_diagonal(db, &mut ws.diag);
        bound = bound.max(spec.norm_bound(db, &ws.diag));
        let dt = if bound > 0.0 { config.dt_max.min(config.max_step_phase / bound) } else { config.dt_max };
        let steps = ((len / dt) - 1e-9).ceil().max(1.0) as usize;
        let h = len / steps as f64;
        for s in 0..steps {
            let f = (s as f64 + 0.5) / steps as f64;
            let d: Drive = Drive::lerp(da, db, f);
            spec.fill_diagonal(d, &mut ws.diag);
            let step_bound = spec.norm_bound(d, &ws.diag);
            expm_apply(n, d.rabi, step_bound, h, psi, &mut ws);
            if let Some(obs) = observer.as_mut() {
                obs(a + (s + 1) as f64 * h, psi);
            }
        }
    }
}

/// Final state after the full schedule, starting from `|0…0⟩`.
pub fn evolve(spec: &HamiltonianSpec, config: &EvolutionConfig) -> QuantumState {
    let mut state = QuantumState::ground(spec.n_atoms());
    propagate(spec, config, &mut state.amplitudes, 0.0, spec.duration(), None);
    state
}

/// Evolve `state` from `t0` to `t1` (both clamped into the schedule).
pub fn evolve_between(spec: &HamiltonianSpec, config: &EvolutionConfig, state: &mut QuantumState, t0: f64, t1: f64) {
    let t0 = t0.clamp(0.0, spec.duration());
    let t1 = t1.clamp(0.0, spec.duration());
    propagate(spec, config, &mut state.amplitudes, t0, t1, None);
}

/// Like [`evolve`] but never fuses constant segments, and calls `observer`
/// with `(t, amplitudes)` after every step.
pub fn evolve_observed(
    spec: &HamiltonianSpec,
    config: &EvolutionConfig,
    mut observer: impl FnMut(f64, &[Complex64]),
) -> QuantumState {
    let mut state = QuantumState::ground(spec.n_atoms());
    propagate(spec, config, &mut state.amplitudes, 0.0, spec.duration(), Some(&mut observer));
    state
}

/// Probability of finding each atom in the Rydberg state.
pub fn rydberg_probabilities(state: &QuantumState) -> Vec<f64> {
    let n = state.n_atoms();
    let mut p = vec![0.0; n];
    for (k, a) in state.amplitudes.iter().enumerate() {
        let w = a.norm_sqr();
        for (i, pi) in p.iter_mut().enumerate() {
            if k & (1 << i) != 0 {
                *pi += w;
            }
        }
    }
    p
}

/// Soft label: mean Rydberg probability across atoms.
pub fn predict(state: &QuantumState) -> f64 {
    let p = rydberg_probabilities(state);
    p.iter().sum::<f64>() / p.len() as f64
}

/// Hard label; a tie at exactly 0.5 goes to class 1.
pub fn hard_label(soft: f64) -> u8 {
    u8::from(soft >= 0.5)
}

/// Bitstring for a basis index; character `i` is atom `i`.
pub fn bitstring(index: usize, n_atoms: usize) -> String {
    (0..n_atoms).map(|i| if index & (1 << i) != 0 { '1' } else { '0' }).collect()
}

/// Draw `n_shots` measurement outcomes in the occupation basis.
pub fn sample_shots(state: &QuantumState, n_shots: usize, seed: u64) -> Result<BTreeMap<String, usize>> {
    if n_shots == 0 {
        return Err(Error::State("n_shots must be at least 1".into()));
    }
    let dist = WeightedIndex::new(state.probabilities()).map_err(|e| Error::State(e.to_string()))?;
    let mut rng = seed::rng(seed);
    let mut counts = vec![0usize; state.amplitudes.len()];
    for _ in 0..n_shots {
        counts[dist.sample(&mut rng)] += 1;
    }
    let n = state.n_atoms();
    Ok(counts.into_iter().enumerate().filter(|&(_, c)| c > 0).map(|(k, c)| (bitstring(k, n), c)).collect())
}

/// Mean fraction of excited atoms across shots; estimates [`predict`].
pub fn shot_soft_label(counts: &BTreeMap<String, usize>) -> f64 {
    let total: usize = counts.values().sum();
    let excited: usize = counts.iter().map(|(b, c)| b.chars().filter(|&ch| ch == '1').count() * c).sum();
    let n = counts.keys().next().map_or(1, |b| b.len());
    excited as f64 / (total * n) as f64
}

/// Gaussian control and placement noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Per-coordinate atom displacement, µm.
    pub position_sigma: f64,
    /// Relative Rabi amplitude error.
    pub rabi_relative_sigma: f64,
    /// Additive detuning error on both detuning channels, rad/µs.
    pub detuning_sigma: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { position_sigma: 0.1, rabi_relative_sigma: 0.01, detuning_sigma: 0.5, seed: 0 }
    }
}

impl NoiseSpec {
    pub fn zero(seed: u64) -> Self {
        NoiseSpec { position_sigma: 0.0, rabi_relative_sigma: 0.0, detuning_sigma: 0.0, seed }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        NoiseSpec {
            position_sigma: self.position_sigma * factor,
            rabi_relative_sigma: self.rabi_relative_sigma * factor,
            detuning_sigma: self.detuning_sigma * factor,
            seed: self.seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        NoiseSpec { seed, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("position_sigma", self.position_sigma),
            ("rabi_relative_sigma", self.rabi_relative_sigma),
            ("detuning_sigma", self.detuning_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Noise(format!("{name} must be a non-negative number, got {v}")));
            }
        }
        Ok(())
    }
}

fn normal(sigma: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sigma).map_err(|e| Error::Noise(e.to_string()))
}

/// One noisy realization of `spec`.
///
/// Positions get independent per-coordinate displacements (redrawn if they
/// violate the spacing floor), Rabi breakpoints a multiplicative error
/// followed by re-clamping, and detuning breakpoints an additive error.
pub fn perturb(spec: &HamiltonianSpec, noise: &NoiseSpec) -> Result<HamiltonianSpec> {
    noise.validate()?;
    let mut rng = seed::rng(noise.seed);
    let grid = spec.grid();

    let pos_dist = normal(noise.position_sigma)?;
    let mut positions = None;
    for _ in 0..PERTURB_RETRIES {
        let cand: Vec<[f64; 2]> =
            grid.positions().iter().map(|p| [p[0] + pos_dist.sample(&mut rng), p[1] + pos_dist.sample(&mut rng)]).collect();
        let trial = grid.with_positions(cand);
        let legal = match &trial {
            Ok(g) if g.n_atoms() < 2 => true,
            Ok(g) => g.min_pair_distance()? >= MIN_SPACING_UM || noise.position_sigma == 0.0,
            Err(_) => false,
        };
        if legal {
            positions = Some(trial?);
            break;
        }
    }
    let new_grid = positions.ok_or_else(|| {
        Error::Noise(format!("could not draw legal atom positions in {PERTURB_RETRIES} attempts"))
    })?;

    let rabi = spec.schedule(Channel::Rabi);
    let rabi_dist = normal(noise.rabi_relative_sigma)?;
    let lim = rabi.limits();
    let new_rabi = rabi.map_values(|v| lim.clamp(v * (1.0 + rabi_dist.sample(&mut rng))));

    let det_dist = normal(noise.detuning_sigma)?;
    let new_det = spec.schedule(Channel::GlobalDetuning).map_values(|v| v + det_dist.sample(&mut rng));
    let new_local = spec.schedule(Channel::LocalDetuning).map_values(|v| v + det_dist.sample(&mut rng));

    HamiltonianSpec::assemble(new_grid, new_rabi, new_det, new_local, spec.couplings().to_vec())
}

//! Forward pass, loss, gradient estimators and the Adam training loop.
//!
//! Trainable vector layout: for each channel (Ω, Δ, δ) and interval `k`,
//! `[scale_k, offset_k]`, followed by one coupling per odd-indexed atom.
//! Index of `(channel c, interval k, j)` is `c·2M + 2k + j`.

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{self, EncodedSample};
use crate::error::{Error, Result};
use crate::grid::AtomGrid;
use crate::hamiltonian::HamiltonianSpec;
use crate::pulse::{Channel, ChannelLimits, ClampWarning, PulseSchedule, PulseTiming};
use crate::seed;
use crate::simulator::{evolve, evolve_between, hard_label, predict, EvolutionConfig, Pauli, QuantumState};

pub const BCE_EPS: f64 = 1e-7;

/// `6M + N/2`.
pub fn trainable_count(n_atoms: usize, n_intervals: usize) -> usize {
    6 * n_intervals + n_atoms / 2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    /// `[scale, offset]` per interval, indexed by [`Channel::index`].
    pub pulse_thetas: [Vec<[f64; 2]>; 3],
    /// Local weights of atoms 1, 3, 5, …; clamped to `[0, 1]` when realized.
    pub coupling_params: Vec<f64>,
    pub grid: AtomGrid,
    pub timing: PulseTiming,
    pub limits: [ChannelLimits; 3],
}

/// A parameter set bound to one sample, ready to evolve.
#[derive(Debug, Clone)]
pub struct Realized {
    pub spec: HamiltonianSpec,
    /// `clamped[c][k]`: hold `k` of channel `c` sits at a limit.
    pub clamped: [Vec<bool>; 3],
    pub warnings: Vec<ClampWarning>,
}

impl ModelParameters {
    /// All-ones initialization with hardware channel limits.
    pub fn new(grid: AtomGrid, timing: PulseTiming) -> Result<Self> {
        let limits = Channel::ALL.map(ChannelLimits::default_for);
        Self::with_limits(grid, timing, limits)
    }

    pub fn with_limits(grid: AtomGrid, timing: PulseTiming, limits: [ChannelLimits; 3]) -> Result<Self> {
        timing.validate()?;
        let n = grid.n_atoms();
        if n == 0 || n % 2 != 0 {
            return Err(Error::Training(format!("the alternating coupling layout needs an even atom count, got {n}")));
        }
        let m = timing.n_intervals;
        Ok(ModelParameters {
            pulse_thetas: [vec![[1.0, 1.0]; m], vec![[1.0, 1.0]; m], vec![[1.0, 1.0]; m]],
            coupling_params: vec![1.0; n / 2],
            grid,
            timing,
            limits,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.grid.n_atoms()
    }

    pub fn n_intervals(&self) -> usize {
        self.timing.n_intervals
    }

    pub fn n_trainable(&self) -> usize {
        trainable_count(self.n_atoms(), self.n_intervals())
    }

    pub fn n_inputs(&self) -> usize {
        data::n_inputs(self.n_atoms())
    }

    pub fn theta_index(&self, channel: Channel, interval: usize, j: usize) -> usize {
        channel.index() * 2 * self.n_intervals() + 2 * interval + j
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_trainable());
        for ch in &self.pulse_thetas {
            for t in ch {
                v.extend_from_slice(t);
            }
        }
        v.extend_from_slice(&self.coupling_params);
        v
    }

    pub fn set_from_slice(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_trainable() {
            return Err(Error::Training(format!("{} values for {} parameters", v.len(), self.n_trainable())));
        }
        let m = self.n_intervals();
        for (c, ch) in self.pulse_thetas.iter_mut().enumerate() {
            for (k, t) in ch.iter_mut().enumerate() {
                let i = c * 2 * m + 2 * k;
                *t = [v[i], v[i + 1]];
            }
        }
        self.coupling_params.copy_from_slice(&v[6 * m..]);
        Ok(())
    }

    fn check(&self) -> Result<()> {
        let m = self.n_intervals();
        if self.pulse_thetas.iter().any(|c| c.len() != m) || self.coupling_params.len() != self.n_atoms() / 2 {
            return Err(Error::Training("parameter shapes do not match the grid and timing".into()));
        }
        Ok(())
    }

    /// Per-atom weights: even atoms from the sample, odd atoms from the
    /// trained couplings, all clamped to `[0, 1]`.
    pub fn couplings(&self, sample: &EncodedSample) -> Result<Vec<f64>> {
        let half = self.n_atoms() / 2;
        if sample.coupling_inputs.len() != half {
            return Err(Error::Training(format!(
                "sample has {} coupling inputs, {} atoms need {half}",
                sample.coupling_inputs.len(),
                self.n_atoms()
            )));
        }
        Ok((0..self.n_atoms())
            .map(|i| {
                let v = if i % 2 == 0 { sample.coupling_inputs[i / 2] } else { self.coupling_params[i / 2] };
                v.clamp(0.0, 1.0)
            })
            .collect())
    }

    pub fn realize(&self, sample: &EncodedSample) -> Result<Realized> {
        self.check()?;
        let mut warnings = Vec::new();
        let mut clamped: [Vec<bool>; 3] = Default::default();
        let schedules = Channel::ALL.map(|ch| {
            let c = ch.index();
            PulseSchedule::build(ch, &self.pulse_thetas[c], sample.pulse_inputs[c], self.timing, self.limits[c]).map(
                |(s, w)| {
                    clamped[c] = vec![false; self.n_intervals()];
                    for x in &w {
                        clamped[c][x.interval] = true;
                    }
                    warnings.extend(w);
                    s
                },
            )
        });
        let [rabi, det, local] = schedules;
        let spec = HamiltonianSpec::assemble(self.grid.clone(), rabi?, det?, local?, self.couplings(sample)?)?;
        Ok(Realized { spec, clamped, warnings })
    }
}

/// Soft label for one sample.
pub fn forward(params: &ModelParameters, sample: &EncodedSample, evo: &EvolutionConfig) -> Result<f64> {
    let r = params.realize(sample)?;
    Ok(predict(&evolve(&r.spec, evo)))
}

pub fn predict_batch(params: &ModelParameters, batch: &[EncodedSample], evo: &EvolutionConfig) -> Result<Vec<f64>> {
    batch.par_iter().map(|s| forward(params, s, evo)).collect()
}

/// Binary cross-entropy with the prediction clamped to `[ε, 1-ε]`.
pub fn bce_loss(pred: f64, label: u8) -> f64 {
    let p = pred.clamp(BCE_EPS, 1.0 - BCE_EPS);
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// ∂loss/∂pred; zero where the clamp is active.
pub fn bce_derivative(pred: f64, label: u8) -> f64 {
    if !(BCE_EPS..=1.0 - BCE_EPS).contains(&pred) {
        return 0.0;
    }
    if label == 1 {
        -1.0 / pred
    } else {
        1.0 / (1.0 - pred)
    }
}

pub fn mean_loss(preds: &[f64], batch: &[EncodedSample]) -> f64 {
    preds.iter().zip(batch).map(|(&p, s)| bce_loss(p, s.label)).sum::<f64>() / batch.len() as f64
}

pub fn batch_loss(params: &ModelParameters, batch: &[EncodedSample], evo: &EvolutionConfig) -> Result<f64> {
    Ok(mean_loss(&predict_batch(params, batch, evo)?, batch))
}

fn with_value(params: &ModelParameters, base: &[f64], j: usize, value: f64) -> ModelParameters {
    let mut v = base.to_vec();
    v[j] = value;
    let mut p = params.clone();
    p.set_from_slice(&v).expect("length preserved");
    p
}

/// Central differences of the mean batch loss.
pub fn grad_fd(params: &ModelParameters, batch: &[EncodedSample], step: f64, evo: &EvolutionConfig) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::Training(format!("finite-difference step must be positive, got {step}")));
    }
    if batch.is_empty() {
        return Err(Error::Training("empty batch".into()));
    }
    let base = params.to_vec();
    (0..base.len())
        .into_par_iter()
        .map(|j| {
            let up = batch_loss(&with_value(params, &base, j, base[j] + step), batch, evo)?;
            let down = batch_loss(&with_value(params, &base, j, base[j] - step), batch, evo)?;
            Ok((up - down) / (2.0 * step))
        })
        .collect()
}

/// Monte Carlo estimate of `∂pred/∂θ` for one sample, together with the
/// exact prediction.
///
/// With generators `G ∈ {X_i, Z_i}` and `H(t) = Σ_G c_G(t) G + …`, where
/// `c_{X_i} = Ω/2` and `c_{Z_i} = (Δ + δ h_i)/2`,
///
/// ```text
/// ∂p/∂θ = ∫_0^T Σ_G ∂c_G(t)/∂θ · [p(e^{-iπ/4 G} at t) - p(e^{+iπ/4 G} at t)] dt
/// ```
///
/// and the integral is replaced by `T/K` times a sum over `K` uniform draws.
pub fn pulse_gradient_sample(
    params: &ModelParameters,
    sample: &EncodedSample,
    n_time_samples: usize,
    seed: u64,
    evo: &EvolutionConfig,
) -> Result<(f64, Vec<f64>)> {
    if n_time_samples == 0 {
        return Err(Error::Training("at least one time sample is required".into()));
    }
    let r = params.realize(sample)?;
    let spec = &r.spec;
    let n = spec.n_atoms();
    let m = params.n_intervals();
    let duration = spec.duration();
    let pred = predict(&evolve(spec, evo));

    let mut rng = seed::rng(seed);
    let mut times: Vec<f64> = (0..n_time_samples).map(|_| rng.gen::<f64>() * duration).collect();
    times.sort_by(f64::total_cmp);

    let h = spec.couplings();
    let local = spec.schedule(Channel::LocalDetuning);
    let mut grad = vec![0.0; params.n_trainable()];
    let mut psi = QuantumState::ground(n);
    let mut t_prev = 0.0;
    let shifted = |psi: &QuantumState, t: f64, atom: usize, pauli: Pauli| {
        let mut out = [0.0; 2];
        for (o, angle) in out.iter_mut().zip([FRAC_PI_4, -FRAC_PI_4]) {
            let mut s = psi.clone();
            s.rotate(atom, pauli, angle);
            evolve_between(spec, evo, &mut s, t, duration);
            *o = predict(&s);
        }
        out[0] - out[1]
    };

    for &t in &times {
        evolve_between(spec, evo, &mut psi, t_prev, t);
        t_prev = t;
        let weights = Channel::ALL.map(|ch| {
            let c = ch.index();
            spec.schedule(ch).hold_weights(t).into_iter().filter(|&(k, _)| !r.clamped[c][k]).collect::<Vec<_>>()
        });
        let need_x = !weights[Channel::Rabi.index()].is_empty();
        let dx: Vec<f64> = (0..n).map(|i| if need_x { shifted(&psi, t, i, Pauli::X) } else { 0.0 }).collect();
        let dz: Vec<f64> = (0..n).map(|i| shifted(&psi, t, i, Pauli::Z)).collect();

        let sum_x: f64 = dx.iter().sum();
        let sum_z: f64 = dz.iter().sum();
        let sum_hz: f64 = dz.iter().zip(h).map(|(d, h)| d * h).sum();
        for ch in Channel::ALL {
            let c = ch.index();
            let base = 0.5
                * match ch {
                    Channel::Rabi => sum_x,
                    Channel::GlobalDetuning => sum_z,
                    Channel::LocalDetuning => sum_hz,
                };
            for &(k, w) in &weights[c] {
                grad[params.theta_index(ch, k, 0)] += sample.pulse_inputs[c] * w * base;
                grad[params.theta_index(ch, k, 1)] += w * base;
            }
        }
        let delta = local.value_at(t);
        for (q, &p) in params.coupling_params.iter().enumerate() {
            if (0.0..=1.0).contains(&p) {
                grad[6 * m + q] += 0.5 * delta * dz[2 * q + 1];
            }
        }
    }
    let scale = duration / n_time_samples as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((pred, grad))
}

/// Stochastic pulse estimate of the mean batch-loss gradient. Sample `b`
/// draws its times from `split(seed, [b])`.
pub fn grad_stochastic(
    params: &ModelParameters,
    batch: &[EncodedSample],
    n_time_samples: usize,
    seed: u64,
    evo: &EvolutionConfig,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Training("empty batch".into()));
    }
    let per_sample: Vec<(f64, Vec<f64>)> = batch
        .par_iter()
        .enumerate()
        .map(|(b, s)| pulse_gradient_sample(params, s, n_time_samples, seed::split(seed, &[b as u64]), evo))
        .collect::<Result<_>>()?;
    let mut grad = vec![0.0; params.n_trainable()];
    for ((pred, dp), s) in per_sample.iter().zip(batch) {
        let outer = bce_derivative(*pred, s.label) / batch.len() as f64;
        for (g, d) in grad.iter_mut().zip(dp) {
            *g += outer * d;
        }
    }
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { step_size: 0.01, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(cfg: &AdamConfig, state: &mut AdamState, params: &mut [f64], grad: &[f64]) -> Result<()> {
    if params.len() != grad.len() || state.m.len() != grad.len() {
        return Err(Error::Training(format!(
            "adam dimension mismatch: {} params, {} gradient, {} state",
            params.len(),
            grad.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let b1t = 1.0 - cfg.beta1.powi(state.t as i32);
    let b2t = 1.0 - cfg.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        let m_hat = state.m[i] / b1t;
        let v_hat = state.v[i] / b2t;
        params[i] -= cfg.step_size * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    FiniteDifference,
    StochasticPulse,
}

impl fmt::Display for GradientMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GradientMode::FiniteDifference => "finite_difference",
            GradientMode::StochasticPulse => "stochastic_pulse",
        })
    }
}

impl FromStr for GradientMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "finite_difference" | "fd" => Ok(GradientMode::FiniteDifference),
            "stochastic_pulse" | "stochastic" => Ok(GradientMode::StochasticPulse),
            _ => Err(Error::Config(format!("unknown gradient mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub adam: AdamConfig,
    pub gradient_mode: GradientMode,
    pub time_samples: usize,
    pub fd_step: f64,
    pub seed: u64,
    pub evolution: EvolutionConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 75,
            adam: AdamConfig::default(),
            gradient_mode: GradientMode::FiniteDifference,
            time_samples: 20,
            fd_step: 1e-3,
            seed: 0,
            evolution: EvolutionConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Training("iterations must be at least 1".into()));
        }
        if self.time_samples == 0 {
            return Err(Error::Training("time_samples must be at least 1".into()));
        }
        if !(self.fd_step > 0.0) {
            return Err(Error::Training(format!("fd_step must be positive, got {}", self.fd_step)));
        }
        self.evolution.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub f1: f64,
}

/// Accuracy and class-1 F1 at threshold 0.5 (ties to class 1).
pub fn evaluate_metrics(preds: &[f64], labels: &[u8]) -> Result<Metrics> {
    if preds.is_empty() {
        return Err(Error::Training("no predictions to score".into()));
    }
    if preds.len() != labels.len() {
        return Err(Error::Training(format!("{} predictions for {} labels", preds.len(), labels.len())));
    }
    let (mut tp, mut fp, mut fn_, mut correct) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &y) in preds.iter().zip(labels) {
        let h = hard_label(p);
        correct += usize::from(h == y);
        match (h, y) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            _ => {}
        }
    }
    let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
    let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(Metrics { accuracy: correct as f64 / preds.len() as f64, f1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Mean training loss after this iteration's update.
    pub loss: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub initial_loss: f64,
    pub records: Vec<IterationRecord>,
    pub final_metrics: Metrics,
    /// Not persisted, so reruns serialize identically.
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// Full-batch Adam from `initial`.
pub fn train(
    initial: ModelParameters,
    samples: &[EncodedSample],
    cfg: &TrainConfig,
) -> Result<(ModelParameters, TrainHistory)> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Training("training set is empty".into()));
    }
    if samples.iter().all(|s| s.label == samples[0].label) {
        return Err(Error::Training(format!("training set only contains class {}", samples[0].label)));
    }
    let started = Instant::now();
    let evo = &cfg.evolution;
    let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
    let mut params = initial;
    let initial_loss = batch_loss(&params, samples, evo)?;
    let mut theta = params.to_vec();
    let mut adam = AdamState::new(theta.len());
    let mut records = Vec::with_capacity(cfg.iterations);
    let mut metrics = Metrics { accuracy: 0.0, f1: 0.0 };
    for it in 0..cfg.iterations {
        let grad = match cfg.gradient_mode {
            GradientMode::FiniteDifference => grad_fd(&params, samples, cfg.fd_step, evo)?,
            GradientMode::StochasticPulse => {
                grad_stochastic(&params, samples, cfg.time_samples, seed::split(cfg.seed, &[it as u64]), evo)?
            }
        };
        adam_step(&cfg.adam, &mut adam, &mut theta, &grad)?;
        params.set_from_slice(&theta)?;
        let preds = predict_batch(&params, samples, evo)?;
        let loss = mean_loss(&preds, samples);
        metrics = evaluate_metrics(&preds, &labels)?;
        log::info!("iteration {:>3}: loss {loss:.6}, train accuracy {:.4}", it + 1, metrics.accuracy);
        records.push(IterationRecord { iteration: it + 1, loss, train_accuracy: metrics.accuracy });
    }
    let history =
        TrainHistory { initial_loss, records, final_metrics: metrics, wall_time_s: started.elapsed().as_secs_f64() };
    Ok((params, history))
}

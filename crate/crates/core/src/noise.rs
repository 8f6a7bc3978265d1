//! Ensemble inference under Gaussian hardware noise and decision-flip
//! analysis around the 0.5 threshold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::EncodedSample;
use crate::error::{Error, Result};
use crate::seed;
use crate::simulator::{evolve, hard_label, perturb, predict, EvolutionConfig, NoiseSpec};
use crate::training::ModelParameters;

/// Sigma multipliers applied to a base [`NoiseSpec`] in a sweep.
pub const DEFAULT_MULTIPLIERS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 4.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRobustness {
    pub index: usize,
    pub label: u8,
    pub ideal: f64,
    pub noisy_mean: f64,
    pub noisy_std: f64,
    /// Hard labels of `ideal` and `noisy_mean` differ.
    pub flip: bool,
    /// Fraction of ensemble members whose own hard label differs from ideal.
    pub member_flip_rate: f64,
}

impl SampleRobustness {
    pub fn abs_shift(&self) -> f64 {
        (self.noisy_mean - self.ideal).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub noise: NoiseSpec,
    pub n_ensemble: usize,
    pub samples: Vec<SampleRobustness>,
    pub flip_rate: f64,
    pub member_flip_rate: f64,
    pub mean_abs_shift: f64,
    pub ideal_accuracy: f64,
    pub noisy_accuracy: f64,
    pub accuracy_delta: f64,
}

/// Ideal pass plus `n_ensemble` perturbed passes per sample. Member `e` of
/// sample `b` uses seed `split(noise.seed, [b, e])`.
pub fn robustness_eval(
    params: &ModelParameters,
    eval: &[EncodedSample],
    noise: &NoiseSpec,
    n_ensemble: usize,
    evo: &EvolutionConfig,
) -> Result<RobustnessReport> {
    if eval.is_empty() {
        return Err(Error::Noise("evaluation set is empty".into()));
    }
    if n_ensemble == 0 {
        return Err(Error::Noise("ensemble size must be at least 1".into()));
    }
    noise.validate()?;
    let samples: Vec<SampleRobustness> = eval
        .par_iter()
        .enumerate()
        .map(|(b, s)| {
            let spec = params.realize(s)?.spec;
            let ideal = predict(&evolve(&spec, evo));
            let members = (0..n_ensemble)
                .map(|e| {
                    let noisy = perturb(&spec, &noise.with_seed(seed::split(noise.seed, &[b as u64, e as u64])))?;
                    Ok(predict(&evolve(&noisy, evo)))
                })
                .collect::<Result<Vec<f64>>>()?;
            let (mean, var) = mean_var(&members);
            let ideal_label = hard_label(ideal);
            let member_flips = members.iter().filter(|&&p| hard_label(p) != ideal_label).count();
            Ok(SampleRobustness {
                index: b,
                label: s.label,
                ideal,
                noisy_mean: mean,
                noisy_std: var.sqrt(),
                flip: hard_label(mean) != ideal_label,
                member_flip_rate: member_flips as f64 / n_ensemble as f64,
            })
        })
        .collect::<Result<_>>()?;
    Ok(summarize(noise, n_ensemble, samples))
}

/// Running mean and sample variance. Identical members give exactly that
/// value and zero variance.
fn mean_var(x: &[f64]) -> (f64, f64) {
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, &v) in x.iter().enumerate() {
        let d = v - mean;
        mean += d / (k + 1) as f64;
        m2 += d * (v - mean);
    }
    (mean, if x.len() > 1 { m2 / (x.len() - 1) as f64 } else { 0.0 })
}

fn summarize(noise: &NoiseSpec, n_ensemble: usize, samples: Vec<SampleRobustness>) -> RobustnessReport {
    let n = samples.len() as f64;
    let frac = |f: &dyn Fn(&SampleRobustness) -> bool| samples.iter().filter(|s| f(s)).count() as f64 / n;
    let ideal_accuracy = frac(&|s| hard_label(s.ideal) == s.label);
    let noisy_accuracy = frac(&|s| hard_label(s.noisy_mean) == s.label);
    RobustnessReport {
        noise: *noise,
        n_ensemble,
        flip_rate: frac(&|s| s.flip),
        member_flip_rate: samples.iter().map(|s| s.member_flip_rate).sum::<f64>() / n,
        mean_abs_shift: samples.iter().map(SampleRobustness::abs_shift).sum::<f64>() / n,
        ideal_accuracy,
        noisy_accuracy,
        accuracy_delta: noisy_accuracy - ideal_accuracy,
        samples,
    }
}

impl RobustnessReport {
    /// Recompute the aggregates from the per-sample fields.
    pub fn recomputed(&self) -> RobustnessReport {
        summarize(&self.noise, self.n_ensemble, self.samples.clone())
    }
}

/// One report per multiplier of `base`, all sharing `base.seed`.
pub fn sigma_sweep(
    params: &ModelParameters,
    eval: &[EncodedSample],
    base: &NoiseSpec,
    multipliers: &[f64],
    n_ensemble: usize,
    evo: &EvolutionConfig,
) -> Result<Vec<(f64, RobustnessReport)>> {
    multipliers
        .iter()
        .map(|&k| Ok((k, robustness_eval(params, eval, &base.scaled(k), n_ensemble, evo)?)))
        .collect()
}

/// Ranks starting at 1; ties share their average rank.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpearmanTest {
    pub rho: f64,
    pub n: usize,
    /// `rho·sqrt(n-1)`, approximately standard normal under independence.
    pub z: f64,
    /// One-sided test of `rho > 0` at the 95% level.
    pub positive: bool,
}

const Z_95_ONE_SIDED: f64 = 1.6448536269514722;

/// Spearman rank correlation (Pearson correlation of tie-averaged ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<SpearmanTest> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Noise(format!("spearman needs two equal series of at least 3 points, got {} and {}", x.len(), y.len())));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    let rho = if vx > 0.0 && vy > 0.0 { cov / (vx * vy).sqrt() } else { 0.0 };
    let z = rho * (n - 1.0).sqrt();
    Ok(SpearmanTest { rho, n: x.len(), z, positive: z > Z_95_ONE_SIDED })
}

/// Spearman test over pooled `(multiplier, per-sample |shift|)` pairs.
pub fn shift_trend(sweep: &[(f64, RobustnessReport)]) -> Result<SpearmanTest> {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (k, report) in sweep {
        for s in &report.samples {
            x.push(*k);
            y.push(s.abs_shift());
        }
    }
    spearman(&x, &y)
}

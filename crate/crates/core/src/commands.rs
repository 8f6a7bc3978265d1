//! The six CLI verbs as library functions. Each writes its artifacts into an
//! output directory and returns the in-memory results.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::checkpoint::{Checkpoint, DatasetInfo};
use crate::config::RunConfig;
use crate::data::{self, BlobConfig, EncodedSample, Encoder, RawDataset};
use crate::error::{Error, Result};
use crate::export::AnalogProgram;
use crate::grid::{AtomGrid, GridKind};
use crate::noise::{self, RobustnessReport, SpearmanTest};
use crate::seed;
use crate::simulator::{evolve, sample_shots, shot_soft_label};
use crate::training::{self, evaluate_metrics, Metrics, ModelParameters, TrainHistory};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const TRAIN_DATA_FILE: &str = "train.csv";
pub const TEST_DATA_FILE: &str = "test.csv";
pub const NOISE_REPORT_FILE: &str = "noise_report.json";
pub const NOISE_TABLE_FILE: &str = "noise_sweep.csv";
pub const PROGRAM_FILE: &str = "program.json";
pub const SYNTH_FILE: &str = "synthetic.csv";

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let err = |e: csv::Error| Error::parse(path, e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Everything produced by fitting one configuration, before any file I/O.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub encoder: Encoder,
    pub model: ModelParameters,
    pub history: TrainHistory,
    pub train: RawDataset,
    pub test: RawDataset,
    pub train_metrics: Metrics,
    pub test_metrics: Metrics,
    pub checkpoint: Checkpoint,
}

/// Split, encode, train and score. `cfg` must already be resolved.
pub fn fit(cfg: &RunConfig) -> Result<Fitted> {
    let ds = cfg.load_dataset()?;
    let split_seed = cfg.split_seed();
    let (train, test) = data::train_test_split(&ds, cfg.dataset.split_fraction, split_seed)?;
    let encoder = Encoder::fit(&train, cfg.model.atoms)?;
    let enc_train = encoder.encode_all(&train)?;
    let enc_test = encoder.encode_all(&test)?;
    let initial = cfg.model.initial_parameters()?;
    let (model, history) = training::train(initial, &enc_train, &cfg.training)?;
    log::info!("trained {} parameters in {:.1} s", model.n_trainable(), history.wall_time_s);
    let evo = &cfg.training.evolution;
    let test_preds = training::predict_batch(&model, &enc_test, evo)?;
    let test_metrics = evaluate_metrics(&test_preds, &test.labels)?;
    let info = DatasetInfo {
        provenance: ds.provenance.clone(),
        n_train: train.len(),
        n_test: test.len(),
        split_fraction: cfg.dataset.split_fraction,
        split_seed,
    };
    let checkpoint = Checkpoint::new(&model, &encoder, &cfg.training, &history, info);
    Ok(Fitted { train_metrics: history.final_metrics, test_metrics, encoder, model, history, train, test, checkpoint })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainMetrics {
    pub n_trainable: usize,
    pub train: Metrics,
    pub test: Metrics,
}

/// `train`: writes the checkpoint, per-iteration history, both splits and
/// split metrics into `out`.
pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<Fitted> {
    let fitted = fit(cfg)?;
    ensure_dir(out)?;
    fitted.checkpoint.save(&out.join(CHECKPOINT_FILE))?;
    write_rows(
        &out.join(HISTORY_FILE),
        &["iteration", "loss", "train_accuracy"],
        fitted.history.records.iter().map(|r| vec![r.iteration.to_string(), format!("{:?}", r.loss), format!("{:?}", r.train_accuracy)]),
    )?;
    fitted.train.write_csv(&out.join(TRAIN_DATA_FILE))?;
    fitted.test.write_csv(&out.join(TEST_DATA_FILE))?;
    let m = TrainMetrics { n_trainable: fitted.model.n_trainable(), train: fitted.train_metrics, test: fitted.test_metrics };
    write_json(&out.join(METRICS_FILE), &m)?;
    Ok(fitted)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub n_samples: usize,
    pub shots: Option<usize>,
    pub metrics: Metrics,
    pub soft_labels: Vec<f64>,
    pub labels: Vec<u8>,
}

/// Soft labels for encoded samples; exact unless `shots` is given, in which
/// case sample `i` draws its shots from `split(shot_seed, [i])`.
pub fn soft_labels(
    model: &ModelParameters,
    samples: &[EncodedSample],
    evo: &crate::simulator::EvolutionConfig,
    shots: Option<usize>,
    shot_seed: u64,
) -> Result<Vec<f64>> {
    match shots {
        None => training::predict_batch(model, samples, evo),
        Some(n) => samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let state = evolve(&model.realize(s)?.spec, evo);
                Ok(shot_soft_label(&sample_shots(&state, n, seed::split(shot_seed, &[i as u64]))?))
            })
            .collect(),
    }
}

/// `eval`: metrics and per-sample soft labels of a checkpoint on a CSV.
pub fn cmd_eval(checkpoint: &Path, data: &Path, label_column: &str, cfg: &RunConfig, out: &Path) -> Result<EvalReport> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let model = ckpt.model()?;
    let encoder = ckpt.encoder()?;
    let ds = data::load_csv(data, label_column)?;
    let samples = encoder.encode_all(&ds)?;
    let soft = soft_labels(&model, &samples, &ckpt.train_config.evolution, cfg.shots, cfg.shot_seed())?;
    let metrics = evaluate_metrics(&soft, &ds.labels)?;
    let report = EvalReport { n_samples: ds.len(), shots: cfg.shots, metrics, soft_labels: soft, labels: ds.labels };
    ensure_dir(out)?;
    write_json(&out.join(METRICS_FILE), &report)?;
    write_rows(
        &out.join(PREDICTIONS_FILE),
        &["index", "label", "soft_label", "hard_label"],
        report.soft_labels.iter().zip(&report.labels).enumerate().map(|(i, (p, y))| {
            vec![i.to_string(), y.to_string(), format!("{p:?}"), crate::simulator::hard_label(*p).to_string()]
        }),
    )?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Spacing,
    Grid,
    Intervals,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spacing" => Ok(SweepAxis::Spacing),
            "grid" => Ok(SweepAxis::Grid),
            "intervals" => Ok(SweepAxis::Intervals),
            _ => Err(Error::Config(format!("unknown sweep axis '{s}' (expected spacing, grid or intervals)"))),
        }
    }
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Spacing => "spacing",
            SweepAxis::Grid => "grid",
            SweepAxis::Intervals => "intervals",
        }
    }

    fn apply(&self, cfg: &mut RunConfig, value: &str) -> Result<()> {
        let bad = || Error::Config(format!("invalid {} value '{value}'", self.name()));
        match self {
            SweepAxis::Spacing => cfg.model.spacing = value.trim().parse().map_err(|_| bad())?,
            SweepAxis::Grid => cfg.model.grid = value.trim().parse::<GridKind>().map_err(|_| bad())?,
            SweepAxis::Intervals => cfg.model.intervals = value.trim().parse().map_err(|_| bad())?,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: String,
    pub n_trainable: usize,
    pub final_loss: f64,
    pub train: Metrics,
    pub test: Metrics,
}

/// `sweep`: one model per axis value, all with the same seed.
pub fn cmd_sweep(cfg: &RunConfig, axis: SweepAxis, values: &[String], out: &Path) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut runs = Vec::with_capacity(values.len());
    for v in values {
        let mut c = cfg.clone();
        axis.apply(&mut c, v)?;
        c.model.grid()?;
        c.model.timing().validate()?;
        runs.push(c);
    }
    let mut rows = Vec::with_capacity(values.len());
    for (v, c) in values.iter().zip(runs) {
        log::info!("sweep {} = {v}", axis.name());
        let f = fit(&c)?;
        rows.push(SweepRow {
            value: v.trim().to_string(),
            n_trainable: f.model.n_trainable(),
            final_loss: f.history.records.last().map_or(f.history.initial_loss, |r| r.loss),
            train: f.train_metrics,
            test: f.test_metrics,
        });
    }
    ensure_dir(out)?;
    write_rows(
        &out.join(format!("sweep_{}.csv", axis.name())),
        &[axis.name(), "n_trainable", "final_loss", "train_accuracy", "train_f1", "test_accuracy", "test_f1"],
        rows.iter().map(|r| {
            vec![
                r.value.clone(),
                r.n_trainable.to_string(),
                format!("{:?}", r.final_loss),
                format!("{:?}", r.train.accuracy),
                format!("{:?}", r.train.f1),
                format!("{:?}", r.test.accuracy),
                format!("{:?}", r.test.f1),
            ]
        }),
    )?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseStudy {
    pub multipliers: Vec<f64>,
    pub reports: Vec<RobustnessReport>,
    pub shift_trend: Option<SpearmanTest>,
}

/// `noise`: robustness sweep of a checkpoint over sigma multipliers.
pub fn cmd_noise(checkpoint: &Path, data: &Path, label_column: &str, cfg: &RunConfig, out: &Path) -> Result<NoiseStudy> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let model = ckpt.model()?;
    let ds = data::load_csv(data, label_column)?;
    let samples = ckpt.encoder()?.encode_all(&ds)?;
    let sweep = noise::sigma_sweep(
        &model,
        &samples,
        &cfg.noise_spec(),
        &cfg.noise.multipliers,
        cfg.noise.ensemble,
        &ckpt.train_config.evolution,
    )?;
    let shift_trend = noise::shift_trend(&sweep).ok();
    let study = NoiseStudy {
        multipliers: sweep.iter().map(|(k, _)| *k).collect(),
        reports: sweep.into_iter().map(|(_, r)| r).collect(),
        shift_trend,
    };
    ensure_dir(out)?;
    write_json(&out.join(NOISE_REPORT_FILE), &study)?;
    write_rows(
        &out.join(NOISE_TABLE_FILE),
        &["multiplier", "flip_rate", "member_flip_rate", "mean_abs_shift", "ideal_accuracy", "noisy_accuracy", "accuracy_delta"],
        study.multipliers.iter().zip(&study.reports).map(|(k, r)| {
            [*k, r.flip_rate, r.member_flip_rate, r.mean_abs_shift, r.ideal_accuracy, r.noisy_accuracy, r.accuracy_delta]
                .iter()
                .map(|v| format!("{v:?}"))
                .collect()
        }),
    )?;
    Ok(study)
}

/// Raw features to export a program for.
#[derive(Debug, Clone)]
pub enum ExportSample {
    Features(Vec<f64>),
    FromFile { path: PathBuf, label_column: String, index: usize },
}

/// Program for one sample under a checkpoint, with an optional register
/// spacing override. Nothing is written when validation fails.
pub fn export_program(ckpt: &Checkpoint, sample: &ExportSample, spacing: Option<f64>) -> Result<AnalogProgram> {
    let mut model = ckpt.model()?;
    if let Some(s) = spacing {
        model.grid = AtomGrid::build_unchecked(model.grid.kind(), model.n_atoms(), s)?;
    }
    let encoder = ckpt.encoder()?;
    let (x, label) = match sample {
        ExportSample::Features(x) => (x.clone(), 0),
        ExportSample::FromFile { path, label_column, index } => {
            let ds = data::load_csv(path, label_column)?;
            let x = ds.features.get(*index).cloned().ok_or_else(|| {
                Error::Data(format!("sample index {index} out of range for {} samples", ds.len()))
            })?;
            (x, ds.labels[*index])
        }
    };
    let encoded = encoder.encode(&x, label)?;
    AnalogProgram::from_spec(&model.realize(&encoded)?.spec)
}

/// `export`: writes `program.json` only when every constraint holds.
pub fn cmd_export(checkpoint: &Path, sample: &ExportSample, spacing: Option<f64>, out: &Path) -> Result<PathBuf> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let program = export_program(&ckpt, sample, spacing)?;
    ensure_dir(out)?;
    let path = out.join(PROGRAM_FILE);
    fs::write(&path, program.to_json()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// `synth`: seeded two-blob dataset in the CSV ingestion format.
pub fn cmd_synth(blobs: &BlobConfig, out: &Path) -> Result<PathBuf> {
    let ds = data::synthetic_blobs(blobs)?;
    ensure_dir(out)?;
    let path = out.join(SYNTH_FILE);
    ds.write_csv(&path)?;
    Ok(path)
}

//! Run configuration: one TOML document, every field optional.
//!
//! Precedence is command-line flag, then config file, then built-in default.
//! All randomness derives from the top-level `seed`; seeds inside
//! subsections are overwritten when the run is resolved.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{self, BlobConfig, IdxFamily, RawDataset};
use crate::error::{Error, Result};
use crate::grid::{AtomGrid, GridKind};
use crate::noise::DEFAULT_MULTIPLIERS;
use crate::pulse::{Channel, ChannelLimits, PulseTiming};
use crate::seed;
use crate::simulator::NoiseSpec;
use crate::training::{GradientMode, ModelParameters, TrainConfig};

const STREAM_SPLIT: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_DATA: u64 = 4;
const STREAM_SHOTS: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    Synthetic,
    Pid,
    Csv,
    Mnist,
    Fashion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    pub split_fraction: f64,
    /// CSV or PID file. Relative paths resolve against the data directory.
    pub path: Option<PathBuf>,
    pub label_column: Option<String>,
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub class_a: u8,
    pub class_b: u8,
    pub cap: usize,
    pub blobs: BlobConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            kind: DatasetKind::Synthetic,
            split_fraction: 0.8,
            path: None,
            label_column: None,
            images: None,
            labels: None,
            class_a: 0,
            class_b: 1,
            cap: 1000,
            blobs: BlobConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitsConfig {
    pub rabi: [f64; 2],
    pub detuning: [f64; 2],
    pub local_detuning: [f64; 2],
}

impl Default for LimitsConfig {
    fn default() -> Self {
        let pair = |c| {
            let l = ChannelLimits::default_for(c);
            [l.min, l.max]
        };
        LimitsConfig {
            rabi: pair(Channel::Rabi),
            detuning: pair(Channel::GlobalDetuning),
            local_detuning: pair(Channel::LocalDetuning),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub grid: GridKind,
    pub atoms: usize,
    /// µm.
    pub spacing: f64,
    pub intervals: usize,
    pub hold: f64,
    pub transition: f64,
    pub initial_ramp: f64,
    pub limits: LimitsConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let t = PulseTiming::default();
        ModelConfig {
            grid: GridKind::Square,
            atoms: 4,
            spacing: 12.0,
            intervals: t.n_intervals,
            hold: t.hold,
            transition: t.transition,
            initial_ramp: t.initial_ramp,
            limits: LimitsConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn timing(&self) -> PulseTiming {
        PulseTiming {
            n_intervals: self.intervals,
            hold: self.hold,
            transition: self.transition,
            initial_ramp: self.initial_ramp,
        }
    }

    pub fn limits(&self) -> Result<[ChannelLimits; 3]> {
        let l = &self.limits;
        Ok([
            ChannelLimits::new(l.rabi[0], l.rabi[1])?,
            ChannelLimits::new(l.detuning[0], l.detuning[1])?,
            ChannelLimits::new(l.local_detuning[0], l.local_detuning[1])?,
        ])
    }

    pub fn grid(&self) -> Result<AtomGrid> {
        AtomGrid::build(self.grid, self.atoms, self.spacing)
    }

    /// All-ones parameters for this register and timing.
    pub fn initial_parameters(&self) -> Result<ModelParameters> {
        ModelParameters::with_limits(self.grid()?, self.timing(), self.limits()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub position_sigma: f64,
    pub rabi_relative_sigma: f64,
    pub detuning_sigma: f64,
    pub ensemble: usize,
    pub multipliers: Vec<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        let n = NoiseSpec::default();
        NoiseConfig {
            position_sigma: n.position_sigma,
            rabi_relative_sigma: n.rabi_relative_sigma,
            detuning_sigma: n.detuning_sigma,
            ensemble: 20,
            multipliers: DEFAULT_MULTIPLIERS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Estimate soft labels from this many measurement shots instead of
    /// exact probabilities at evaluation time.
    pub shots: Option<usize>,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub training: TrainConfig,
    pub noise: NoiseConfig,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub grid: Option<GridKind>,
    pub spacing: Option<f64>,
    pub intervals: Option<usize>,
    pub atoms: Option<usize>,
    pub gradient_mode: Option<GradientMode>,
    pub shots: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse(path, e.message()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.grid {
            self.model.grid = v;
        }
        if let Some(v) = o.spacing {
            self.model.spacing = v;
        }
        if let Some(v) = o.intervals {
            self.model.intervals = v;
        }
        if let Some(v) = o.atoms {
            self.model.atoms = v;
        }
        if let Some(v) = o.gradient_mode {
            self.training.gradient_mode = v;
        }
        if o.shots.is_some() {
            self.shots = o.shots;
        }
    }

    /// Propagate the master seed into every subsection.
    pub fn resolve(mut self) -> Result<Self> {
        self.training.seed = seed::split(self.seed, &[STREAM_TRAIN]);
        self.dataset.blobs.seed = seed::split(self.seed, &[STREAM_DATA]);
        if let Some(0) = self.shots {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        if self.noise.ensemble == 0 {
            return Err(Error::Config("noise.ensemble must be at least 1".into()));
        }
        self.training.validate()?;
        self.model.timing().validate()?;
        self.model.limits()?;
        Ok(self)
    }

    pub fn split_seed(&self) -> u64 {
        seed::split(self.seed, &[STREAM_SPLIT])
    }

    pub fn shot_seed(&self) -> u64 {
        seed::split(self.seed, &[STREAM_SHOTS])
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec {
            position_sigma: self.noise.position_sigma,
            rabi_relative_sigma: self.noise.rabi_relative_sigma,
            detuning_sigma: self.noise.detuning_sigma,
            seed: seed::split(self.seed, &[STREAM_NOISE]),
        }
    }

    pub fn load_dataset(&self) -> Result<RawDataset> {
        let d = &self.dataset;
        match d.kind {
            DatasetKind::Synthetic => data::synthetic_blobs(&d.blobs),
            DatasetKind::Pid => data::load_pid(&resolve_data_path(d.path.as_deref(), data::PID_FILE)),
            DatasetKind::Csv => {
                let path = d.path.as_deref().ok_or_else(|| Error::Config("dataset.path is required for csv".into()))?;
                data::load_csv(&resolve_data_path(Some(path), ""), d.label_column.as_deref().unwrap_or("label"))
            }
            DatasetKind::Mnist | DatasetKind::Fashion => {
                let (family, dir) = match d.kind {
                    DatasetKind::Mnist => (IdxFamily::Mnist, "mnist"),
                    _ => (IdxFamily::Fashion, "fashion"),
                };
                let images = resolve_data_path(d.images.as_deref(), &format!("{dir}/train-images-idx3-ubyte"));
                let labels = resolve_data_path(d.labels.as_deref(), &format!("{dir}/train-labels-idx1-ubyte"));
                data::load_idx(&images, &labels, d.class_a, d.class_b, d.cap, seed::split(self.seed, &[STREAM_DATA]), family)
            }
        }
    }
}

/// Absolute paths are kept; relative ones resolve against the data
/// directory when `$RYDBERG_ODE_DATA_DIR` is set, else against the working
/// directory. `None` picks `default_name` inside the data directory.
pub fn resolve_data_path(path: Option<&Path>, default_name: &str) -> PathBuf {
    match path {
        None => data::data_path(default_name),
        Some(p) if p.is_absolute() => p.to_path_buf(),
        Some(p) => match std::env::var_os(data::DATA_DIR_ENV) {
            Some(dir) => PathBuf::from(dir).join(p),
            None => p.to_path_buf(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::from_toml("", Path::new("c.toml")).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.model.atoms, 4);
        assert_eq!(c.model.spacing, 12.0);
        assert_eq!(c.model.grid, GridKind::Square);
        assert_eq!(c.training.iterations, 75);
        assert_eq!(c.initial_parameters_count(), 20);
    }

    impl RunConfig {
        fn initial_parameters_count(&self) -> usize {
            self.model.initial_parameters().unwrap().n_trainable()
        }
    }

    #[test]
    fn precedence_is_flag_then_file_then_default() {
        let text = "seed = 3\n[model]\nspacing = 9.0\nintervals = 5\n[training]\niterations = 10\n";
        let mut c = RunConfig::from_toml(text, Path::new("c.toml")).unwrap();
        c.apply(&Overrides { intervals: Some(1), ..Overrides::default() });
        assert_eq!(c.model.spacing, 9.0);
        assert_eq!(c.model.intervals, 1);
        assert_eq!(c.model.atoms, 4);
        assert_eq!(c.training.iterations, 10);
        assert_eq!(c.seed, 3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml("[model]\nspacnig = 9.0\n", Path::new("c.toml")).unwrap_err();
        assert!(err.to_string().contains("c.toml"));
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml(), Path::new("x")).unwrap(), c);
    }
}

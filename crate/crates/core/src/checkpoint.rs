//! Self-contained, versioned JSON checkpoints.
//!
//! A checkpoint carries everything inference needs: register, timing,
//! channel limits, trained parameters and the fitted encoder. Floats are
//! written in shortest round-trip form, so parse → serialize reproduces the
//! file byte for byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Encoder, FeatureScaler, PcaModel, Provenance};
use crate::error::{Error, Result};
use crate::grid::AtomGrid;
use crate::pulse::{ChannelLimits, PulseTiming};
use crate::training::{Metrics, ModelParameters, TrainConfig, TrainHistory};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedParameters {
    pub pulse_thetas: [Vec<[f64; 2]>; 3],
    pub coupling_params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistorySummary {
    pub iterations: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub final_metrics: Metrics,
}

impl From<&TrainHistory> for HistorySummary {
    fn from(h: &TrainHistory) -> Self {
        HistorySummary {
            iterations: h.records.len(),
            initial_loss: h.initial_loss,
            final_loss: h.records.last().map_or(h.initial_loss, |r| r.loss),
            final_metrics: h.final_metrics,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub provenance: Provenance,
    pub n_train: usize,
    pub n_test: usize,
    pub split_fraction: f64,
    pub split_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub grid: AtomGrid,
    pub timing: PulseTiming,
    pub channel_limits: [ChannelLimits; 3],
    pub model_parameters: TrainedParameters,
    pub pca_model: PcaModel,
    pub feature_scaler: FeatureScaler,
    pub train_config: TrainConfig,
    pub history: HistorySummary,
    pub dataset: DatasetInfo,
}

impl Checkpoint {
    pub fn new(
        model: &ModelParameters,
        encoder: &Encoder,
        train_config: &TrainConfig,
        history: &TrainHistory,
        dataset: DatasetInfo,
    ) -> Self {
        Checkpoint {
            format_version: FORMAT_VERSION,
            grid: model.grid.clone(),
            timing: model.timing,
            channel_limits: model.limits,
            model_parameters: TrainedParameters {
                pulse_thetas: model.pulse_thetas.clone(),
                coupling_params: model.coupling_params.clone(),
            },
            pca_model: encoder.pca.clone(),
            feature_scaler: encoder.scaler.clone(),
            train_config: train_config.clone(),
            history: HistorySummary::from(history),
            dataset,
        }
    }

    /// Rebuild the trained model, checking shapes against grid and timing.
    pub fn model(&self) -> Result<ModelParameters> {
        let mut m = ModelParameters::with_limits(self.grid.clone(), self.timing, self.channel_limits)?;
        let mp = &self.model_parameters;
        if mp.pulse_thetas.iter().any(|c| c.len() != self.timing.n_intervals)
            || mp.coupling_params.len() != self.grid.n_atoms() / 2
        {
            return Err(Error::Config("checkpoint parameters do not match its grid and timing".into()));
        }
        m.pulse_thetas = mp.pulse_thetas.clone();
        m.coupling_params = mp.coupling_params.clone();
        Ok(m)
    }

    pub fn encoder(&self) -> Result<Encoder> {
        let n_atoms = self.grid.n_atoms();
        let want = crate::data::n_inputs(n_atoms);
        if self.feature_scaler.slots.len() != want || self.pca_model.k() < want {
            return Err(Error::Config(format!(
                "checkpoint encoder has {} slots and {} components, {n_atoms} atoms need {want}",
                self.feature_scaler.slots.len(),
                self.pca_model.k()
            )));
        }
        Ok(Encoder { pca: self.pca_model.clone(), scaler: self.feature_scaler.clone(), n_atoms })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let probe: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::parse(path, e))?;
        match probe.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            Some(v) => return Err(Error::parse(path, format!("unsupported checkpoint version {v}"))),
            None => return Err(Error::parse(path, "missing format_version")),
        }
        let c: Checkpoint = serde_json::from_value(probe).map_err(|e| Error::parse(path, e))?;
        c.model()?;
        c.encoder()?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}

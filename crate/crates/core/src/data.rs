//! Dataset ingestion and the feature encoding into pulse and coupling inputs.
//!
//! PCA and MinMax statistics are fitted on training data only. Test points
//! reuse them and are clamped into the target ranges.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Environment variable naming the directory that holds dataset files.
pub const DATA_DIR_ENV: &str = "RYDBERG_ODE_DATA_DIR";
pub const PID_FILE: &str = "pima-indians-diabetes.csv";
pub const PID_LABEL: &str = "Outcome";

const IDX_UBYTE: u8 = 0x08;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdxFamily {
    Mnist,
    Fashion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    MnistPair { class_a: u8, class_b: u8 },
    FashionPair { class_a: u8, class_b: u8 },
    Pid,
    Synthetic { separation: f64, seed: u64 },
    Csv { path: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub provenance: Provenance,
}

impl RawDataset {
    /// Checks rectangular shape, finiteness and binary labels.
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<u8>, provenance: Provenance) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Data(format!("{} feature rows but {} labels", features.len(), labels.len())));
        }
        if features.is_empty() {
            return Err(Error::Data("dataset is empty".into()));
        }
        let width = features[0].len();
        if width == 0 {
            return Err(Error::Data("dataset has no feature columns".into()));
        }
        for (i, row) in features.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Data(format!("row {i} has {} features, expected {width}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("row {i} has a non-finite feature")));
            }
        }
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(Error::Data(format!("label {} at row {i} is not binary", labels[i])));
        }
        Ok(RawDataset { features, labels, provenance })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&y| y == 1).count();
        [self.len() - ones, ones]
    }

    /// Fraction of the more common class.
    pub fn majority_fraction(&self) -> f64 {
        let [a, b] = self.class_counts();
        a.max(b) as f64 / self.len() as f64
    }

    fn subset(&self, idx: &[usize]) -> RawDataset {
        RawDataset {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Header `f0,…,f{d-1},label`; readable by [`load_csv`] with label column `label`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        let mut header: Vec<String> = (0..self.n_features()).map(|j| format!("f{j}")).collect();
        header.push("label".into());
        w.write_record(&header).map_err(|e| csv_err(path, e))?;
        for (row, y) in self.features.iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            rec.push(y.to_string());
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::parse(path, e.to_string())
}

/// Resolve a dataset file name against `$RYDBERG_ODE_DATA_DIR`, falling
/// back to `./data`.
pub fn data_path(name: &str) -> PathBuf {
    let dir = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data"));
    dir.join(name)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Parses an unsigned-byte IDX buffer into (dims, payload).
fn parse_idx<'a>(bytes: &'a [u8], path: &Path) -> Result<(Vec<usize>, &'a [u8])> {
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::parse(path, "bad IDX magic"));
    }
    if bytes[2] != IDX_UBYTE {
        return Err(Error::parse(path, format!("unsupported IDX element type 0x{:02x}", bytes[2])));
    }
    let ndim = bytes[3] as usize;
    if ndim == 0 {
        return Err(Error::parse(path, "IDX file has zero dimensions"));
    }
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(Error::parse(path, "truncated IDX header"));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let expected = dims.iter().product::<usize>();
    let payload = &bytes[header..];
    if payload.len() < expected {
        return Err(Error::parse(path, format!("truncated IDX payload: {} of {expected} bytes", payload.len())));
    }
    Ok((dims, &payload[..expected]))
}

/// Two-class subset of an IDX image/label pair. `class_a` maps to label 0.
/// At most `cap` samples are kept, chosen uniformly with `seed`; file order
/// is preserved.
pub fn load_idx(
    images: &Path,
    labels: &Path,
    class_a: u8,
    class_b: u8,
    cap: usize,
    seed: u64,
    family: IdxFamily,
) -> Result<RawDataset> {
    if class_a == class_b {
        return Err(Error::Data(format!("class pair ({class_a}, {class_b}) must be distinct")));
    }
    let img_bytes = read_file(images)?;
    let lbl_bytes = read_file(labels)?;
    let (img_dims, pixels) = parse_idx(&img_bytes, images)?;
    let (lbl_dims, lbls) = parse_idx(&lbl_bytes, labels)?;
    if lbl_dims.len() != 1 {
        return Err(Error::parse(labels, "label file must be one-dimensional"));
    }
    let n = img_dims[0];
    if lbl_dims[0] != n {
        return Err(Error::Data(format!("{n} images but {} labels", lbl_dims[0])));
    }
    let width: usize = img_dims[1..].iter().product();
    let mut keep: Vec<usize> = (0..n).filter(|&i| lbls[i] == class_a || lbls[i] == class_b).collect();
    for class in [class_a, class_b] {
        if !keep.iter().any(|&i| lbls[i] == class) {
            return Err(Error::Data(format!("class {class} is absent from {}", labels.display())));
        }
    }
    if keep.len() > cap {
        let mut rng = seed::rng(seed);
        keep.shuffle(&mut rng);
        keep.truncate(cap);
        keep.sort_unstable();
    }
    let features = keep
        .iter()
        .map(|&i| pixels[i * width..(i + 1) * width].iter().map(|&p| p as f64).collect())
        .collect();
    let labels_out = keep.iter().map(|&i| u8::from(lbls[i] == class_b)).collect();
    let provenance = match family {
        IdxFamily::Mnist => Provenance::MnistPair { class_a, class_b },
        IdxFamily::Fashion => Provenance::FashionPair { class_a, class_b },
    };
    RawDataset::new(features, labels_out, provenance)
}

/// Numeric CSV with a header row. Every column except `label_column` is a
/// feature; labels must be 0 or 1.
pub fn load_csv(path: &Path, label_column: &str) -> Result<RawDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        },
        _ => csv_err(path, e),
    })?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.is_empty() {
        return Err(Error::parse(path, "empty file"));
    }
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| Error::parse(path, format!("missing label column '{label_column}'")))?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = r + 2;
        let mut row = Vec::with_capacity(rec.len().saturating_sub(1));
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, format!("non-numeric cell '{cell}' at line {line}, column {}", c + 1)))?;
            if c == label_idx {
                if v != 0.0 && v != 1.0 {
                    return Err(Error::parse(path, format!("label {v} at line {line} is not 0 or 1")));
                }
                labels.push(v as u8);
            } else {
                row.push(v);
            }
        }
        features.push(row);
    }
    if features.is_empty() {
        return Err(Error::parse(path, "no data rows"));
    }
    RawDataset::new(features, labels, Provenance::Csv { path: path.display().to_string() })
}

/// The Pima Indians Diabetes table from the data directory.
pub fn load_pid(path: &Path) -> Result<RawDataset> {
    let mut ds = load_csv(path, PID_LABEL)?;
    ds.provenance = Provenance::Pid;
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobConfig {
    pub n_samples: usize,
    pub n_features: usize,
    /// Distance between the two centers in units of `sigma`.
    pub separation: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for BlobConfig {
    fn default() -> Self {
        BlobConfig { n_samples: 250, n_features: 8, separation: 9.0, sigma: 1.0, seed: 0 }
    }
}

/// Two isotropic Gaussian blobs whose centers sit at `∓separation·sigma/2`
/// along the all-ones diagonal. Label 0 gets `ceil(n/2)` points; rows are
/// shuffled.
pub fn synthetic_blobs(cfg: &BlobConfig) -> Result<RawDataset> {
    if cfg.n_samples < 2 || cfg.n_features == 0 {
        return Err(Error::Data("blobs need at least 2 samples and 1 feature".into()));
    }
    if !(cfg.separation >= 0.0) || !cfg.separation.is_finite() || !(cfg.sigma > 0.0) || !cfg.sigma.is_finite() {
        return Err(Error::Data(format!("invalid blob geometry: separation {}, sigma {}", cfg.separation, cfg.sigma)));
    }
    let mut rng = seed::rng(cfg.seed);
    let offset = cfg.separation * cfg.sigma / 2.0 / (cfg.n_features as f64).sqrt();
    let n0 = cfg.n_samples.div_ceil(2);
    let mut labels: Vec<u8> = (0..cfg.n_samples).map(|i| u8::from(i >= n0)).collect();
    labels.shuffle(&mut rng);
    let features = labels
        .iter()
        .map(|&y| {
            let c = if y == 0 { -offset } else { offset };
            (0..cfg.n_features)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c + cfg.sigma * z
                })
                .collect()
        })
        .collect();
    RawDataset::new(features, labels, Provenance::Synthetic { separation: cfg.separation, seed: cfg.seed })
}

/// Seeded split stratified by label. Each class contributes
/// `round(fraction·count)` training points, kept at least one on each side.
pub fn train_test_split(ds: &RawDataset, fraction: f64, seed: u64) -> Result<(RawDataset, RawDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Data(format!("split fraction {fraction} must lie strictly between 0 and 1")));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..=1u8 {
        let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::Data(format!("class {class} has a single sample; a split would leave one side empty")));
        }
        idx.shuffle(&mut seed::rng_at(seed, &[class as u64]));
        let k = ((fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&test)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` orthonormal rows, highest variance first.
    pub components: Vec<Vec<f64>>,
    pub explained_variance_ratio: Vec<f64>,
}

impl PcaModel {
    pub fn n_inputs(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::Data(format!("sample has {} features, PCA expects {}", x.len(), self.mean.len())));
        }
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(x).zip(&self.mean).map(|((c, x), m)| c * (x - m)).sum())
            .collect())
    }

    /// Map component scores back to centered feature space.
    pub fn back_project(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mean.len()];
        for (c, zi) in self.components.iter().zip(z) {
            for (o, ci) in out.iter_mut().zip(c) {
                *o += zi * ci;
            }
        }
        out
    }
}

/// Principal components of the training features via the covariance
/// eigendecomposition. Each component's largest-magnitude entry is
/// positive (first such entry on ties).
pub fn fit_pca(train: &RawDataset, k: usize) -> Result<PcaModel> {
    let (n, d) = (train.len(), train.n_features());
    if k == 0 || k > n.min(d) {
        return Err(Error::Data(format!("k = {k} must lie in 1..={}", n.min(d))));
    }
    let mut mean = vec![0.0; d];
    for row in &train.features {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| train.features[i][j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (n.max(2) - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    if !(total > 0.0) {
        return Err(Error::Data("training features have zero variance".into()));
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut components = Vec::with_capacity(k);
    let mut ratios = Vec::with_capacity(k);
    for &j in order.iter().take(k) {
        let mut c: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
        let pivot = c
            .iter()
            .enumerate()
            .fold(0, |best, (i, v)| if v.abs() > c[best].abs() { i } else { best });
        if c[pivot] < 0.0 {
            c.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(c);
        ratios.push(eig.eigenvalues[j].max(0.0) / total);
    }
    Ok(PcaModel { mean, components, explained_variance_ratio: ratios })
}

/// Ω and Δ input range (rad/µs).
pub const PULSE_TARGET: [f64; 2] = [FRAC_PI_2, 2.0 * PI];
/// δ input range (rad/µs).
pub const LOCAL_TARGET: [f64; 2] = [-2.0 * PI, -FRAC_PI_2];
pub const COUPLING_TARGET: [f64; 2] = [0.0, 1.0];

/// Number of encoded inputs for `n_atoms`: three pulse slots plus one
/// coupling per even-indexed atom.
pub fn n_inputs(n_atoms: usize) -> usize {
    3 + n_atoms / 2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalerSlot {
    pub min: f64,
    pub max: f64,
    pub target: [f64; 2],
}

impl ScalerSlot {
    /// Affine MinMax map with exact endpoints; values outside `[min, max]`
    /// clamp to the target endpoints. A constant slot maps to the target
    /// midpoint.
    pub fn apply(&self, x: f64) -> f64 {
        let [lo, hi] = self.target;
        if self.max <= self.min {
            return 0.5 * (lo + hi);
        }
        if x <= self.min {
            return lo;
        }
        if x >= self.max {
            return hi;
        }
        let v = lo + (x - self.min) / (self.max - self.min) * (hi - lo);
        v.clamp(lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub slots: Vec<ScalerSlot>,
}

impl FeatureScaler {
    /// Fit per-slot extrema of the first `3 + n_atoms/2` projection columns.
    pub fn fit(projections: &[Vec<f64>], n_atoms: usize) -> Result<Self> {
        let n_slots = n_inputs(n_atoms);
        if projections.is_empty() {
            return Err(Error::Data("cannot fit a scaler on zero samples".into()));
        }
        if let Some(p) = projections.iter().find(|p| p.len() < n_slots) {
            return Err(Error::Data(format!("{} projection values, {n_slots} slots needed", p.len())));
        }
        let slots = (0..n_slots)
            .map(|s| {
                let (min, max) = projections
                    .iter()
                    .map(|p| p[s])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                ScalerSlot { min, max, target: slot_target(s) }
            })
            .collect();
        Ok(FeatureScaler { slots })
    }
}

fn slot_target(slot: usize) -> [f64; 2] {
    match slot {
        0 | 1 => PULSE_TARGET,
        2 => LOCAL_TARGET,
        _ => COUPLING_TARGET,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedSample {
    /// `(ω_Ω, ω_Δ, ω_δ)` in rad/µs.
    pub pulse_inputs: [f64; 3],
    /// Local weights for atoms 0, 2, 4, …
    pub coupling_inputs: Vec<f64>,
    pub label: u8,
}

/// Fitted PCA plus scaler for a register of `n_atoms`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub pca: PcaModel,
    pub scaler: FeatureScaler,
    pub n_atoms: usize,
}

impl Encoder {
    /// Fit both stages on `train` with `k = 3 + n_atoms/2` components.
    pub fn fit(train: &RawDataset, n_atoms: usize) -> Result<Self> {
        let pca = fit_pca(train, n_inputs(n_atoms))?;
        let proj = train.features.iter().map(|x| pca.project(x)).collect::<Result<Vec<_>>>()?;
        let scaler = FeatureScaler::fit(&proj, n_atoms)?;
        Ok(Encoder { pca, scaler, n_atoms })
    }

    pub fn encode(&self, x: &[f64], label: u8) -> Result<EncodedSample> {
        encode(x, label, &self.pca, &self.scaler, self.n_atoms)
    }

    pub fn encode_all(&self, ds: &RawDataset) -> Result<Vec<EncodedSample>> {
        ds.features.iter().zip(&ds.labels).map(|(x, &y)| self.encode(x, y)).collect()
    }
}

/// Components 1–3 feed `(ω_Ω, ω_Δ, ω_δ)`; components 4… feed the
/// even-atom couplings in atom order.
pub fn encode(x: &[f64], label: u8, pca: &PcaModel, scaler: &FeatureScaler, n_atoms: usize) -> Result<EncodedSample> {
    let n_slots = n_inputs(n_atoms);
    if scaler.slots.len() != n_slots {
        return Err(Error::Data(format!("scaler has {} slots, {n_atoms} atoms need {n_slots}", scaler.slots.len())));
    }
    if pca.k() < n_slots {
        return Err(Error::Data(format!("PCA keeps {} components, {n_slots} needed", pca.k())));
    }
    let z = pca.project(x)?;
    let v: Vec<f64> = scaler.slots.iter().zip(&z).map(|(s, &zi)| s.apply(zi)).collect();
    Ok(EncodedSample { pulse_inputs: [v[0], v[1], v[2]], coupling_inputs: v[3..].to_vec(), label })
}

/// Write an unsigned-byte IDX file with the given dimensions.
pub fn write_idx(path: &Path, dims: &[u32], payload: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = vec![0, 0, IDX_UBYTE, dims.len() as u8];
    for d in dims {
        buf.extend_from_slice(&d.to_be_bytes());
    }
    buf.extend_from_slice(payload);
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ds(features: Vec<Vec<f64>>, labels: Vec<u8>) -> RawDataset {
        RawDataset::new(features, labels, Provenance::Synthetic { separation: 0.0, seed: 0 }).unwrap()
    }

    #[test]
    fn scaler_examples() {
        let s = ScalerSlot { min: -2.0, max: 6.0, target: PULSE_TARGET };
        assert_abs_diff_eq!(s.apply(0.0), FRAC_PI_2 + 0.25 * (2.0 * PI - FRAC_PI_2), epsilon = 1e-12);
        assert_abs_diff_eq!(s.apply(0.0), 2.7489, epsilon = 1e-4);
        assert_eq!(s.apply(-2.0), FRAC_PI_2);
        assert_eq!(s.apply(6.0), 2.0 * PI);
        assert_eq!(s.apply(1e9), 2.0 * PI);
        let d = ScalerSlot { min: -2.0, max: 6.0, target: LOCAL_TARGET };
        assert_eq!(d.apply(-2.0), -2.0 * PI);
        assert_eq!(d.apply(-50.0), -2.0 * PI);
    }

    #[test]
    fn pca_rank_one_line() {
        let f: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let p = fit_pca(&ds(f, vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1]), 1).unwrap();
        assert_abs_diff_eq!(p.explained_variance_ratio[0], 1.0, epsilon = 1e-12);
        let c = &p.components[0];
        assert_abs_diff_eq!(c[1] / c[0], 2.0, epsilon = 1e-9);
        assert!(c[1] > 0.0);
    }

    #[test]
    fn pca_errors() {
        let flat = ds(vec![vec![1.0, 1.0]; 4], vec![0, 1, 0, 1]);
        assert!(fit_pca(&flat, 1).is_err());
        let d = ds(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0, 1]);
        assert!(fit_pca(&d, 0).is_err());
        assert!(fit_pca(&d, 3).is_err());
    }

    #[test]
    fn split_examples() {
        let d = ds((0..100).map(|i| vec![i as f64]).collect(), (0..100).map(|i| (i % 2) as u8).collect());
        let (a, b) = train_test_split(&d, 0.8, 3).unwrap();
        assert_eq!((a.len(), b.len()), (80, 20));
        assert!(a.class_counts().iter().all(|&c| c > 0));
        assert!(b.class_counts().iter().all(|&c| c > 0));
        let (a2, _) = train_test_split(&d, 0.8, 3).unwrap();
        assert_eq!(a, a2);
        let mut all: Vec<f64> = a.features.iter().chain(&b.features).map(|r| r[0]).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..100).map(|i| i as f64).collect::<Vec<_>>());
        assert!(train_test_split(&d, 1.0, 3).is_err());
        assert!(train_test_split(&d, 0.0, 3).is_err());
        let lone = ds(vec![vec![0.0], vec![1.0], vec![2.0]], vec![0, 0, 1]);
        assert!(train_test_split(&lone, 0.5, 0).is_err());
    }

    #[test]
    fn encode_assigns_slots_in_variance_order() {
        let mut rng = seed::rng(11);
        let scales = [10.0, 5.0, 3.0, 2.0, 1.0, 0.1];
        let f: Vec<Vec<f64>> = (0..400)
            .map(|_| {
                scales
                    .iter()
                    .map(|s| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        s * z
                    })
                    .collect()
            })
            .collect();
        let d = ds(f, (0..400).map(|i| (i % 2) as u8).collect());
        let enc = Encoder::fit(&d, 4).unwrap();
        for (j, c) in enc.pca.components.iter().enumerate() {
            assert!(c[j] > 0.99, "component {j} is {c:?}");
        }
        let mut x = vec![0.0; 6];
        x[0] = 1e6;
        let e = enc.encode(&x, 1).unwrap();
        assert_eq!(e.pulse_inputs[0], 2.0 * PI);
        assert_eq!(e.coupling_inputs.len(), 2);
        x[4] = -1e6;
        let e = enc.encode(&x, 1).unwrap();
        assert_eq!(e.coupling_inputs[1], 0.0);
        assert!(enc.encode(&[0.0; 5], 0).is_err());
    }

    #[test]
    fn blobs_are_seeded_and_balanced() {
        let cfg = BlobConfig { n_samples: 200, separation: 0.0, ..BlobConfig::default() };
        let a = synthetic_blobs(&cfg).unwrap();
        assert_eq!(a.class_counts(), [100, 100]);
        assert_eq!(a, synthetic_blobs(&cfg).unwrap());
        assert!(synthetic_blobs(&BlobConfig { separation: -1.0, ..cfg.clone() }).is_err());
        assert!(synthetic_blobs(&BlobConfig { n_samples: 1, ..cfg }).is_err());
    }

    #[test]
    fn idx_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = (dir.path().join("img"), dir.path().join("lbl"));
        let labels: Vec<u8> = vec![3, 7, 1, 3, 7, 7];
        let pixels: Vec<u8> = (0..6 * 4).map(|i| i as u8).collect();
        write_idx(&img, &[6, 2, 2], &pixels).unwrap();
        write_idx(&lbl, &[6], &labels).unwrap();
        let d = load_idx(&img, &lbl, 3, 7, 100, 0, IdxFamily::Mnist).unwrap();
        assert_eq!(d.len(), 5);
        assert_eq!(d.n_features(), 4);
        assert_eq!(d.labels, vec![0, 1, 0, 1, 1]);
        assert_eq!(d.features[1], vec![4.0, 5.0, 6.0, 7.0]);
        let capped = load_idx(&img, &lbl, 3, 7, 3, 9, IdxFamily::Mnist).unwrap();
        assert_eq!(capped.len(), 3);
        assert!(load_idx(&img, &lbl, 3, 10, 100, 0, IdxFamily::Mnist).is_err());
        write_idx(&img, &[6, 2, 2], &pixels[..20]).unwrap();
        assert!(matches!(load_idx(&img, &lbl, 3, 7, 100, 0, IdxFamily::Mnist), Err(Error::Parse { .. })));
        fs::write(&img, [1, 2, 3, 4]).unwrap();
        assert!(load_idx(&img, &lbl, 3, 7, 100, 0, IdxFamily::Mnist).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let d = synthetic_blobs(&BlobConfig { n_samples: 10, n_features: 3, ..BlobConfig::default() }).unwrap();
        d.write_csv(&p).unwrap();
        let back = load_csv(&p, "label").unwrap();
        assert_eq!(back.features, d.features);
        assert_eq!(back.labels, d.labels);
        assert!(load_csv(&p, "Outcome").is_err());
        fs::write(&p, "").unwrap();
        assert!(load_csv(&p, "label").is_err());
        fs::write(&p, "a,label\n1,0\nx,1\n").unwrap();
        assert!(load_csv(&p, "label").is_err());
        let err = load_csv(&dir.path().join("missing.csv"), "label").unwrap_err();
        assert!(err.to_string().contains("missing.csv"));
    }
}

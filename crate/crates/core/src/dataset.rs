//! From labeled telemetry to model-ready tensors.
//!
//! Each snapshot becomes two matrices:
//!
//! * wavelength branch, one row per probe in ascending slot order:
//!   `[cfo, cdc, dgd, rx_power, osnr, q, pdl, electrical_snr, pe_sin, pe_cos]`
//! * component branch, one row per ROADM in node order:
//!   `[node_total, window_1, window_2, window_3, probe_1..probe_4, pe_sin, pe_cos]`
//!
//! Raw columns are standardised with statistics from the training split only;
//! positional-encoding columns are appended afterwards, untouched.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::Tensor2;
use crate::physics::{OcmReading, ProbeReading};
use crate::posenc::PositionalEncoding;
use crate::scenarios::{ImpairmentKind, Label, LabeledSnapshot};
use crate::seed::derive_seed;
use crate::topology::{NODE_COUNT, PROBE_COUNT, USER_COUNT};

pub const DATASET_SCHEMA_VERSION: u32 = 1;
pub const PROBE_FEATURES: usize = 8;
pub const NODE_FEATURES: usize = 1 + USER_COUNT + PROBE_COUNT;
pub const BRANCH_CHANNELS: usize = PROBE_FEATURES + 2;
pub const RAW_FEATURES: usize = PROBE_COUNT * PROBE_FEATURES + NODE_COUNT * NODE_FEATURES;

pub const PROBE_FEATURE_NAMES: [&str; PROBE_FEATURES] =
    ["cfo", "cdc", "dgd", "rx_power", "osnr", "q_factor", "pdl", "electrical_snr"];

/// One 30-second poll of every monitored device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySnapshot {
    pub probe_readings: Vec<ProbeReading>,
    pub ocm_readings: Vec<OcmReading>,
    pub timestamp_index: u64,
}

impl TelemetrySnapshot {
    /// Flattened raw features: probe rows then node rows. Fails naming the
    /// first device whose reading is absent or malformed.
    pub fn raw_features(&self) -> Result<Vec<f64>> {
        let mut probes: Vec<&ProbeReading> = self.probe_readings.iter().collect();
        probes.sort_by_key(|p| p.slot);
        for id in 0..PROBE_COUNT {
            if !probes.iter().any(|p| p.probe_id == id) {
                return Err(Error::MissingReading(format!("probe {id}")));
            }
        }
        if probes.len() != PROBE_COUNT {
            return Err(Error::MissingReading(format!(
                "probe set ({} readings for {PROBE_COUNT} probes)",
                probes.len()
            )));
        }

        let mut out = Vec::with_capacity(RAW_FEATURES);
        for p in probes {
            out.extend_from_slice(&p.features());
        }
        for node_id in 0..NODE_COUNT {
            let ocm = self
                .ocm_readings
                .iter()
                .find(|o| o.node_id == node_id)
                .ok_or_else(|| Error::MissingReading(format!("OCM at node {node_id}")))?;
            if ocm.window_total_power_dbm.len() != USER_COUNT || ocm.per_probe_power_dbm.len() != PROBE_COUNT {
                return Err(Error::MissingReading(format!("OCM channel readings at node {node_id}")));
            }
            out.push(ocm.node_total_output_dbm);
            out.extend_from_slice(&ocm.window_total_power_dbm);
            out.extend_from_slice(&ocm.per_probe_power_dbm);
        }
        if self.ocm_readings.len() != NODE_COUNT {
            return Err(Error::MissingReading(format!(
                "OCM set ({} readings for {NODE_COUNT} nodes)",
                self.ocm_readings.len()
            )));
        }
        Ok(out)
    }
}

/// Affine map of one raw column. Degenerate columns had zero training
/// variance and always map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub std: f64,
    pub degenerate: bool,
}

impl ColumnStats {
    pub fn apply(&self, x: f64) -> f64 {
        if self.degenerate {
            0.0
        } else {
            (x - self.mean) / self.std
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub columns: Vec<ColumnStats>,
}

impl NormParams {
    /// Column statistics over `rows[indices]`.
    pub fn fit(rows: &[Vec<f64>], indices: &[usize]) -> Result<NormParams> {
        if indices.is_empty() {
            return Err(Error::Domain("cannot fit normalisation on an empty set".into()));
        }
        let width = rows
            .get(indices[0])
            .ok_or_else(|| Error::Domain(format!("index {} out of range", indices[0])))?
            .len();
        let n = indices.len() as f64;
        let mut columns = Vec::with_capacity(width);
        for c in 0..width {
            let mut sum = 0.0;
            for &i in indices {
                let row = rows
                    .get(i)
                    .ok_or_else(|| Error::Domain(format!("index {i} out of range")))?;
                if row.len() != width {
                    return Err(Error::Shape(format!("row {i} has {} columns, expected {width}", row.len())));
                }
                sum += row[c];
            }
            let mean = sum / n;
            let var = indices.iter().map(|&i| (rows[i][c] - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            let degenerate = !(std > 1e-12 * mean.abs().max(1.0));
            columns.push(ColumnStats {
                mean,
                std: if degenerate { 1.0 } else { std },
                degenerate,
            });
        }
        Ok(NormParams { columns })
    }

    pub fn apply(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.columns.len() {
            return Err(Error::Shape(format!(
                "{} raw features for {} normalisation columns",
                raw.len(),
                self.columns.len()
            )));
        }
        let out: Vec<f64> = raw.iter().zip(&self.columns).map(|(&x, s)| s.apply(x)).collect();
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::NumericFault("normalised features".into()))
        }
    }
}

/// Model-ready two-branch input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTensor {
    pub wavelength: Tensor2,
    pub component: Tensor2,
    pub label: usize,
}

impl FeatureTensor {
    /// Normalised features without encoding columns, as fed to the MLP.
    pub fn flat_features(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(RAW_FEATURES);
        for t in [&self.wavelength, &self.component] {
            for r in 0..t.rows() {
                out.extend_from_slice(&t.row(r)[..t.cols() - 2]);
            }
        }
        out
    }
}

fn with_encoding(values: &[f64], rows: usize, width: usize, pe: &PositionalEncoding) -> Result<Tensor2> {
    let mut t = Tensor2::zeros(rows, width + pe.dim());
    for r in 0..rows {
        let row = t.row_mut(r);
        row[..width].copy_from_slice(&values[r * width..(r + 1) * width]);
        row[width..].copy_from_slice(&pe.encode(r as i64)?);
    }
    Ok(t)
}

/// Tensorises one labeled snapshot with already-fitted normalisation.
pub fn to_feature_tensor(snapshot: &LabeledSnapshot, params: &NormParams) -> Result<FeatureTensor> {
    let normalised = params.apply(&snapshot.features.raw_features()?)?;
    let pe = PositionalEncoding::default();
    let split = PROBE_COUNT * PROBE_FEATURES;
    Ok(FeatureTensor {
        wavelength: with_encoding(&normalised[..split], PROBE_COUNT, PROBE_FEATURES, &pe)?,
        component: with_encoding(&normalised[split..], NODE_COUNT, NODE_FEATURES, &pe)?,
        label: snapshot.label.index(),
    })
}

/// Fits normalisation on the training indices and tensorises the whole corpus.
pub fn normalize(corpus: &[LabeledSnapshot], train: &[usize]) -> Result<(Vec<FeatureTensor>, NormParams)> {
    if corpus.is_empty() {
        return Err(Error::Domain("empty corpus".into()));
    }
    let raw = corpus
        .iter()
        .map(|s| s.features.raw_features())
        .collect::<Result<Vec<_>>>()?;
    let params = NormParams::fit(&raw, train)?;
    let tensors = corpus
        .iter()
        .map(|s| to_feature_tensor(s, &params))
        .collect::<Result<Vec<_>>>()?;
    Ok((tensors, params))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    /// Short content hash identifying this partition.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for (tag, set) in [(b'r', &self.train), (b't', &self.test)] {
            hasher.update([tag]);
            for i in set {
                hasher.update((*i as u64).to_le_bytes());
            }
        }
        hex::encode(&hasher.finalize()[..8])
    }
}

/// Per-class 3:1 split. Each class keeps `round(n / 4)` samples for test,
/// chosen by a seeded shuffle within the class.
pub fn stratified_split(labels: &[Label], seed: u64) -> Result<SplitIndices> {
    let mut by_class: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, &label) in labels.iter().enumerate() {
        by_class.entry(label).or_default().push(i);
    }
    let mut train = Vec::with_capacity(labels.len());
    let mut test = Vec::with_capacity(labels.len() / 4 + by_class.len());
    for (label, mut members) in by_class {
        if members.len() < 4 {
            return Err(Error::Domain(format!(
                "class {label} has {} members, stratified split needs at least 4",
                members.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, label.index() as u64));
        members.shuffle(&mut rng);
        let n_test = (members.len() as f64 / 4.0).round() as usize;
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSample {
    pub corpus_index: usize,
    pub impairment_kind: ImpairmentKind,
    pub tensor: FeatureTensor,
}

/// One side of a split, serialised for the `train`/`evaluate` stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorDataset {
    pub schema_version: u32,
    pub split_id: String,
    pub norm_params: NormParams,
    pub samples: Vec<DatasetSample>,
}

impl TensorDataset {
    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.tensor.label).collect()
    }

    pub fn tensors(&self) -> Vec<&FeatureTensor> {
        self.samples.iter().map(|s| &s.tensor).collect()
    }

    pub fn kinds(&self) -> Vec<ImpairmentKind> {
        self.samples.iter().map(|s| s.impairment_kind).collect()
    }

    pub fn flat_features(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.tensor.flat_features()).collect()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let ds: TensorDataset = serde_json::from_str(text)?;
        if ds.schema_version != DATASET_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                what: "tensor dataset",
                found: ds.schema_version,
                expected: DATASET_SCHEMA_VERSION,
            });
        }
        Ok(ds)
    }

    /// Flat CSV: identifiers, then every wavelength cell, then every component cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("corpus_index,label,impairment_kind");
        if let Some(first) = self.samples.first() {
            for (prefix, t) in [("w", &first.tensor.wavelength), ("c", &first.tensor.component)] {
                for r in 0..t.rows() {
                    for c in 0..t.cols() {
                        let _ = write!(out, ",{prefix}{r}_{c}");
                    }
                }
            }
        }
        out.push('\n');
        for s in &self.samples {
            let _ = write!(out, "{},{},{}", s.corpus_index, s.tensor.label, s.impairment_kind);
            for v in s.tensor.wavelength.data().iter().chain(s.tensor.component.data()) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Both sides of a split, tensorised with training-only statistics.
pub fn build_datasets(corpus: &[LabeledSnapshot], split: &SplitIndices) -> Result<(TensorDataset, TensorDataset)> {
    let (tensors, params) = normalize(corpus, &split.train)?;
    let split_id = split.fingerprint();
    let side = |indices: &[usize]| TensorDataset {
        schema_version: DATASET_SCHEMA_VERSION,
        split_id: split_id.clone(),
        norm_params: params.clone(),
        samples: indices
            .iter()
            .map(|&i| DatasetSample {
                corpus_index: i,
                impairment_kind: corpus[i].impairment_kind(),
                tensor: tensors[i].clone(),
            })
            .collect(),
    };
    Ok((side(&split.train), side(&split.test)))
}

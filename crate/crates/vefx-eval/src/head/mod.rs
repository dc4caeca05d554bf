//! A trainable multi-dimension ordinal scoring head over feature vectors.
//!
//! The head shares one hidden layer across the three quality dimensions
//! and distinguishes them by a learned per-dimension query added before
//! the activation; a shared output map then produces three threshold
//! logits per dimension, one for each of the ordered decisions "score
//! greater than 1, 2, 3".
//!
//! Each threshold logit is conditional: `sigma(z_k)` is read as
//! P(Y > k | Y > k-1), so the unconditional P(Y > k) is the running
//! product and cumulative monotonicity holds by construction. The loss
//! trains threshold k only on samples with label >= k; the soft score is
//! the expected value `1 + sum_k P(Y > k)` on [1, 4]. A marginal reading
//! of the logits stays available behind [`InferenceMode::Marginal`].

pub mod grad_check;
pub mod train;

use serde::{Deserialize, Serialize};
use std::io::BufRead;
use std::path::Path;

use crate::records::{DataError, LoadOptions, Loaded, SourcePos};
use crate::types::{Dimension, LabelTriplet, OrdinalScore, SoftScore};

/// Number of score levels; thresholds are K - 1 = 3.
pub const NUM_LEVELS: usize = 4;
pub const NUM_THRESHOLDS: usize = NUM_LEVELS - 1;

#[derive(Debug, thiserror::Error)]
pub enum HeadError {
    #[error("feature vector '{sample_id}' has {got} entries, expected {expected}")]
    ShapeMismatch {
        sample_id: String,
        expected: usize,
        got: usize,
    },
    #[error("non-finite loss in epoch {epoch}, batch {batch} (first sample '{sample_id}')")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        sample_id: String,
    },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("epsilon {value} outside (1e-7, 1e-3)")]
    BadEpsilon { value: f64 },
    #[error("unsupported params version {got}, expected {expected}")]
    BadVersion { got: u32, expected: u32 },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid params file: {0}")]
    BadParamsFile(String),
    #[error("gradient length {got} does not match parameter count {expected}")]
    GradientShape { expected: usize, got: usize },
}

/// An input feature vector (stands in for frozen backbone states).
#[derive(Debug, Clone)]
pub struct FeatureVector {
    pub sample_id: String,
    pub values: Vec<f64>,
}

/// Threshold logits for one dimension: decisions Y>1, Y>2, Y>3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdLogits {
    pub z: [f64; NUM_THRESHOLDS],
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy from the logit, stable for large magnitudes.
fn bce_with_logit(z: f64, target: f64) -> f64 {
    z.max(0.0) - z * target + (-z.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InferenceMode {
    /// sigma(z_k) = P(Y > k | Y > k-1); P(Y > k) is the running product.
    #[default]
    Conditional,
    /// sigma(z_k) read directly as P(Y > k); monotonicity not guaranteed.
    Marginal,
}

impl ThresholdLogits {
    pub fn conditional_probs(&self) -> [f64; NUM_THRESHOLDS] {
        [sigmoid(self.z[0]), sigmoid(self.z[1]), sigmoid(self.z[2])]
    }

    /// Unconditional P(Y > k) under the chain rule.
    pub fn cumulative_probs(&self) -> [f64; NUM_THRESHOLDS] {
        let c = self.conditional_probs();
        [c[0], c[0] * c[1], c[0] * c[1] * c[2]]
    }

    fn cumulative_with_mode(&self, mode: InferenceMode) -> [f64; NUM_THRESHOLDS] {
        match mode {
            InferenceMode::Conditional => self.cumulative_probs(),
            InferenceMode::Marginal => self.conditional_probs(),
        }
    }
}

/// Expected-value decoding of the threshold probabilities onto [1, 4].
pub fn soft_score(logits: &ThresholdLogits) -> SoftScore {
    soft_score_with_mode(logits, InferenceMode::Conditional)
}

pub fn soft_score_with_mode(logits: &ThresholdLogits, mode: InferenceMode) -> SoftScore {
    let p = logits.cumulative_with_mode(mode);
    let value = 1.0 + p[0] + p[1] + p[2];
    SoftScore::new(value.clamp(1.0, 4.0)).expect("probabilities keep the score in range")
}

/// Discrete decoding: 1 + the number of cumulative probabilities above 1/2.
pub fn hard_score(logits: &ThresholdLogits) -> OrdinalScore {
    let p = logits.cumulative_probs();
    let count = p.iter().filter(|&&v| v > 0.5).count() as u8;
    OrdinalScore::new(1 + count).expect("count <= 3")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossNormalization {
    /// Divide every dimension's sum by K - 1 = 3, exactly as the
    /// objective is written.
    #[default]
    FixedKMinus1,
    /// Divide by the number of active thresholds instead (ablation).
    ActiveThresholds,
}

/// Conditional ordinal loss for one sample.
///
/// Threshold k of dimension d contributes binary cross-entropy against the
/// target 1[y_d > k], but only when y_d >= k; thresholds the label never
/// reaches are excluded entirely.
pub fn corn_loss(logits: &[ThresholdLogits; 3], labels: &LabelTriplet) -> f64 {
    corn_loss_with(logits, labels, LossNormalization::FixedKMinus1)
}

pub fn corn_loss_with(
    logits: &[ThresholdLogits; 3],
    labels: &LabelTriplet,
    norm: LossNormalization,
) -> f64 {
    let mut total = 0.0;
    for dim in Dimension::ALL {
        let y = labels.get(dim).value() as usize;
        let z = &logits[dim.index()].z;
        let mut sum = 0.0;
        let mut active = 0usize;
        for k in 1..=NUM_THRESHOLDS {
            if y >= k {
                let target = if y > k { 1.0 } else { 0.0 };
                sum += bce_with_logit(z[k - 1], target);
                active += 1;
            }
        }
        let divisor = match norm {
            LossNormalization::FixedKMinus1 => NUM_THRESHOLDS as f64,
            LossNormalization::ActiveThresholds => active.max(1) as f64,
        };
        total += sum / divisor;
    }
    total
}

/// Parameters of the ordinal head, stored flat for cheap gradient and
/// serialization handling.
///
/// Layout: hidden weights (H x D), hidden bias (H), per-dimension queries
/// (3 x H), shared output weights (3 x H), output bias (3).
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalHeadParams {
    input_dim: usize,
    hidden_dim: usize,
    data: Vec<f64>,
}

const PARAMS_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamsWire {
    version: u32,
    input_dim: usize,
    hidden_dim: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    queries: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl OrdinalHeadParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let len = Self::param_count(input_dim, hidden_dim);
        OrdinalHeadParams {
            input_dim,
            hidden_dim,
            data: vec![0.0; len],
        }
    }

    pub fn param_count(input_dim: usize, hidden_dim: usize) -> usize {
        hidden_dim * input_dim + hidden_dim + 3 * hidden_dim + NUM_THRESHOLDS * hidden_dim
            + NUM_THRESHOLDS
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    // offsets into the flat layout
    fn off_b1(&self) -> usize {
        self.hidden_dim * self.input_dim
    }
    fn off_queries(&self) -> usize {
        self.off_b1() + self.hidden_dim
    }
    fn off_w2(&self) -> usize {
        self.off_queries() + 3 * self.hidden_dim
    }
    fn off_b2(&self) -> usize {
        self.off_w2() + NUM_THRESHOLDS * self.hidden_dim
    }

    fn hidden_for(&self, x: &[f64], dim: usize) -> Vec<f64> {
        let (d, h) = (self.input_dim, self.hidden_dim);
        let b1 = self.off_b1();
        let q = self.off_queries() + dim * h;
        let mut hidden = Vec::with_capacity(h);
        for j in 0..h {
            let mut pre = self.data[b1 + j] + self.data[q + j];
            let row = j * d;
            for (k, &xk) in x.iter().enumerate() {
                pre += self.data[row + k] * xk;
            }
            hidden.push(pre.tanh());
        }
        hidden
    }

    fn logits_from_hidden(&self, hidden: &[f64]) -> ThresholdLogits {
        let h = self.hidden_dim;
        let w2 = self.off_w2();
        let b2 = self.off_b2();
        let mut z = [0.0; NUM_THRESHOLDS];
        for (k, zk) in z.iter_mut().enumerate() {
            let mut acc = self.data[b2 + k];
            let row = w2 + k * h;
            for (j, &hj) in hidden.iter().enumerate() {
                acc += self.data[row + j] * hj;
            }
            *zk = acc;
        }
        ThresholdLogits { z }
    }

    /// Threshold logits for all three dimensions.
    pub fn forward(&self, x: &FeatureVector) -> Result<[ThresholdLogits; 3], HeadError> {
        if x.values.len() != self.input_dim {
            return Err(HeadError::ShapeMismatch {
                sample_id: x.sample_id.clone(),
                expected: self.input_dim,
                got: x.values.len(),
            });
        }
        let mut out = [ThresholdLogits {
            z: [0.0; NUM_THRESHOLDS],
        }; 3];
        for (dim, slot) in out.iter_mut().enumerate() {
            let hidden = self.hidden_for(&x.values, dim);
            *slot = self.logits_from_hidden(&hidden);
        }
        Ok(out)
    }

    /// Mean loss and flat gradient over a batch.
    pub fn batch_loss_and_gradient(
        &self,
        batch: &[(&FeatureVector, &LabelTriplet)],
        norm: LossNormalization,
    ) -> Result<(f64, Vec<f64>), HeadError> {
        if batch.is_empty() {
            return Err(HeadError::EmptyDataset);
        }
        let (d, h) = (self.input_dim, self.hidden_dim);
        let scale = 1.0 / batch.len() as f64;
        let mut grad = vec![0.0; self.data.len()];
        let mut loss = 0.0;
        for (x, labels) in batch {
            if x.values.len() != d {
                return Err(HeadError::ShapeMismatch {
                    sample_id: x.sample_id.clone(),
                    expected: d,
                    got: x.values.len(),
                });
            }
            for dim in Dimension::ALL {
                let di = dim.index();
                let hidden = self.hidden_for(&x.values, di);
                let logits = self.logits_from_hidden(&hidden);
                let y = labels.get(dim).value() as usize;

                let mut active = 0usize;
                for k in 1..=NUM_THRESHOLDS {
                    if y >= k {
                        active += 1;
                    }
                }
                let divisor = match norm {
                    LossNormalization::FixedKMinus1 => NUM_THRESHOLDS as f64,
                    LossNormalization::ActiveThresholds => active.max(1) as f64,
                };

                let mut dz = [0.0; NUM_THRESHOLDS];
                for k in 1..=NUM_THRESHOLDS {
                    if y >= k {
                        let target = if y > k { 1.0 } else { 0.0 };
                        let zk = logits.z[k - 1];
                        loss += scale * bce_with_logit(zk, target) / divisor;
                        dz[k - 1] = scale * (sigmoid(zk) - target) / divisor;
                    }
                }

                let w2 = self.off_w2();
                let b2 = self.off_b2();
                let mut dh = vec![0.0; h];
                for k in 0..NUM_THRESHOLDS {
                    if dz[k] == 0.0 {
                        continue;
                    }
                    grad[b2 + k] += dz[k];
                    let row = w2 + k * h;
                    for j in 0..h {
                        grad[row + j] += dz[k] * hidden[j];
                        dh[j] += dz[k] * self.data[row + j];
                    }
                }
                let b1 = self.off_b1();
                let q = self.off_queries() + di * h;
                for j in 0..h {
                    let dpre = dh[j] * (1.0 - hidden[j] * hidden[j]);
                    if dpre == 0.0 {
                        continue;
                    }
                    grad[b1 + j] += dpre;
                    grad[q + j] += dpre;
                    let row = j * d;
                    for (k, &xk) in x.values.iter().enumerate() {
                        grad[row + k] += dpre * xk;
                    }
                }
            }
        }
        Ok((loss, grad))
    }

    pub fn to_json(&self) -> String {
        let h = self.hidden_dim;
        let wire = ParamsWire {
            version: PARAMS_VERSION,
            input_dim: self.input_dim,
            hidden_dim: h,
            w1: self.data[..self.off_b1()].to_vec(),
            b1: self.data[self.off_b1()..self.off_queries()].to_vec(),
            queries: self.data[self.off_queries()..self.off_w2()].to_vec(),
            w2: self.data[self.off_w2()..self.off_b2()].to_vec(),
            b2: self.data[self.off_b2()..].to_vec(),
        };
        serde_json::to_string(&wire).expect("params serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, HeadError> {
        let wire: ParamsWire =
            serde_json::from_str(text).map_err(|e| HeadError::BadParamsFile(e.to_string()))?;
        if wire.version != PARAMS_VERSION {
            return Err(HeadError::BadVersion {
                got: wire.version,
                expected: PARAMS_VERSION,
            });
        }
        let (d, h) = (wire.input_dim, wire.hidden_dim);
        let sections = [
            (wire.w1.len(), h * d, "w1"),
            (wire.b1.len(), h, "b1"),
            (wire.queries.len(), 3 * h, "queries"),
            (wire.w2.len(), NUM_THRESHOLDS * h, "w2"),
            (wire.b2.len(), NUM_THRESHOLDS, "b2"),
        ];
        for (got, expected, name) in sections {
            if got != expected {
                return Err(HeadError::BadParamsFile(format!(
                    "section '{name}' has {got} values, expected {expected}"
                )));
            }
        }
        let mut data = Vec::with_capacity(Self::param_count(d, h));
        data.extend(wire.w1);
        data.extend(wire.b1);
        data.extend(wire.queries);
        data.extend(wire.w2);
        data.extend(wire.b2);
        Ok(OrdinalHeadParams {
            input_dim: d,
            hidden_dim: h,
            data,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), HeadError> {
        std::fs::write(path, self.to_json() + "\n").map_err(|source| HeadError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, HeadError> {
        let text = std::fs::read_to_string(path).map_err(|source| HeadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Read `features.jsonl`: `{"sample_id", "x": [floats]}` per line, uniform
/// dimension across the file.
pub fn read_features(
    path: &Path,
    opts: LoadOptions,
) -> Result<Loaded<Vec<FeatureVector>>, DataError> {
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_features_from(std::io::BufReader::new(file), &path.display().to_string(), opts)
}

pub fn read_features_from(
    reader: impl BufRead,
    file_label: &str,
    opts: LoadOptions,
) -> Result<Loaded<Vec<FeatureVector>>, DataError> {
    let mut records: Vec<FeatureVector> = Vec::new();
    let mut warnings = Vec::new();
    let mut expected_dim: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DataError::Io {
            path: file_label.to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let pos = SourcePos::new(file_label, idx as u64 + 1);
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| DataError::Json {
                pos: pos.clone(),
                message: e.to_string(),
            })?;
        let serde_json::Value::Object(map) = value else {
            return Err(DataError::NotAnObject { pos });
        };
        for key in map.keys() {
            if key != "sample_id" && key != "x" {
                if opts.strict {
                    return Err(DataError::UnknownKey {
                        pos: pos.clone(),
                        key: key.clone(),
                    });
                }
                warnings.push(format!("{pos}: ignoring unknown key '{key}'"));
            }
        }
        let sample_id = match map.get("sample_id") {
            Some(serde_json::Value::String(s)) => s.clone(),
            _ => {
                return Err(DataError::MissingKey {
                    pos,
                    key: "sample_id".to_string(),
                })
            }
        };
        let values: Vec<f64> = match map.get("x") {
            Some(serde_json::Value::Array(arr)) => {
                let mut values = Vec::with_capacity(arr.len());
                for v in arr {
                    match v.as_f64() {
                        Some(f) if f.is_finite() => values.push(f),
                        _ => {
                            return Err(DataError::WrongType {
                                pos,
                                key: "x".to_string(),
                                expected: "array of finite numbers",
                            })
                        }
                    }
                }
                values
            }
            _ => {
                return Err(DataError::MissingKey {
                    pos,
                    key: "x".to_string(),
                })
            }
        };
        match expected_dim {
            None => expected_dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(DataError::WrongType {
                    pos,
                    key: "x".to_string(),
                    expected: "uniform dimension across the file",
                });
            }
            _ => {}
        }
        records.push(FeatureVector { sample_id, values });
    }
    Ok(Loaded { records, warnings })
}

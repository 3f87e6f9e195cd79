//! Deterministic SGD over a toy supervised model.
//!
//! The default task is linear regression with squared loss on a synthetic
//! dataset. Everything here is bit-exact by construction: IEEE-754 doubles,
//! gradient terms accumulated in ascending dataset-index order, batches
//! applied in list order, no internal parallelism. Two runs with equal
//! inputs produce byte-identical weight vectors, so a verifier can re-train
//! a stage and compare results with tolerance zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prng::{draw_batches, PrngError, RandomStream, Seed};

#[derive(Debug, Error, PartialEq)]
pub enum TrainingError {
    #[error("dataset must contain at least one point")]
    EmptyDataset,
    #[error("point {index} has dimension {got}, expected {expected}")]
    RaggedDataset {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("input has dimension {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("weight vector has length {got}, expected {expected}")]
    WeightLengthMismatch { got: usize, expected: usize },
    #[error("weights contain a non-finite entry")]
    NonFiniteWeights,
    #[error("weight byte string is not a whole number of doubles")]
    BadWeightBytes,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("batch index {0} out of range")]
    BatchIndexOutOfRange(usize),
    #[error("epochs per stage {k} does not divide total epochs {epochs}")]
    StageSizeMismatch { k: usize, epochs: usize },
    #[error("hyper-parameters invalid: {0}")]
    BadHyper(&'static str),
    #[error(transparent)]
    Prng(#[from] PrngError),
}

/// Supervised training set: `n` points of dimension `d` with scalar targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetFile", into = "DatasetFile")]
pub struct Dataset {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
}

/// On-disk fixture form: JSON with fields `d`, `n`, `x` (n×d), `y` (n).
#[derive(Debug, Clone, Serialize, Deserialize)]
struct DatasetFile {
    d: usize,
    n: usize,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
}

impl TryFrom<DatasetFile> for Dataset {
    type Error = TrainingError;

    fn try_from(file: DatasetFile) -> Result<Self, TrainingError> {
        if file.x.len() != file.n || file.y.len() != file.n {
            return Err(TrainingError::BadHyper("n does not match x/y lengths"));
        }
        let data = Dataset::new(file.x, file.y)?;
        if data.dim() != file.d {
            return Err(TrainingError::BadHyper("d does not match x rows"));
        }
        Ok(data)
    }
}

impl From<Dataset> for DatasetFile {
    fn from(data: Dataset) -> Self {
        DatasetFile {
            d: data.dim(),
            n: data.len(),
            x: data.xs,
            y: data.ys,
        }
    }
}

impl Dataset {
    pub fn new(xs: Vec<Vec<f64>>, ys: Vec<f64>) -> Result<Self, TrainingError> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(TrainingError::EmptyDataset);
        }
        let expected = xs[0].len();
        for (index, x) in xs.iter().enumerate() {
            if x.len() != expected {
                return Err(TrainingError::RaggedDataset {
                    index,
                    got: x.len(),
                    expected,
                });
            }
        }
        Ok(Dataset { xs, ys })
    }

    /// Synthetic linear task: inputs uniform in `[-1,1)`, targets
    /// `<w*, x> + bias` plus Gaussian noise (sigma 0.1), with the planted
    /// coefficients and all draws taken from the given fixture seed.
    pub fn synthetic_linear(seed: &Seed, dim: usize, n: usize) -> Result<Self, TrainingError> {
        if dim == 0 || n == 0 {
            return Err(TrainingError::EmptyDataset);
        }
        let mut stream = RandomStream::new(*seed);
        let planted: Vec<f64> = (0..=dim).map(|_| stream.uniform01() * 2.0 - 1.0).collect();
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = (0..dim).map(|_| stream.uniform01() * 2.0 - 1.0).collect();
            let clean: f64 = x.iter().zip(&planted).map(|(a, b)| a * b).sum::<f64>() + planted[dim];
            ys.push(clean + 0.1 * gaussian(&mut stream));
            xs.push(x);
        }
        Dataset::new(xs, ys)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.xs[0].len()
    }

    pub fn point(&self, index: usize) -> (&[f64], f64) {
        (&self.xs[index], self.ys[index])
    }
}

/// Box-Muller transform over two uniform draws. The first uniform is nudged
/// away from zero so the logarithm stays finite.
fn gaussian(stream: &mut RandomStream) -> f64 {
    let u1 = stream.uniform01().max(f64::MIN_POSITIVE);
    let u2 = stream.uniform01();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Model parameters. For the linear model the layout is `d` coefficients
/// followed by one bias term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(values: Vec<f64>) -> Result<Self, TrainingError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TrainingError::NonFiniteWeights);
        }
        Ok(Weights(values))
    }

    pub fn zeros(len: usize) -> Self {
        Weights(vec![0.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Canonical byte form: little-endian IEEE-754 doubles concatenated in
    /// index order. This exact byte string is what gets hashed and stored.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = Vec::with_capacity(self.0.len() * 8);
        for v in &self.0 {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TrainingError> {
        if !bytes.len().is_multiple_of(8) {
            return Err(TrainingError::BadWeightBytes);
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Weights::new(values)
    }

    /// Bitwise equality, the comparison the protocol uses. Both parties run
    /// the same deterministic code, so tolerance is zero by design.
    pub fn bitwise_eq(&self, other: &Weights) -> bool {
        self.to_bytes() == other.to_bytes()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossId {
    SquaredError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitRule {
    Zeros,
}

/// The training environment: every knob both parties must agree on before
/// a stage can be re-executed bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    /// Learning rate for every SGD step.
    pub learning_rate: f64,
    /// Batch size `m`; must divide the dataset size.
    pub batch_size: usize,
    /// Total number of epochs `E`.
    pub epochs: usize,
    /// Epochs per stage `k`; must divide `E`.
    pub epochs_per_stage: usize,
    pub model: ModelId,
    pub loss: LossId,
    pub init: InitRule,
}

impl Hyper {
    pub fn validate(&self, dataset_len: usize) -> Result<(), TrainingError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(TrainingError::BadHyper("learning rate must be positive"));
        }
        if self.epochs == 0 || self.epochs_per_stage == 0 {
            return Err(TrainingError::BadHyper("epochs and stage size must be >= 1"));
        }
        if !self.epochs.is_multiple_of(self.epochs_per_stage) {
            return Err(TrainingError::StageSizeMismatch {
                k: self.epochs_per_stage,
                epochs: self.epochs,
            });
        }
        if self.batch_size == 0 || !dataset_len.is_multiple_of(self.batch_size) {
            return Err(TrainingError::Prng(PrngError::BatchSizeMismatch {
                batch: self.batch_size,
                dataset: dataset_len,
            }));
        }
        Ok(())
    }

    /// Number of stages `T = E / k`.
    pub fn stage_count(&self) -> usize {
        self.epochs / self.epochs_per_stage
    }

    /// Batches per epoch `l = n / m`.
    pub fn batches_per_epoch(&self, dataset_len: usize) -> usize {
        dataset_len / self.batch_size
    }

    /// Weight vector length for the configured model over dimension `d`.
    pub fn weight_len(&self, dim: usize) -> usize {
        match self.model {
            ModelId::Linear => dim + 1,
        }
    }

    /// Starting weights under the configured initialization rule.
    pub fn initial_weights(&self, dim: usize) -> Weights {
        match self.init {
            InitRule::Zeros => Weights::zeros(self.weight_len(dim)),
        }
    }
}

/// Model output for one input: `<w[..d], x> + w[d]` for the linear model.
pub fn model_predict(weights: &Weights, x: &[f64]) -> Result<f64, TrainingError> {
    let d = x.len();
    if weights.len() != d + 1 {
        return Err(TrainingError::WeightLengthMismatch {
            got: weights.len(),
            expected: d + 1,
        });
    }
    let w = weights.values();
    let mut out = 0.0;
    for j in 0..d {
        out += w[j] * x[j];
    }
    Ok(out + w[d])
}

/// Gradient of the batch risk `sum 1/2 (f(w,x_i) - y_i)^2` with respect to
/// the weights, accumulated in ascending index order.
pub fn batch_loss_gradient(
    weights: &Weights,
    batch: &[usize],
    data: &Dataset,
) -> Result<Vec<f64>, TrainingError> {
    if batch.is_empty() {
        return Err(TrainingError::EmptyBatch);
    }
    let mut grad = vec![0.0; weights.len()];
    let d = data.dim();
    for &i in batch {
        if i >= data.len() {
            return Err(TrainingError::BatchIndexOutOfRange(i));
        }
        let (x, y) = data.point(i);
        let residual = model_predict(weights, x)? - y;
        for j in 0..d {
            grad[j] += residual * x[j];
        }
        grad[d] += residual;
    }
    Ok(grad)
}

/// One SGD step: `w - eta * grad`.
pub fn sgd_step(
    weights: &Weights,
    batch: &[usize],
    learning_rate: f64,
    data: &Dataset,
) -> Result<Weights, TrainingError> {
    let grad = batch_loss_gradient(weights, batch, data)?;
    let stepped = weights
        .values()
        .iter()
        .zip(&grad)
        .map(|(w, g)| w - learning_rate * g)
        .collect();
    Weights::new(stepped)
}

/// One epoch: left-to-right composition of `sgd_step` over the batches in
/// list order.
pub fn train_epoch(
    weights: &Weights,
    batches: &[Vec<usize>],
    learning_rate: f64,
    data: &Dataset,
) -> Result<Weights, TrainingError> {
    let mut w = weights.clone();
    for batch in batches {
        w = sgd_step(&w, batch, learning_rate, data)?;
    }
    Ok(w)
}

/// One stage: `k` epochs, each with a fresh batch division drawn from the
/// stage seed at epoch indices `1..=k`.
pub fn train_stage(
    weights: &Weights,
    stage_seed: &Seed,
    hyper: &Hyper,
    data: &Dataset,
) -> Result<Weights, TrainingError> {
    hyper.validate(data.len())?;
    let mut w = weights.clone();
    for epoch in 1..=hyper.epochs_per_stage as u64 {
        let batches = draw_batches(stage_seed, epoch, data.len(), hyper.batch_size)?;
        w = train_epoch(&w, &batches, hyper.learning_rate, data)?;
    }
    Ok(w)
}

/// Empirical risk over the whole dataset: `sum 1/2 (f(w,x_i) - y_i)^2`.
pub fn empirical_risk(weights: &Weights, data: &Dataset) -> Result<f64, TrainingError> {
    let mut total = 0.0;
    for i in 0..data.len() {
        let (x, y) = data.point(i);
        let residual = model_predict(weights, x)? - y;
        total += 0.5 * residual * residual;
    }
    Ok(total)
}

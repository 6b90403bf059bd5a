//! Binary classifiers trained from scratch: a Pegasos-style linear SVM and a
//! ReLU multilayer perceptron with a sigmoid output.

mod gradcheck;
pub(crate) mod linear;
mod mlp;

pub use gradcheck::{gradient_check, GradCheckReport};
pub use linear::{svm_objective, train_linear_svm, LinearModel};
pub use mlp::{train_mlp, train_mlp_with, MlpModel};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Dataset, SparseVec};
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, softplus, Scalar};

pub const MODEL_SCHEMA_VERSION: u64 = 1;

/// Hard label plus the raw score it was thresholded from: a signed margin
/// for linear models, a probability for MLPs. Ties go to label 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction<T> {
    pub label: u8,
    pub score: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Hinge,
    Bce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// L2 strength of the SVM objective; ignored by the MLP trainer.
    pub l2_reg: f64,
    pub momentum: f64,
    pub seed: u64,
    pub loss: LossKind,
    /// Hidden widths of the MLP; ignored by the linear trainer.
    pub hidden_layers: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::mlp()
    }
}

impl TrainConfig {
    pub fn linear() -> Self {
        Self {
            epochs: 20,
            batch_size: 1,
            learning_rate: 0.1,
            l2_reg: 1e-4,
            momentum: 0.0,
            seed: 1,
            loss: LossKind::Hinge,
            hidden_layers: Vec::new(),
        }
    }

    /// Single hidden layer of width 32, SGD with momentum 0.9.
    pub fn mlp() -> Self {
        Self {
            epochs: 30,
            batch_size: 10,
            learning_rate: 0.05,
            l2_reg: 0.0,
            momentum: 0.9,
            seed: 1,
            loss: LossKind::Bce,
            hidden_layers: vec![32],
        }
    }

    /// Two hidden layers (64, 32), the three-layer network of the study.
    pub fn study_mlp() -> Self {
        Self { hidden_layers: vec![64, 32], ..Self::mlp() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig("momentum must be in [0, 1)".into()));
        }
        if self.l2_reg < 0.0 {
            return Err(Error::InvalidConfig("l2_reg must be non-negative".into()));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::InvalidConfig("hidden layer widths must be positive".into()));
        }
        Ok(())
    }
}

/// Per-example training loss over the network's output logit.
///
/// `example` indexes the training set the objective was built for, so
/// objectives can carry per-example data such as reference predictions.
pub trait Objective<T: Scalar>: Sync {
    /// Loss value and its derivative with respect to the logit.
    fn logit_loss(&self, example: usize, label: u8, logit: T) -> (T, T);
}

/// Binary cross entropy on `sigmoid(logit)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bce;

impl<T: Scalar> Objective<T> for Bce {
    #[inline]
    fn logit_loss(&self, _example: usize, label: u8, z: T) -> (T, T) {
        bce_logit(label, z)
    }
}

/// `softplus(z) - y z` and `sigmoid(z) - y`.
#[inline]
pub fn bce_logit<T: Scalar>(label: u8, z: T) -> (T, T) {
    let y = if label == 1 { T::one() } else { T::zero() };
    (softplus(z) - y * z, sigmoid(z) - y)
}

pub trait Classifier<T: Scalar>: Sync {
    fn n_features(&self) -> usize;

    /// Signed margin (linear) or probability (MLP).
    fn score(&self, x: &SparseVec<T>) -> Result<T>;

    fn predict(&self, x: &SparseVec<T>) -> Result<Prediction<T>>;

    fn fingerprint(&self) -> String;

    fn check_dim(&self, x: &SparseVec<T>) -> Result<()> {
        if x.min_dim() > self.n_features() {
            return Err(Error::DimensionMismatch { expected: self.n_features(), found: x.min_dim() });
        }
        Ok(())
    }

    fn predict_labels(&self, ds: &Dataset<T>) -> Result<Vec<u8>> {
        ds.rows().iter().map(|x| self.predict(x).map(|p| p.label)).collect()
    }

    fn accuracy(&self, ds: &Dataset<T>) -> Result<f64> {
        if ds.is_empty() {
            return Err(Error::Undefined("accuracy of an empty dataset"));
        }
        let preds = self.predict_labels(ds)?;
        let hits = preds.iter().zip(ds.labels()).filter(|(p, y)| p == y).count();
        Ok(hits as f64 / ds.len() as f64)
    }
}

/// Either trained model, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum Model<T> {
    Linear(LinearModel<T>),
    Mlp(MlpModel<T>),
}

impl<T: Scalar> Model<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Linear(_) => "linear",
            Model::Mlp(_) => "mlp",
        }
    }

    pub fn as_linear(&self) -> Result<&LinearModel<T>> {
        match self {
            Model::Linear(m) => Ok(m),
            other => Err(Error::ModelKind { expected: "linear", found: other.kind().into() }),
        }
    }

    pub fn as_mlp(&self) -> Result<&MlpModel<T>> {
        match self {
            Model::Mlp(m) => Ok(m),
            other => Err(Error::ModelKind { expected: "mlp", found: other.kind().into() }),
        }
    }

    pub fn train_fingerprint(&self) -> &str {
        match self {
            Model::Linear(m) => m.train_fingerprint(),
            Model::Mlp(m) => m.train_fingerprint(),
        }
    }

    pub fn to_json(&self) -> String {
        let file = match self {
            Model::Linear(m) => ModelFile {
                schema_version: MODEL_SCHEMA_VERSION,
                kind: "linear".into(),
                dims: vec![m.weights().len()],
                params: serde_json::json!({ "weights": m.weights(), "bias": m.bias() }),
                train_fingerprint: m.train_fingerprint().to_string(),
            },
            Model::Mlp(m) => ModelFile {
                schema_version: MODEL_SCHEMA_VERSION,
                kind: "mlp".into(),
                dims: m.dims().to_vec(),
                params: serde_json::json!({ "flat": m.params() }),
                train_fingerprint: m.train_fingerprint().to_string(),
            },
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s)?;
        if file.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::SchemaVersion(file.schema_version));
        }
        match file.kind.as_str() {
            "linear" => {
                let p: LinearParams<T> = serde_json::from_value(file.params)?;
                if file.dims != [p.weights.len()] {
                    return Err(Error::InvalidConfig("linear dims do not match weights".into()));
                }
                Ok(Model::Linear(LinearModel::from_parts(p.weights, p.bias, file.train_fingerprint)?))
            }
            "mlp" => {
                let p: MlpParams<T> = serde_json::from_value(file.params)?;
                Ok(Model::Mlp(MlpModel::from_parts(file.dims, p.flat, file.train_fingerprint)?))
            }
            other => Err(Error::ModelKind { expected: "linear|mlp", found: other.into() }),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

impl<T: Scalar> Classifier<T> for Model<T> {
    fn n_features(&self) -> usize {
        match self {
            Model::Linear(m) => m.n_features(),
            Model::Mlp(m) => m.n_features(),
        }
    }

    fn score(&self, x: &SparseVec<T>) -> Result<T> {
        match self {
            Model::Linear(m) => m.score(x),
            Model::Mlp(m) => m.score(x),
        }
    }

    fn predict(&self, x: &SparseVec<T>) -> Result<Prediction<T>> {
        match self {
            Model::Linear(m) => m.predict(x),
            Model::Mlp(m) => m.predict(x),
        }
    }

    fn fingerprint(&self) -> String {
        match self {
            Model::Linear(m) => m.fingerprint(),
            Model::Mlp(m) => m.fingerprint(),
        }
    }
}

impl<T> From<LinearModel<T>> for Model<T> {
    fn from(m: LinearModel<T>) -> Self {
        Model::Linear(m)
    }
}

impl<T> From<MlpModel<T>> for Model<T> {
    fn from(m: MlpModel<T>) -> Self {
        Model::Mlp(m)
    }
}

pub(crate) fn params_hash<T: Scalar>(kind: &str, params: &[T]) -> String {
    let mut h = Sha256::new();
    h.update(kind.as_bytes());
    for p in params {
        h.update(p.to_f64_lossy().to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema_version: u64,
    kind: String,
    dims: Vec<usize>,
    params: serde_json::Value,
    train_fingerprint: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearParams<T> {
    weights: Vec<T>,
    bias: T,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MlpParams<T> {
    flat: Vec<T>,
}

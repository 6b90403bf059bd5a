//! Training objectives that push a model away from a fixed reference.
//!
//! * `Reg`: `mean BCE(g, y) + lambda * mean BCE(g, 1 - f)`, pulling `g`
//!   towards the flipped reference labels.
//! * `Weights`: `mean w_i BCE(g, y)` with `w_i = 1 + lambda [f(x_i) != y_i]`,
//!   upweighting the reference's mistakes.
//!
//! The reference is frozen: its hard labels are computed once before
//! training. Under 0-1 loss the two objectives are affinely related, which
//! [`verify_remark2_equivalence`] checks exhaustively.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::models::{bce_logit, train_mlp, Classifier, MlpModel, Objective, TrainConfig};
use crate::scalar::{Field, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DissentKind {
    Reg,
    Weights,
}

impl DissentKind {
    pub fn name(self) -> &'static str {
        match self {
            DissentKind::Reg => "reg",
            DissentKind::Weights => "weights",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissentLoss<T> {
    kind: DissentKind,
    lambda: T,
    reference_predictions: Vec<u8>,
    reference_correct: Vec<bool>,
}

impl<T: Scalar> DissentLoss<T> {
    pub fn new(kind: DissentKind, lambda: T, reference_predictions: Vec<u8>, labels: &[u8]) -> Result<Self> {
        if !(lambda >= T::zero() && lambda.is_finite()) {
            return Err(Error::InvalidConfig("lambda must be finite and non-negative".into()));
        }
        if reference_predictions.len() != labels.len() {
            return Err(Error::LengthMismatch { left: reference_predictions.len(), right: labels.len() });
        }
        if let Some(&bad) = reference_predictions.iter().chain(labels).find(|&&l| l > 1) {
            return Err(Error::InvalidLabel(bad));
        }
        let reference_correct = reference_predictions.iter().zip(labels).map(|(f, y)| f == y).collect();
        Ok(Self { kind, lambda, reference_predictions, reference_correct })
    }

    /// Precomputes `reference` labels on every example of `train`.
    pub fn for_reference(kind: DissentKind, lambda: T, reference: &dyn Classifier<T>, train: &Dataset<T>) -> Result<Self> {
        Self::new(kind, lambda, reference.predict_labels(train)?, train.labels())
    }

    pub fn kind(&self) -> DissentKind {
        self.kind
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.reference_predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference_predictions.is_empty()
    }

    pub fn reference_predictions(&self) -> &[u8] {
        &self.reference_predictions
    }

    pub fn reference_correct(&self) -> &[bool] {
        &self.reference_correct
    }

    /// Per-example weight of the `Weights` objective.
    pub fn weight(&self, example: usize) -> T {
        let wrong = if self.reference_correct[example] { T::zero() } else { T::one() };
        T::one() + self.lambda * wrong
    }
}

impl<T: Scalar> Objective<T> for DissentLoss<T> {
    fn logit_loss(&self, example: usize, label: u8, z: T) -> (T, T) {
        let (l, dl) = bce_logit(label, z);
        match self.kind {
            DissentKind::Reg => {
                let (l2, dl2) = bce_logit(1 - self.reference_predictions[example], z);
                (l + self.lambda * l2, dl + self.lambda * dl2)
            }
            DissentKind::Weights => {
                let w = self.weight(example);
                (w * l, w * dl)
            }
        }
    }
}

fn bce_prob<T: Scalar>(label: u8, p: T) -> (T, T) {
    if label == 1 {
        (-p.ln(), -T::one() / p)
    } else {
        (-(-p).ln_1p(), T::one() / (T::one() - p))
    }
}

fn check_scores<T: Scalar>(batch: &[usize], labels: &[u8], scores: &[T]) -> Result<()> {
    if batch.len() != scores.len() || labels.len() != scores.len() {
        return Err(Error::LengthMismatch { left: batch.len(), right: scores.len() });
    }
    if batch.is_empty() {
        return Err(Error::Undefined("loss of an empty batch"));
    }
    match scores.iter().find(|&&p| !(p > T::zero() && p < T::one())) {
        Some(&p) => Err(Error::ScoreOutOfRange(p.to_f64_lossy())),
        None => Ok(()),
    }
}

/// `Reg` loss on probabilities `scores[j] = g(x_batch[j])`, with its
/// gradient in each score.
pub fn reg_loss<T: Scalar>(loss: &DissentLoss<T>, batch: &[usize], labels: &[u8], scores: &[T]) -> Result<(T, Vec<T>)> {
    if loss.kind != DissentKind::Reg {
        return Err(Error::InvalidConfig("reg_loss needs a reg objective".into()));
    }
    scores_loss(loss, batch, labels, scores)
}

/// `Weights` loss on probabilities, with its gradient in each score.
pub fn weights_loss<T: Scalar>(loss: &DissentLoss<T>, batch: &[usize], labels: &[u8], scores: &[T]) -> Result<(T, Vec<T>)> {
    if loss.kind != DissentKind::Weights {
        return Err(Error::InvalidConfig("weights_loss needs a weights objective".into()));
    }
    scores_loss(loss, batch, labels, scores)
}

fn scores_loss<T: Scalar>(loss: &DissentLoss<T>, batch: &[usize], labels: &[u8], scores: &[T]) -> Result<(T, Vec<T>)> {
    check_scores(batch, labels, scores)?;
    let n = T::of_usize(batch.len());
    let mut value = T::zero();
    let mut grad = Vec::with_capacity(scores.len());
    for ((&i, &y), &p) in batch.iter().zip(labels).zip(scores) {
        let (l, dl) = bce_prob(y, p);
        let (l, dl) = match loss.kind {
            DissentKind::Reg => {
                let (l2, dl2) = bce_prob(1 - loss.reference_predictions[i], p);
                (l + loss.lambda * l2, dl + loss.lambda * dl2)
            }
            DissentKind::Weights => {
                let w = loss.weight(i);
                (w * l, w * dl)
            }
        };
        value = value + l;
        grad.push(dl / n);
    }
    Ok((value / n, grad))
}

/// The 0-1 form of either objective.
///
/// `Reg`: `mean [g != y] + (lambda / n) sum [g == f]` (in the binary case
/// `[g != not f]` is `[g == f]`). `Weights`: `mean (1 + lambda [f != y]) [g != y]`.
pub fn zero_one_objective<F: Field>(g: &[u8], y: &[u8], f: &[u8], lambda: F, kind: DissentKind) -> Result<F> {
    if g.len() != y.len() || g.len() != f.len() {
        return Err(Error::LengthMismatch { left: g.len(), right: y.len().max(f.len()) });
    }
    if g.is_empty() {
        return Err(Error::Undefined("0-1 objective of an empty sample"));
    }
    let n = F::from_count(g.len());
    let miss = g.iter().zip(y).filter(|(a, b)| a != b).count();
    let value = match kind {
        DissentKind::Reg => {
            let same = g.iter().zip(f).filter(|(a, b)| a == b).count();
            F::from_count(miss) / n.clone() + lambda * F::from_count(same) / n
        }
        DissentKind::Weights => {
            let wrong_on_f_errors = (0..g.len()).filter(|&i| g[i] != y[i] && f[i] != y[i]).count();
            (F::from_count(miss) + lambda * F::from_count(wrong_on_f_errors)) / n
        }
    };
    Ok(value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport<F> {
    pub lambda: F,
    /// `2 lambda / (1 - lambda)`, the matching reweighting strength.
    pub lambda_weights: F,
    /// `1 - lambda`.
    pub scale: F,
    /// `lambda * |{i : f_i == y_i}| / n`.
    pub offset: F,
    pub candidates_checked: usize,
    pub holds: bool,
    pub counterexample: Option<Vec<u8>>,
}

pub const MAX_EQUIVALENCE_SIZE: usize = 16;

/// Checks over every labelling `g` in `{0,1}^n` that
/// `REG01(g; lambda) = (1 - lambda) WEIGHTS01(g; lambda') + offset`.
///
/// Run it over an exact [`Field`] such as [`crate::Rational`] for a
/// zero-tolerance answer.
pub fn verify_remark2_equivalence<F: Field>(y: &[u8], f: &[u8], lambda: F) -> Result<EquivalenceReport<F>> {
    let n = y.len();
    if n != f.len() {
        return Err(Error::LengthMismatch { left: n, right: f.len() });
    }
    if n == 0 || n > MAX_EQUIVALENCE_SIZE {
        return Err(Error::InvalidConfig(format!("n = {n} outside 1..={MAX_EQUIVALENCE_SIZE}")));
    }
    if !(lambda >= F::zero() && lambda < F::one()) {
        return Err(Error::InvalidConfig("lambda must lie in [0, 1)".into()));
    }
    let one = F::one();
    let two = one.clone() + one.clone();
    let scale = one.clone() - lambda.clone();
    let lambda_weights = two * lambda.clone() / scale.clone();
    let agree = y.iter().zip(f).filter(|(a, b)| a == b).count();
    let offset = lambda.clone() * F::from_count(agree) / F::from_count(n);
    let mut report = EquivalenceReport {
        lambda: lambda.clone(),
        lambda_weights: lambda_weights.clone(),
        scale: scale.clone(),
        offset: offset.clone(),
        candidates_checked: 0,
        holds: true,
        counterexample: None,
    };
    let mut g = vec![0u8; n];
    for mask in 0u32..(1u32 << n) {
        for (bit, gi) in g.iter_mut().enumerate() {
            *gi = ((mask >> bit) & 1) as u8;
        }
        let reg = zero_one_objective(&g, y, f, lambda.clone(), DissentKind::Reg)?;
        let weights = zero_one_objective(&g, y, f, lambda_weights.clone(), DissentKind::Weights)?;
        report.candidates_checked += 1;
        if reg != scale.clone() * weights + offset.clone() {
            report.holds = false;
            report.counterexample = Some(g.clone());
            break;
        }
    }
    Ok(report)
}

/// Trains an MLP dissenter against `reference` on the train split of `ds`.
pub fn train_dissenter<T: Scalar>(
    ds: &Dataset<T>,
    reference: &dyn Classifier<T>,
    kind: DissentKind,
    lambda: f64,
    cfg: &TrainConfig,
) -> Result<MlpModel<T>> {
    let train = ds.part(Split::Train);
    let loss = DissentLoss::for_reference(kind, T::of(lambda), reference, &train)?;
    let mut model = train_mlp(&train, cfg, Some(&loss))?;
    let fp = format!("{};{};lambda={};seed={}", model.train_fingerprint(), kind.name(), lambda, cfg.seed);
    model.set_train_fingerprint(fp);
    Ok(model)
}

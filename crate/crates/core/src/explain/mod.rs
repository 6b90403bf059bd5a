//! Feature-attribution explanations.
//!
//! An [`Explanation`] keeps the `k` features with the largest absolute
//! attribution `|w_i x_i|`. For the local surrogate the interpretable input
//! is a presence indicator (`x_i = 1` when feature `i` is kept), so the
//! ranking reduces to `|w_i|`; for linear models [`explain_linear_native`]
//! uses `w_i x_i` directly.

mod surrogate;

pub use surrogate::{explain_dataset, explain_instance, ExplainerConfig};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::data::SparseVec;
use crate::error::{Error, Result};
use crate::models::{Classifier, LinearModel};
use crate::scalar::Scalar;

pub const DEFAULT_TOP_K: usize = 15;
/// Decision threshold of the fidelity check on summed attributions.
pub const DEFAULT_FIDELITY_TAU: f64 = -0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation<T> {
    pub example_id: String,
    #[serde(rename = "model")]
    pub model_fingerprint: String,
    #[serde(rename = "label")]
    pub predicted_label: u8,
    pub k: usize,
    pub intercept: T,
    /// `(feature_index, weight)` by decreasing `|weight|`, ties by index.
    pub attributions: Vec<(usize, T)>,
}

impl<T: Scalar> Explanation<T> {
    pub fn feature_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.attributions.iter().map(|&(i, _)| i)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("explanation serializes")
    }
}

/// Keeps the `k` largest `|weight|` entries; equal magnitudes are ordered by
/// ascending feature index.
pub(crate) fn top_k<T: Scalar>(mut weights: Vec<(usize, T)>, k: usize) -> Vec<(usize, T)> {
    weights.sort_by(|a, b| {
        b.1.abs().partial_cmp(&a.1.abs()).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0))
    });
    weights.truncate(k);
    weights
}

/// Exact attributions `w_i x_i` of a linear model.
pub fn explain_linear_native<T: Scalar>(
    model: &LinearModel<T>,
    x: &SparseVec<T>,
    example_id: &str,
    k: usize,
) -> Result<Explanation<T>> {
    let pred = model.predict(x)?;
    let contributions = x.iter().map(|(i, v)| (i, model.weights()[i] * v)).collect();
    Ok(Explanation {
        example_id: example_id.to_string(),
        model_fingerprint: model.fingerprint(),
        predicted_label: pred.label,
        k,
        intercept: model.bias(),
        attributions: top_k(contributions, k),
    })
}

/// `(feature index, weight)` pairs.
pub type Attributions<T> = Vec<(usize, T)>;

/// Evidence for label 1 (`weight > 0`) and for label 0 (`weight < 0`).
/// Zero-weight attributions belong to neither side.
pub fn split_evidence<T: Scalar>(exp: &Explanation<T>) -> (Attributions<T>, Attributions<T>) {
    let pos = exp.attributions.iter().copied().filter(|&(_, w)| w > T::zero()).collect();
    let neg = exp.attributions.iter().copied().filter(|&(_, w)| w < T::zero()).collect();
    (pos, neg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fidelity<T> {
    pub score: T,
    pub consistent: bool,
}

/// Sums the attribution weights (intercept excluded) and checks that the sum
/// lands on the predicted label's side of `tau`; a sum equal to `tau` counts
/// as label 0.
pub fn fidelity_check<T: Scalar>(exp: &Explanation<T>, label: u8, tau: T) -> Fidelity<T> {
    let score = exp.attributions.iter().fold(T::zero(), |a, &(_, w)| a + w);
    let consistent = (score > tau) == (label == 1);
    Fidelity { score, consistent }
}

/// Whether `exp_g` dissents from `exp_f`: same example, different label.
pub fn is_dissenting<T: Scalar>(exp_f: &Explanation<T>, exp_g: &Explanation<T>) -> Result<bool> {
    if exp_f.example_id != exp_g.example_id {
        return Err(Error::ExampleMismatch(exp_f.example_id.clone(), exp_g.example_id.clone()));
    }
    Ok(exp_f.predicted_label != exp_g.predicted_label)
}

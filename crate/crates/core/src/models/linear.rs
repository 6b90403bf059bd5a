use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{params_hash, Classifier, Prediction, TrainConfig};
use crate::data::{Dataset, SparseVec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<T> {
    weights: Vec<T>,
    bias: T,
    train_fingerprint: String,
}

impl<T: Scalar> LinearModel<T> {
    pub fn from_parts(weights: Vec<T>, bias: T, train_fingerprint: String) -> Result<Self> {
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidConfig("linear model parameters must be finite".into()));
        }
        Ok(Self { weights, bias, train_fingerprint })
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> T {
        self.bias
    }

    pub fn train_fingerprint(&self) -> &str {
        &self.train_fingerprint
    }

    /// Same decision rule with (weights, bias) multiplied by `c`.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            weights: self.weights.iter().map(|&w| w * c).collect(),
            bias: self.bias * c,
            train_fingerprint: self.train_fingerprint.clone(),
        }
    }

    fn margin(&self, x: &SparseVec<T>) -> T {
        x.dot(&self.weights) + self.bias
    }
}

impl<T: Scalar> Classifier<T> for LinearModel<T> {
    fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn score(&self, x: &SparseVec<T>) -> Result<T> {
        self.check_dim(x)?;
        Ok(self.margin(x))
    }

    fn predict(&self, x: &SparseVec<T>) -> Result<Prediction<T>> {
        let score = self.score(x)?;
        Ok(Prediction { label: u8::from(score > T::zero()), score })
    }

    fn fingerprint(&self) -> String {
        let mut all = self.weights.clone();
        all.push(self.bias);
        params_hash("linear", &all)
    }
}

fn signed<T: Scalar>(label: u8) -> T {
    if label == 1 {
        T::one()
    } else {
        -T::one()
    }
}

/// `(l2_reg / 2) ||w||^2 + mean hinge(y (w.x + b))`, labels mapped to ±1.
pub fn svm_objective<T: Scalar>(model: &LinearModel<T>, ds: &Dataset<T>, l2_reg: f64) -> T {
    let reg = T::of(l2_reg / 2.0) * model.weights.iter().fold(T::zero(), |a, &w| a + w * w);
    if ds.is_empty() {
        return reg;
    }
    let hinge = ds
        .rows()
        .iter()
        .zip(ds.labels())
        .map(|(x, &y)| (T::one() - signed::<T>(y) * model.margin(x)).max(T::zero()))
        .fold(T::zero(), |a, h| a + h);
    reg + hinge / T::of_usize(ds.len())
}

/// Linear SVM by minibatch stochastic subgradient descent on the SVM
/// objective. Step size follows the Pegasos-style decay
/// `eta_t = eta_0 / (1 + eta_0 * l2_reg * t)`; the bias is not regularised.
pub fn train_linear_svm<T: Scalar>(ds: &Dataset<T>, cfg: &TrainConfig) -> Result<LinearModel<T>> {
    let [neg, pos] = ds.class_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::SingleClass);
    }
    fit_pegasos(ds, cfg, None)
}

/// Trainer without the two-class precondition. Used where a degenerate
/// training set is intended (single injected example).
pub(crate) fn fit_pegasos<T: Scalar>(
    ds: &Dataset<T>,
    cfg: &TrainConfig,
    mut trace: Option<&mut Vec<T>>,
) -> Result<LinearModel<T>> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::InvalidDataset("empty training set".into()));
    }
    let d = ds.n_features();
    let lambda = T::of(cfg.l2_reg);
    let eta0 = T::of(cfg.learning_rate);
    let mut w = vec![T::zero(); d];
    let mut b = T::zero();
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut t = 0usize;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            t += 1;
            let eta = eta0 / (T::one() + eta0 * lambda * T::of_usize(t));
            let step = eta / T::of_usize(batch.len());
            // Violators are found against the pre-update parameters.
            let violators: Vec<usize> = batch
                .iter()
                .copied()
                .filter(|&i| signed::<T>(ds.labels()[i]) * (ds.row(i).dot(&w) + b) < T::one())
                .collect();
            let shrink = T::one() - eta * lambda;
            if shrink != T::one() {
                w.iter_mut().for_each(|wj| *wj = *wj * shrink);
            }
            for i in violators {
                let y = signed::<T>(ds.labels()[i]);
                for (j, v) in ds.row(i).iter() {
                    w[j] = w[j] + step * y * v;
                }
                b = b + step * y;
            }
        }
        if !b.is_finite() || w.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        if let Some(trace) = trace.as_deref_mut() {
            let m = LinearModel { weights: w.clone(), bias: b, train_fingerprint: String::new() };
            trace.push(svm_objective(&m, ds, cfg.l2_reg));
        }
    }
    let fingerprint = format!("{};linear;seed={}", ds.fingerprint(), cfg.seed);
    Ok(LinearModel { weights: w, bias: b, train_fingerprint: fingerprint })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticFamily, SyntheticSpec};
    use proptest::prelude::*;

    fn two_points() -> Dataset<f64> {
        let rows = vec![SparseVec::from_dense(&[1.0, 0.0]), SparseVec::from_dense(&[-1.0, 0.0])];
        Dataset::unsplit(vec!["a".into(), "b".into()], rows, vec![1, 0]).unwrap()
    }

    fn separable(n: usize, seed: u64) -> Dataset<f64> {
        generate_synthetic(&SyntheticSpec {
            family: SyntheticFamily::GaussianBlobs,
            n_examples: n,
            n_features: 5,
            class_separation: 10.0,
            noise_rate: 0.0,
            seed,
            doc_length: 1,
        })
        .unwrap()
    }

    #[test]
    fn two_separable_points() {
        let m = train_linear_svm(&two_points(), &TrainConfig::linear()).unwrap();
        assert_eq!(m.predict_labels(&two_points()).unwrap(), vec![1, 0]);
    }

    #[test]
    fn deterministic_given_seed() {
        let ds = separable(60, 2);
        let a = train_linear_svm(&ds, &TrainConfig::linear()).unwrap();
        let b = train_linear_svm(&ds, &TrainConfig::linear()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn separable_blobs_reach_zero_train_error() {
        let ds = separable(100, 11);
        let m = train_linear_svm(&ds, &TrainConfig::linear()).unwrap();
        assert_eq!(m.accuracy(&ds).unwrap(), 1.0);
    }

    #[test]
    fn single_class_rejected() {
        let ds = two_points().with_label(1, 1).unwrap();
        assert!(matches!(train_linear_svm(&ds, &TrainConfig::linear()), Err(Error::SingleClass)));
    }

    #[test]
    fn predict_examples() {
        let m = LinearModel::from_parts(vec![1.0, 0.0], 0.0, String::new()).unwrap();
        let p = m.predict(&SparseVec::from_dense(&[2.0, 0.0])).unwrap();
        assert_eq!((p.score, p.label), (2.0, 1));
        let p = m.predict(&SparseVec::empty()).unwrap();
        assert_eq!((p.score, p.label), (0.0, 0));
        let too_wide = SparseVec::from_dense(&[0.0, 0.0, 1.0]);
        assert!(matches!(m.predict(&too_wide), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn objective_non_increasing_over_epoch_windows() {
        let ds = separable(200, 5);
        let cfg = TrainConfig { epochs: 40, ..TrainConfig::linear() };
        let mut trace = Vec::new();
        fit_pegasos(&ds, &cfg, Some(&mut trace)).unwrap();
        let windows: Vec<f64> = trace.chunks(5).map(|w| w.iter().sum::<f64>() / w.len() as f64).collect();
        for pair in windows.windows(2) {
            assert!(pair[1] <= pair[0], "{windows:?}");
        }
    }

    proptest! {
        #[test]
        fn positive_scaling_preserves_labels(c in 1e-3f64..1e3, seed in 0u64..50) {
            let ds = separable(30, seed);
            let m = train_linear_svm(&ds, &TrainConfig { epochs: 3, ..TrainConfig::linear() }).unwrap();
            prop_assert_eq!(m.predict_labels(&ds).unwrap(), m.scaled(c).predict_labels(&ds).unwrap());
        }
    }
}

use super::{MlpModel, Objective};
use crate::data::Dataset;
use crate::scalar::Scalar;

pub const FINITE_DIFFERENCE_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub max_abs_analytic: f64,
    pub max_abs_numeric: f64,
}

/// Compares backprop gradients with central differences on every
/// parameter. Relative error is `|a - n| / max(|a|, |n|)`; coordinates where
/// both magnitudes are below `1e-8` count as agreeing.
pub fn gradient_check<T: Scalar>(model: &MlpModel<T>, batch: &Dataset<T>, loss: &dyn Objective<T>) -> GradCheckReport {
    let idx: Vec<usize> = (0..batch.len()).collect();
    let (_, analytic) = model.loss_and_grad(batch, &idx, loss);
    let h = T::of(FINITE_DIFFERENCE_STEP);
    let mut probe = model.clone();
    let mut report = GradCheckReport { max_rel_error: 0.0, max_abs_error: 0.0, max_abs_analytic: 0.0, max_abs_numeric: 0.0 };
    for (k, &grad) in analytic.iter().enumerate() {
        let orig = model.params()[k];
        probe.params_mut()[k] = orig + h;
        let up = probe.loss(batch, &idx, loss);
        probe.params_mut()[k] = orig - h;
        let down = probe.loss(batch, &idx, loss);
        probe.params_mut()[k] = orig;
        let numeric = ((up - down) / (h + h)).to_f64_lossy();
        let a = grad.to_f64_lossy();
        let scale = a.abs().max(numeric.abs());
        let abs = (a - numeric).abs();
        let rel = if scale < 1e-8 { 0.0 } else { abs / scale };
        report.max_rel_error = report.max_rel_error.max(rel);
        report.max_abs_error = report.max_abs_error.max(abs);
        report.max_abs_analytic = report.max_abs_analytic.max(a.abs());
        report.max_abs_numeric = report.max_abs_numeric.max(numeric.abs());
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SparseVec;
    use crate::models::Bce;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_batch(d: usize, n: usize, seed: u64) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|_| SparseVec::from_dense(&(0..d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>()))
            .collect();
        let labels = (0..n).map(|i| (i % 2) as u8).collect();
        Dataset::unsplit((0..d).map(|i| format!("f{i}")).collect(), rows, labels).unwrap()
    }

    #[test]
    fn bce_matches_finite_differences() {
        let m = MlpModel::glorot(&[5, 6, 1], 42, String::new());
        let r = gradient_check(&m, &random_batch(5, 4, 1), &Bce);
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn deep_network_matches_finite_differences() {
        let m = MlpModel::glorot(&[5, 7, 4, 1], 3, String::new());
        let r = gradient_check(&m, &random_batch(5, 6, 2), &Bce);
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn saturated_fit_has_vanishing_gradients() {
        // One input feature equal to +-1 with label matching its sign, weights
        // large enough that the sigmoid saturates.
        let rows = vec![SparseVec::from_dense(&[1.0]), SparseVec::from_dense(&[-1.0])];
        let batch = Dataset::unsplit(vec!["x".into()], rows, vec![1, 0]).unwrap();
        // dims [1, 2, 1]: w1 = (40, -40), b1 = 0, w2 = (1, -1), b2 = 0.
        let m = MlpModel::from_parts(vec![1, 2, 1], vec![40.0, -40.0, 0.0, 0.0, 1.0, -1.0, 0.0], String::new())
            .unwrap();
        let r = gradient_check(&m, &batch, &Bce);
        assert!(r.max_abs_analytic < 1e-8 && r.max_abs_numeric < 1e-8, "{r:?}");
    }
}

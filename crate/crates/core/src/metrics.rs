//! Prediction and explanation agreement metrics.
//!
//! Label metrics take aligned `&[u8]` slices and return any [`Field`], so
//! the same code yields exact [`crate::Rational`] values in tests and `f64`
//! in reports. [`LabelVector`] carries example ids for callers that need the
//! alignment checked.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{split_evidence, Explanation};
use crate::scalar::{Field, Scalar};

/// Binary labels keyed by example id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    ids: Vec<String>,
    labels: Vec<u8>,
}

impl LabelVector {
    pub fn new(ids: Vec<String>, labels: Vec<u8>) -> Result<Self> {
        if ids.len() != labels.len() {
            return Err(Error::LengthMismatch { left: ids.len(), right: labels.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidLabel(bad));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        if !ids.iter().all(|id| seen.insert(id.as_str())) {
            return Err(Error::MisalignedIds);
        }
        Ok(Self { ids, labels })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Errors unless `other` lists the same ids in the same order.
    pub fn check_aligned(&self, other: &LabelVector) -> Result<()> {
        if self.ids != other.ids {
            return Err(Error::MisalignedIds);
        }
        Ok(())
    }
}

fn same_len(a: &[u8], b: &[u8]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(())
}

fn ratio<F: Field>(num: usize, den: usize) -> F {
    F::from_count(num) / F::from_count(den)
}

fn mismatch_rate<F: Field>(a: &[u8], b: &[u8], what: &'static str) -> Result<F> {
    same_len(a, b)?;
    if a.is_empty() {
        return Err(Error::Undefined(what));
    }
    Ok(ratio(a.iter().zip(b).filter(|(x, y)| x != y).count(), a.len()))
}

/// `mean [pred != y]`.
pub fn empirical_error<F: Field>(preds: &[u8], y: &[u8]) -> Result<F> {
    mismatch_rate(preds, y, "error of an empty sample")
}

/// `mean [pred == y]`, counted directly rather than as `1 - error`.
pub fn accuracy<F: Field>(preds: &[u8], y: &[u8]) -> Result<F> {
    same_len(preds, y)?;
    if preds.is_empty() {
        return Err(Error::Undefined("accuracy of an empty sample"));
    }
    Ok(ratio(preds.iter().zip(y).filter(|(p, t)| p == t).count(), preds.len()))
}

/// `mean [f != g]`.
pub fn global_disagreement<F: Field>(f: &[u8], g: &[u8]) -> Result<F> {
    mismatch_rate(f, g, "disagreement of an empty sample")
}

/// Share of `f`'s mistakes that `g` gets right.
pub fn corrected_rate<F: Field>(f: &[u8], g: &[u8], y: &[u8]) -> Result<F> {
    same_len(f, y)?;
    same_len(g, y)?;
    let wrong: Vec<usize> = (0..y.len()).filter(|&i| f[i] != y[i]).collect();
    if wrong.is_empty() {
        return Err(Error::Undefined("corrected rate when the reference makes no errors"));
    }
    Ok(ratio(wrong.iter().filter(|&&i| g[i] == y[i]).count(), wrong.len()))
}

/// `P(h = f | f != y)`: how often the human follows a wrong model.
pub fn overreliance<F: Field>(h: &[u8], f: &[u8], y: &[u8]) -> Result<F> {
    same_len(h, y)?;
    same_len(f, y)?;
    let wrong: Vec<usize> = (0..y.len()).filter(|&i| f[i] != y[i]).collect();
    if wrong.is_empty() {
        return Err(Error::Undefined("overreliance when the model makes no errors"));
    }
    Ok(ratio(wrong.iter().filter(|&&i| h[i] == f[i]).count(), wrong.len()))
}

/// Two-rater Cohen's kappa with chance agreement from the marginal products.
/// When chance agreement is 1 both raters are the same constant and kappa
/// is 1.
pub fn cohens_kappa<F: Field>(a: &[u8], b: &[u8]) -> Result<F> {
    same_len(a, b)?;
    if a.is_empty() {
        return Err(Error::Undefined("kappa of an empty sample"));
    }
    let n = a.len();
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count();
    let a1 = a.iter().filter(|&&l| l == 1).count();
    let b1 = b.iter().filter(|&&l| l == 1).count();
    // Scaled by n^2 to stay integral until the final division.
    let nn = n * n;
    let expected = a1 * b1 + (n - a1) * (n - b1);
    if expected == nn {
        return Ok(F::one());
    }
    let num = F::from_count(agree * n) - F::from_count(expected);
    Ok(num / F::from_count(nn - expected))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck<F> {
    pub holds: bool,
    /// `Err(f) + Err(g) - delta(f, g)`.
    pub slack: F,
}

/// Checks `delta(f, g) <= Err(f) + Err(g)`.
pub fn verify_disagreement_bound<F: Field>(f: &[u8], g: &[u8], y: &[u8]) -> Result<BoundCheck<F>> {
    let delta: F = global_disagreement(f, g)?;
    let slack = empirical_error::<F>(f, y)? + empirical_error(g, y)? - delta;
    Ok(BoundCheck { holds: slack >= F::zero(), slack })
}

/// Jaccard overlaps of two explanations' top-k sets, overall and by sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementScores<F> {
    pub topk: F,
    pub topk_pos: F,
    pub topk_neg: F,
}

/// Jaccard index; two empty sets agree fully.
fn jaccard<F: Field>(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> F {
    let union = a.union(b).count();
    if union == 0 {
        return F::one();
    }
    ratio(a.intersection(b).count(), union)
}

pub fn topk_agreement<T: Scalar, F: Field>(exp_f: &Explanation<T>, exp_g: &Explanation<T>) -> Result<AgreementScores<F>> {
    if exp_f.example_id != exp_g.example_id {
        return Err(Error::ExampleMismatch(exp_f.example_id.clone(), exp_g.example_id.clone()));
    }
    let set = |v: &[(usize, T)]| v.iter().map(|&(i, _)| i).collect::<BTreeSet<_>>();
    let (fp, fn_) = split_evidence(exp_f);
    let (gp, gn) = split_evidence(exp_g);
    Ok(AgreementScores {
        topk: jaccard(&set(&exp_f.attributions), &set(&exp_g.attributions)),
        topk_pos: jaccard(&set(&fp), &set(&gp)),
        topk_neg: jaccard(&set(&fn_), &set(&gn)),
    })
}

/// Which explanation pairs enter a mean agreement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    All,
    /// Only instances where the two models predict different labels.
    DissentOnly,
}

impl Scope {
    pub fn name(self) -> &'static str {
        match self {
            Scope::All => "all",
            Scope::DissentOnly => "dissent_only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementSummary {
    pub scope: Scope,
    pub n: usize,
    /// Means over the `n` pairs; `None` when no pair is in scope.
    pub mean: Option<AgreementScores<f64>>,
}

/// Mean agreement over aligned explanation lists.
pub fn mean_agreement<T: Scalar>(exp_f: &[Explanation<T>], exp_g: &[Explanation<T>], scope: Scope) -> Result<AgreementSummary> {
    if exp_f.len() != exp_g.len() {
        return Err(Error::LengthMismatch { left: exp_f.len(), right: exp_g.len() });
    }
    let mut sum = AgreementScores { topk: 0.0, topk_pos: 0.0, topk_neg: 0.0 };
    let mut n = 0;
    for (a, b) in exp_f.iter().zip(exp_g) {
        let s: AgreementScores<f64> = topk_agreement(a, b)?;
        if scope == Scope::DissentOnly && a.predicted_label == b.predicted_label {
            continue;
        }
        sum.topk += s.topk;
        sum.topk_pos += s.topk_pos;
        sum.topk_neg += s.topk_neg;
        n += 1;
    }
    let mean = (n > 0).then(|| {
        let d = n as f64;
        AgreementScores { topk: sum.topk / d, topk_pos: sum.topk_pos / d, topk_neg: sum.topk_neg / d }
    });
    Ok(AgreementSummary { scope, n, mean })
}

/// Mean and spread of repeated measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation (`n - 1` denominator, 0 for one value).
pub fn mean_std(xs: &[f64]) -> Result<MeanStd> {
    if xs.is_empty() {
        return Err(Error::Undefined("mean of no values"));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() < 2 {
        0.0
    } else {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(MeanStd { mean, std })
}

/// Success rate with the Bernoulli deviation `sqrt(p (1 - p))`.
pub fn bernoulli_mean_std(outcomes: &[bool]) -> Result<MeanStd> {
    if outcomes.is_empty() {
        return Err(Error::Undefined("rate of no trials"));
    }
    let p = outcomes.iter().filter(|&&s| s).count() as f64 / outcomes.len() as f64;
    Ok(MeanStd { mean: p, std: (p * (1.0 - p)).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn exp(id: &str, label: u8, attributions: Vec<(usize, f64)>) -> Explanation<f64> {
        Explanation {
            example_id: id.into(),
            model_fingerprint: "m".into(),
            predicted_label: label,
            k: 3,
            intercept: 0.0,
            attributions,
        }
    }

    #[test]
    fn error_examples() {
        assert_eq!(empirical_error::<Rational>(&[1, 1, 0], &[1, 0, 0]).unwrap(), r(1, 3));
        assert_eq!(empirical_error::<Rational>(&[1, 0], &[1, 0]).unwrap(), r(0, 1));
        assert_eq!(empirical_error::<Rational>(&[0, 1], &[1, 0]).unwrap(), r(1, 1));
        assert!(empirical_error::<f64>(&[1], &[1, 0]).is_err());
        assert_eq!(accuracy::<Rational>(&[1, 1, 0], &[1, 0, 0]).unwrap(), r(2, 3));
    }

    #[test]
    fn disagreement_examples() {
        assert_eq!(global_disagreement::<Rational>(&[0, 1, 1, 0], &[0, 1, 1, 0]).unwrap(), r(0, 1));
        assert_eq!(global_disagreement::<Rational>(&[0, 1, 1, 0], &[0, 0, 1, 1]).unwrap(), r(1, 2));
    }

    #[test]
    fn corrected_examples() {
        let (f, g, y) = ([0, 0, 1, 1], [0, 1, 1, 0], [1, 1, 1, 0]);
        assert_eq!(corrected_rate::<Rational>(&f, &g, &y).unwrap(), r(2, 3));
        assert_eq!(corrected_rate::<Rational>(&f, &y, &y).unwrap(), r(1, 1));
        assert_eq!(corrected_rate::<Rational>(&f, &f, &y).unwrap(), r(0, 1));
        assert!(matches!(corrected_rate::<f64>(&y, &g, &y), Err(Error::Undefined(_))));
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(cohens_kappa::<Rational>(&[1, 0, 1], &[1, 0, 1]).unwrap(), r(1, 1));
        assert_eq!(cohens_kappa::<Rational>(&[1, 1, 0, 0], &[1, 0, 0, 1]).unwrap(), r(0, 1));
        assert_eq!(cohens_kappa::<Rational>(&[1, 1, 0, 0], &[0, 0, 1, 1]).unwrap(), r(-1, 1));
        assert_eq!(cohens_kappa::<Rational>(&[1, 1], &[1, 1]).unwrap(), r(1, 1));
    }

    #[test]
    fn overreliance_examples() {
        assert_eq!(overreliance::<Rational>(&[1, 0], &[1, 1], &[0, 0]).unwrap(), r(1, 2));
        assert_eq!(overreliance::<Rational>(&[1, 1], &[1, 1], &[0, 0]).unwrap(), r(1, 1));
        assert_eq!(overreliance::<Rational>(&[0, 0], &[1, 1], &[0, 0]).unwrap(), r(0, 1));
    }

    #[test]
    fn bound_examples() {
        let b = verify_disagreement_bound::<Rational>(&[1, 0, 1], &[1, 0, 1], &[0, 0, 1]).unwrap();
        assert!(b.holds);
        assert_eq!(b.slack, r(2, 3));
        let tight = verify_disagreement_bound::<Rational>(&[0, 0, 1, 1], &[1, 1, 0, 1], &[1, 1, 1, 1]).unwrap();
        assert_eq!(tight.slack, r(0, 1));
    }

    #[test]
    fn topk_examples() {
        let a = exp("x", 1, vec![(0, 3.0), (1, 2.0), (2, 1.0)]);
        let b = exp("x", 1, vec![(1, 3.0), (2, 2.0), (3, 1.0)]);
        let same: AgreementScores<Rational> = topk_agreement(&a, &a).unwrap();
        assert_eq!(same, AgreementScores { topk: r(1, 1), topk_pos: r(1, 1), topk_neg: r(1, 1) });
        let s: AgreementScores<Rational> = topk_agreement(&a, &b).unwrap();
        assert_eq!(s, AgreementScores { topk: r(1, 2), topk_pos: r(1, 2), topk_neg: r(1, 1) });
        let c = exp("x", 1, vec![(7, -1.0)]);
        let d: AgreementScores<Rational> = topk_agreement(&a, &c).unwrap();
        assert_eq!((d.topk, d.topk_pos, d.topk_neg), (r(0, 1), r(0, 1), r(0, 1)));
        assert!(topk_agreement::<f64, f64>(&a, &exp("y", 1, vec![])).is_err());
    }

    #[test]
    fn scoped_means() {
        let f = vec![exp("a", 1, vec![(0, 1.0)]), exp("b", 0, vec![(1, -1.0)])];
        let g = vec![exp("a", 1, vec![(0, 1.0)]), exp("b", 1, vec![(2, 1.0)])];
        let all = mean_agreement(&f, &g, Scope::All).unwrap();
        assert_eq!(all.n, 2);
        assert_eq!(all.mean.unwrap().topk, 0.5);
        let dis = mean_agreement(&f, &g, Scope::DissentOnly).unwrap();
        assert_eq!(dis.n, 1);
        assert_eq!(dis.mean.unwrap().topk, 0.0);
        let none = mean_agreement(&f[..1], &g[..1], Scope::DissentOnly).unwrap();
        assert_eq!(none.mean, None);
    }

    #[test]
    fn summary_stats() {
        let m = mean_std(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((m.mean, m.std), (2.0, 1.0));
        assert_eq!(mean_std(&[4.0]).unwrap().std, 0.0);
        assert_eq!(bernoulli_mean_std(&[true; 5]).unwrap().std, 0.0);
        assert_eq!(bernoulli_mean_std(&[true, false]).unwrap().std, 0.5);
    }

    #[test]
    fn label_vector_alignment() {
        let a = LabelVector::new(vec!["a".into(), "b".into()], vec![0, 1]).unwrap();
        let b = LabelVector::new(vec!["b".into(), "a".into()], vec![0, 1]).unwrap();
        assert!(a.check_aligned(&a).is_ok());
        assert!(matches!(a.check_aligned(&b), Err(Error::MisalignedIds)));
        assert!(LabelVector::new(vec!["a".into(), "a".into()], vec![0, 1]).is_err());
        assert!(LabelVector::new(vec!["a".into()], vec![2]).is_err());
    }

    /// Every label triple of length `n`, each vector encoded as a bitmask.
    fn bits(mask: u32, n: usize) -> Vec<u8> {
        (0..n).map(|i| ((mask >> i) & 1) as u8).collect()
    }

    #[test]
    fn remark1_exhaustive_small() {
        for n in 1..=5 {
            for fm in 0..1u32 << n {
                for gm in 0..1u32 << n {
                    for ym in 0..1u32 << n {
                        let (f, g, y) = (bits(fm, n), bits(gm, n), bits(ym, n));
                        assert!(verify_disagreement_bound::<Rational>(&f, &g, &y).unwrap().holds);
                    }
                }
            }
        }
    }

    fn labels(n: usize) -> impl Strategy<Value = Vec<u8>> {
        proptest::collection::vec(0u8..2, n)
    }

    fn triple() -> impl Strategy<Value = (Vec<u8>, Vec<u8>, Vec<u8>)> {
        (1usize..60).prop_flat_map(|n| (labels(n), labels(n), labels(n)))
    }

    proptest! {
        #[test]
        fn disagreement_is_a_pseudometric((a, b, c) in triple()) {
            let d = |x: &[u8], y: &[u8]| global_disagreement::<Rational>(x, y).unwrap();
            prop_assert_eq!(d(&a, &a), r(0, 1));
            prop_assert_eq!(d(&a, &b), d(&b, &a));
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        }

        #[test]
        fn kappa_in_range((a, b, _) in triple()) {
            let k = cohens_kappa::<Rational>(&a, &b).unwrap();
            prop_assert!(k >= r(-1, 1) && k <= r(1, 1));
            prop_assert_eq!(cohens_kappa::<Rational>(&a, &a).unwrap(), r(1, 1));
            prop_assert_eq!(k, cohens_kappa::<Rational>(&b, &a).unwrap());
        }

        #[test]
        fn rates_ignore_order((f, g, y) in triple(), rot in 0usize..60) {
            let n = y.len();
            let turn = |v: &[u8]| (0..n).map(|i| v[(i + rot) % n]).collect::<Vec<_>>();
            if f != y {
                prop_assert_eq!(
                    overreliance::<Rational>(&g, &f, &y).unwrap(),
                    overreliance::<Rational>(&turn(&g), &turn(&f), &turn(&y)).unwrap()
                );
                prop_assert_eq!(
                    corrected_rate::<Rational>(&f, &g, &y).unwrap(),
                    corrected_rate::<Rational>(&turn(&f), &turn(&g), &turn(&y)).unwrap()
                );
            }
        }

        #[test]
        fn topk_is_symmetric_and_bounded(
            a in proptest::collection::btree_map(0usize..20, -3i32..4, 0..8),
            b in proptest::collection::btree_map(0usize..20, -3i32..4, 0..8),
        ) {
            let ea = exp("x", 1, a.into_iter().map(|(i, w)| (i, w as f64)).collect());
            let eb = exp("x", 0, b.into_iter().map(|(i, w)| (i, w as f64)).collect());
            let s: AgreementScores<f64> = topk_agreement(&ea, &eb).unwrap();
            let t: AgreementScores<f64> = topk_agreement(&eb, &ea).unwrap();
            prop_assert_eq!(s, t);
            for v in [s.topk, s.topk_pos, s.topk_neg] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            let own: AgreementScores<f64> = topk_agreement(&ea, &ea).unwrap();
            prop_assert_eq!(own, AgreementScores { topk: 1.0, topk_pos: 1.0, topk_neg: 1.0 });
        }
    }
}

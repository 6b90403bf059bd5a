//! Seeded stand-ins for the text and tabular corpora.

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::text::{smooth_idf, tfidf_row};
use super::{Dataset, SparseVec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticFamily {
    /// Two unit-variance Gaussians whose means sit `class_separation` apart.
    GaussianBlobs,
    /// Bag-of-words documents with class-tilted term frequencies, TF-IDF encoded.
    SparseBow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub family: SyntheticFamily,
    pub n_examples: usize,
    pub n_features: usize,
    pub class_separation: f64,
    pub noise_rate: f64,
    pub seed: u64,
    /// Mean tokens per document (`sparse_bow` only).
    #[serde(default = "default_doc_length")]
    pub doc_length: usize,
}

fn default_doc_length() -> usize {
    60
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_examples < 2 {
            return Err(Error::InvalidConfig("n_examples must be at least 2".into()));
        }
        if self.n_features == 0 {
            return Err(Error::InvalidConfig("n_features must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.noise_rate) {
            return Err(Error::InvalidConfig(format!("noise_rate {} not in [0, 0.5)", self.noise_rate)));
        }
        if !self.class_separation.is_finite() || self.class_separation < 0.0 {
            return Err(Error::InvalidConfig("class_separation must be finite and non-negative".into()));
        }
        if self.family == SyntheticFamily::SparseBow && self.doc_length == 0 {
            return Err(Error::InvalidConfig("doc_length must be positive".into()));
        }
        Ok(())
    }
}

/// Labels alternate 0/1 before noise, so classes are balanced up to one
/// example; each label is then flipped independently with `noise_rate`.
pub fn generate_synthetic<T: Scalar>(spec: &SyntheticSpec) -> Result<Dataset<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let clean: Vec<u8> = (0..spec.n_examples).map(|i| (i % 2) as u8).collect();
    let (names, rows) = match spec.family {
        SyntheticFamily::GaussianBlobs => blobs(spec, &clean, &mut rng),
        SyntheticFamily::SparseBow => bag_of_words(spec, &clean, &mut rng),
    };
    let labels = clean
        .iter()
        .map(|&l| if rng.random::<f64>() < spec.noise_rate { 1 - l } else { l })
        .collect();
    Dataset::unsplit(names, rows, labels)
}

fn unit_direction(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn blobs<T: Scalar>(spec: &SyntheticSpec, labels: &[u8], rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<SparseVec<T>>) {
    let d = spec.n_features;
    let dir = unit_direction(d, rng);
    let half = spec.class_separation / 2.0;
    let rows = labels
        .iter()
        .map(|&l| {
            let sign = if l == 1 { 1.0 } else { -1.0 };
            let x: Vec<T> = dir
                .iter()
                .map(|&u| T::of(sign * half * u + rng.sample::<f64, _>(StandardNormal)))
                .collect();
            SparseVec::from_dense(&x)
        })
        .collect();
    ((0..d).map(|j| format!("x{j}")).collect(), rows)
}

fn bag_of_words<T: Scalar>(
    spec: &SyntheticSpec,
    labels: &[u8],
    rng: &mut ChaCha8Rng,
) -> (Vec<String>, Vec<SparseVec<T>>) {
    let d = spec.n_features;
    // Zipf-like base frequencies; each term leans towards one class by a
    // normally distributed amount scaled by the separation.
    let lean: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let base: Vec<f64> = (0..d).map(|r| 1.0 / ((r + 1) as f64).powf(0.8)).collect();
    let class_dist = |class: f64| {
        let w: Vec<f64> = (0..d).map(|t| base[t] * (class * spec.class_separation * lean[t] / 2.0).exp()).collect();
        WeightedIndex::new(w).expect("positive weights")
    };
    let dists = [class_dist(-1.0), class_dist(1.0)];

    let lo = (spec.doc_length / 2).max(1);
    let hi = (spec.doc_length * 3 / 2).max(lo);
    let counts: Vec<HashMap<usize, usize>> = labels
        .iter()
        .map(|&l| {
            let len = rng.random_range(lo..=hi);
            let mut c = HashMap::new();
            for _ in 0..len {
                *c.entry(dists[l as usize].sample(rng)).or_insert(0) += 1;
            }
            c
        })
        .collect();
    let mut df = vec![0usize; d];
    for c in &counts {
        for &t in c.keys() {
            df[t] += 1;
        }
    }
    let n = labels.len();
    let rows = counts.into_iter().map(|c| tfidf_row(c, |t| smooth_idf::<T>(n, df[t]))).collect();
    ((0..d).map(|t| format!("t{t:04}")).collect(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(family: SyntheticFamily) -> SyntheticSpec {
        SyntheticSpec {
            family,
            n_examples: 100,
            n_features: 50,
            class_separation: 2.0,
            noise_rate: 0.1,
            seed: 4,
            doc_length: 30,
        }
    }

    #[test]
    fn deterministic_given_seed() {
        for fam in [SyntheticFamily::GaussianBlobs, SyntheticFamily::SparseBow] {
            let a: Dataset<f64> = generate_synthetic(&spec(fam)).unwrap();
            let b: Dataset<f64> = generate_synthetic(&spec(fam)).unwrap();
            assert_eq!(a.to_json(), b.to_json());
            let mut other = spec(fam);
            other.seed = 5;
            let c: Dataset<f64> = generate_synthetic(&other).unwrap();
            assert_ne!(a.to_json(), c.to_json());
        }
    }

    #[test]
    fn noise_rate_half_rejected() {
        let mut s = spec(SyntheticFamily::GaussianBlobs);
        s.noise_rate = 0.5;
        assert!(generate_synthetic::<f64>(&s).is_err());
        s.noise_rate = 0.0;
        s.n_examples = 1;
        assert!(generate_synthetic::<f64>(&s).is_err());
    }

    #[test]
    fn bow_rows_are_unit_norm() {
        let ds: Dataset<f64> = generate_synthetic(&spec(SyntheticFamily::SparseBow)).unwrap();
        assert_eq!(ds.n_features(), 50);
        for r in ds.rows() {
            assert!((r.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn noiseless_labels_are_balanced() {
        let mut s = spec(SyntheticFamily::GaussianBlobs);
        s.noise_rate = 0.0;
        let ds: Dataset<f64> = generate_synthetic(&s).unwrap();
        assert_eq!(ds.class_counts(), [50, 50]);
    }
}

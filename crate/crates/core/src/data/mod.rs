//! Immutable sparse datasets and everything that produces them.

mod split;
mod synthetic;
mod tabular;
mod text;

pub use split::split_dataset;
pub use synthetic::{generate_synthetic, SyntheticFamily, SyntheticSpec};
pub use tabular::{load_tabular_csv, TabularOptions};
pub use text::{
    build_vocabulary, load_text_csv, load_text_dir, token_spans, tokenize, vectorize_tfidf,
    StopWords, TextCorpus, TokenSpan, Vocabulary, ENGLISH_STOP_WORDS_ID,
};

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DATASET_SCHEMA_VERSION: u64 = 1;

/// Sparse row: strictly increasing indices, no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVec<T> {
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseVec<T> {
    pub fn empty() -> Self {
        Self { indices: Vec::new(), values: Vec::new() }
    }

    /// Builds a row from `(index, value)` pairs in any order. Zeros are
    /// dropped; a repeated index is an error.
    pub fn from_pairs(mut pairs: Vec<(usize, T)>) -> Result<Self> {
        pairs.sort_by_key(|&(i, _)| i);
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if indices.last() == Some(&i) {
                return Err(Error::InvalidDataset(format!("duplicate feature index {i}")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidDataset(format!("non-finite value at feature {i}")));
            }
            if v != T::zero() {
                indices.push(i);
                values.push(v);
            }
        }
        Ok(Self { indices, values })
    }

    pub fn from_dense(dense: &[T]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != T::zero())
            .map(|(i, v)| (i, *v))
            .unzip();
        Self { indices, values }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Largest stored index plus one, or 0 for an empty row.
    pub fn min_dim(&self) -> usize {
        self.indices.last().map_or(0, |i| i + 1)
    }

    pub fn dot(&self, dense: &[T]) -> T {
        self.iter().fold(T::zero(), |acc, (i, v)| acc + v * dense[i])
    }

    pub fn norm(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<T> {
        let mut out = vec![T::zero(); dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    /// Copy keeping only the stored entries whose position is flagged in `keep`.
    pub fn masked(&self, keep: &[bool]) -> Self {
        let (indices, values) = self
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|((i, v), _)| (i, v))
            .unzip();
        Self { indices, values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Binary-labelled sparse dataset. Construction validates every invariant;
/// afterwards the value is read-only.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    n_features: usize,
    feature_names: Vec<String>,
    rows: Vec<SparseVec<T>>,
    labels: Vec<u8>,
    ids: Vec<String>,
    splits: Vec<Option<Split>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<SparseVec<T>>,
        labels: Vec<u8>,
        ids: Vec<String>,
        splits: Vec<Option<Split>>,
    ) -> Result<Self> {
        let n_features = feature_names.len();
        let n = rows.len();
        if labels.len() != n || ids.len() != n || splits.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{} rows, {} labels, {} ids, {} split tags",
                n,
                labels.len(),
                ids.len(),
                splits.len()
            )));
        }
        let mut seen = HashSet::with_capacity(n_features);
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate feature name `{name}`")));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidLabel(bad));
        }
        let mut seen_ids = HashSet::with_capacity(n);
        for id in &ids {
            if !seen_ids.insert(id.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate example id `{id}`")));
            }
        }
        for (r, row) in rows.iter().enumerate() {
            if row.min_dim() > n_features {
                return Err(Error::InvalidDataset(format!(
                    "row {r} references feature {} but n_features = {n_features}",
                    row.min_dim() - 1
                )));
            }
        }
        Ok(Self { n_features, feature_names, rows, labels, ids, splits })
    }

    /// Dataset without split tags and with generated ids `ex-00000`, ...
    pub fn unsplit(
        feature_names: Vec<String>,
        rows: Vec<SparseVec<T>>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        let n = rows.len();
        let ids = (0..n).map(|i| format!("ex-{i:05}")).collect();
        Self::new(feature_names, rows, labels, ids, vec![None; n])
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &[SparseVec<T>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &SparseVec<T> {
        &self.rows[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn splits(&self) -> &[Option<Split>] {
        &self.splits
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn indices_of(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == Some(split)).collect()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.len() - ones, ones]
    }

    /// New dataset made of the listed examples, in the listed order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            n_features: self.n_features,
            feature_names: self.feature_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            splits: indices.iter().map(|&i| self.splits[i]).collect(),
        }
    }

    /// Examples tagged with `split`. Untagged datasets return everything for
    /// `Split::Train` and nothing for `Split::Test`.
    pub fn part(&self, split: Split) -> Self {
        if self.splits.iter().all(Option::is_none) {
            return match split {
                Split::Train => self.clone(),
                Split::Test => self.subset(&[]),
            };
        }
        self.subset(&self.indices_of(split))
    }

    pub fn with_splits(mut self, splits: Vec<Option<Split>>) -> Result<Self> {
        if splits.len() != self.len() {
            return Err(Error::LengthMismatch { left: self.len(), right: splits.len() });
        }
        self.splits = splits;
        Ok(self)
    }

    /// Replaces one example's label, as used by the local shrink procedure.
    pub fn with_label(mut self, i: usize, label: u8) -> Result<Self> {
        if label > 1 {
            return Err(Error::InvalidLabel(label));
        }
        self.labels[i] = label;
        Ok(self)
    }

    /// Concatenates two datasets over the same feature space.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.feature_names != other.feature_names {
            return Err(Error::InvalidDataset("feature spaces differ".into()));
        }
        let mut out = self.clone();
        out.rows.extend(other.rows.iter().cloned());
        out.labels.extend_from_slice(&other.labels);
        out.ids.extend(other.ids.iter().cloned());
        out.splits.extend_from_slice(&other.splits);
        Self::new(out.feature_names, out.rows, out.labels, out.ids, out.splits)
    }

    /// Short content hash identifying the dataset in model files.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(&self.to_file()).expect("dataset serializes");
        let digest = Sha256::digest(&json);
        hex::encode(&digest[..8])
    }

    fn to_file(&self) -> DatasetFile<T> {
        DatasetFile {
            schema_version: DATASET_SCHEMA_VERSION,
            n_features: self.n_features,
            feature_names: self.feature_names.clone(),
            examples: (0..self.len())
                .map(|i| ExampleRecord {
                    id: self.ids[i].clone(),
                    label: self.labels[i],
                    split: self.splits[i],
                    features: self.rows[i].iter().collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("dataset serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: DatasetFile<T> = serde_json::from_str(s)?;
        if file.schema_version != DATASET_SCHEMA_VERSION {
            return Err(Error::SchemaVersion(file.schema_version));
        }
        if file.feature_names.len() != file.n_features {
            return Err(Error::InvalidDataset(format!(
                "n_features = {} but {} feature names",
                file.n_features,
                file.feature_names.len()
            )));
        }
        let mut rows = Vec::with_capacity(file.examples.len());
        let mut labels = Vec::with_capacity(file.examples.len());
        let mut ids = Vec::with_capacity(file.examples.len());
        let mut splits = Vec::with_capacity(file.examples.len());
        for ex in file.examples {
            if ex.features.iter().any(|(_, v)| *v == T::zero()) {
                return Err(Error::InvalidDataset(format!("example `{}` stores a zero", ex.id)));
            }
            rows.push(SparseVec::from_pairs(ex.features)?);
            labels.push(ex.label);
            ids.push(ex.id);
            splits.push(ex.split);
        }
        Self::new(file.feature_names, rows, labels, ids, splits)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetFile<T> {
    schema_version: u64,
    n_features: usize,
    feature_names: Vec<String>,
    examples: Vec<ExampleRecord<T>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExampleRecord<T> {
    id: String,
    label: u8,
    split: Option<Split>,
    features: Vec<(usize, T)>,
}

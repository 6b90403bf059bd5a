use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use super::{split_dataset, Dataset, SparseVec, Split};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Default)]
pub struct TabularOptions {
    pub label_column: String,
    pub categorical_columns: Vec<String>,
    /// Raw label value coded as 1. Defaults to `"1"` when the column holds
    /// `0`/`1`, otherwise the lexicographically larger value.
    pub positive_label: Option<String>,
    /// When set, the dataset is split first and min-max statistics come
    /// from the training split only.
    pub split: Option<(f64, u64)>,
}

enum Column {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

/// One-hot encodes categorical columns as `col=value` features (values in
/// sorted order) and min-max scales numeric columns.
pub fn load_tabular_csv<T: Scalar>(path: impl AsRef<Path>, opts: &TabularOptions) -> Result<Dataset<T>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let label_col = find(&opts.label_column)?;
    for c in &opts.categorical_columns {
        find(c)?;
    }
    let records: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;

    let raw_labels: Vec<&str> = records.iter().map(|r| r.get(label_col).unwrap_or("").trim()).collect();
    let distinct: BTreeSet<&str> = raw_labels.iter().copied().collect();
    if distinct.len() > 2 {
        return Err(Error::NonBinaryLabel { column: opts.label_column.clone(), found: distinct.len() });
    }
    let positive = match &opts.positive_label {
        Some(p) => p.clone(),
        None if distinct.iter().all(|v| *v == "0" || *v == "1") => "1".to_string(),
        None => distinct.iter().next_back().map(|s| s.to_string()).unwrap_or_default(),
    };
    let labels: Vec<u8> = raw_labels.iter().map(|v| u8::from(*v == positive)).collect();

    let mut columns: Vec<(String, Column)> = Vec::new();
    for (c, name) in headers.iter().enumerate() {
        if c == label_col {
            continue;
        }
        let cells = records.iter().map(|r| r.get(c).unwrap_or("").trim());
        if opts.categorical_columns.contains(name) {
            columns.push((name.clone(), Column::Categorical(cells.map(str::to_string).collect())));
        } else {
            let mut values = Vec::with_capacity(records.len());
            for (row, cell) in cells.enumerate() {
                values.push(cell.parse::<f64>().map_err(|_| Error::UnparseableNumber {
                    column: name.clone(),
                    row,
                    value: cell.to_string(),
                })?);
            }
            columns.push((name.clone(), Column::Numeric(values)));
        }
    }

    let n = records.len();
    let ids: Vec<String> = (0..n).map(|i| format!("row-{i:05}")).collect();
    let placeholder: Vec<SparseVec<T>> = vec![SparseVec::empty(); n];
    let mut splits = vec![None; n];
    if let Some((fraction, seed)) = opts.split {
        let tags = Dataset::new(Vec::new(), placeholder.clone(), labels.clone(), ids.clone(), vec![None; n])?;
        splits = split_dataset(&tags, fraction, seed)?.splits().to_vec();
    }
    let fit_rows: Vec<usize> = (0..n).filter(|&i| splits[i] != Some(Split::Test)).collect();

    let mut feature_names = Vec::new();
    let mut pairs: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    for (name, column) in &columns {
        match column {
            Column::Numeric(values) => {
                let (lo, hi) = fit_rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    (lo.min(values[i]), hi.max(values[i]))
                });
                let idx = feature_names.len();
                feature_names.push(name.clone());
                let span = hi - lo;
                for (i, &v) in values.iter().enumerate() {
                    let scaled = if span > 0.0 { (v - lo) / span } else { 0.0 };
                    if scaled != 0.0 {
                        pairs[i].push((idx, T::of(scaled)));
                    }
                }
            }
            Column::Categorical(values) => {
                let levels: BTreeSet<&str> = values.iter().map(String::as_str).collect();
                let mut index = HashMap::new();
                for level in levels {
                    index.insert(level, feature_names.len());
                    feature_names.push(format!("{name}={level}"));
                }
                for (i, v) in values.iter().enumerate() {
                    pairs[i].push((index[v.as_str()], T::one()));
                }
            }
        }
    }
    let rows = pairs.into_iter().map(SparseVec::from_pairs).collect::<Result<Vec<_>>>()?;
    Dataset::new(feature_names, rows, labels, ids, splits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(content: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(&p, content).unwrap();
        (dir, p)
    }

    fn opts(cats: &[&str]) -> TabularOptions {
        TabularOptions {
            label_column: "income".into(),
            categorical_columns: cats.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        }
    }

    #[test]
    fn one_hot_and_min_max() {
        let (_d, p) = write("age,sex,income\n10,M,>50K\n20,F,<=50K\n30,M,>50K\n");
        let ds: Dataset<f64> = load_tabular_csv(&p, &opts(&["sex"])).unwrap();
        assert_eq!(ds.feature_names(), &["age", "sex=F", "sex=M"]);
        assert_eq!(ds.labels(), &[1, 0, 1]);
        assert_eq!(ds.row(1).to_dense(3), vec![0.5, 1.0, 0.0]);
        assert_eq!(ds.row(0).to_dense(3), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn scaling_uses_training_statistics() {
        let mut csv = String::from("x,income\n");
        for i in 0..20 {
            csv.push_str(&format!("{},{}\n", i, i % 2));
        }
        let (_d, p) = write(&csv);
        let mut o = opts(&[]);
        o.split = Some((0.25, 1));
        let ds: Dataset<f64> = load_tabular_csv(&p, &o).unwrap();
        let train = ds.part(Split::Train);
        let max = train.rows().iter().map(|r| r.to_dense(1)[0]).fold(0.0, f64::max);
        assert_eq!(max, 1.0);
    }

    #[test]
    fn errors() {
        let (_d, p) = write("a,income\n1,x\n2,y\n3,z\n");
        assert!(matches!(
            load_tabular_csv::<f64>(&p, &opts(&[])),
            Err(Error::NonBinaryLabel { found: 3, .. })
        ));
        let (_d, p) = write("a,income\nfoo,1\n");
        assert!(matches!(load_tabular_csv::<f64>(&p, &opts(&[])), Err(Error::UnparseableNumber { .. })));
        let (_d, p) = write("a,b\n1,1\n");
        assert!(matches!(load_tabular_csv::<f64>(&p, &opts(&[])), Err(Error::MissingColumn(_))));
    }
}

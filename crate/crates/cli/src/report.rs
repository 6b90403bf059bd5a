//! Sweep reports and their Table-1 and Table-3 renderings.
//!
//! A report always carries its raw per-seed (global) or per-target (local)
//! rows; aggregates are derived from them and re-derived on load so the
//! two can never drift apart.

use std::fmt::Write as _;

use dissent_core::local::{bucket_by_iterations, summarize_records, BucketRow, LocalMethod, LocalRecord, LocalSweepRow};
use dissent_core::metrics::{mean_std, MeanStd};
use dissent_core::objectives::DissentKind;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const REPORT_SCHEMA_VERSION: u64 = 1;

/// One (λ, seed) cell of a global sweep, measured on the test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalRow {
    pub method: DissentKind,
    pub lambda: f64,
    pub seed: u64,
    pub accuracy: f64,
    pub disagreement: f64,
    /// Share of the reference's test errors the dissenter gets right;
    /// empty when the reference makes none.
    pub corrected_rate: Option<f64>,
    /// Mean agreement over the explained test examples.
    pub topk: Option<f64>,
    pub topk_pos: Option<f64>,
    pub topk_neg: Option<f64>,
    /// Mean TopK over the explained examples where the models disagree.
    pub topk_dissent_only: Option<f64>,
    pub n_explained: usize,
    pub n_explained_dissent: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalAggregate {
    pub method: DissentKind,
    pub lambda: f64,
    pub n_seeds: usize,
    pub accuracy: MeanStd,
    pub disagreement: MeanStd,
    pub corrected_rate: Option<MeanStd>,
    pub topk: Option<MeanStd>,
    pub topk_pos: Option<MeanStd>,
    pub topk_neg: Option<MeanStd>,
    pub topk_dissent_only: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalReport {
    pub method: DissentKind,
    pub rows: Vec<GlobalRow>,
    pub aggregates: Vec<GlobalAggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalReport {
    pub method: LocalMethod,
    pub records: Vec<LocalRecord>,
    pub rows: Vec<LocalSweepRow>,
    /// Iteration buckets, retraining only.
    pub buckets: Option<Vec<BucketRow>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Sweep {
    Global(GlobalReport),
    Local(LocalReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissentReport {
    pub schema_version: u64,
    #[serde(flatten)]
    pub sweep: Sweep,
}

fn stat(xs: &[Option<f64>]) -> Option<MeanStd> {
    let present: Vec<f64> = xs.iter().flatten().copied().collect();
    mean_std(&present).ok()
}

/// Mean and sample standard deviation over seeds, one entry per λ in order
/// of first appearance.
pub fn aggregate_global(rows: &[GlobalRow]) -> Result<Vec<GlobalAggregate>> {
    if rows.is_empty() {
        return Err(CliError::EmptyReport);
    }
    let mut lambdas: Vec<(DissentKind, f64)> = Vec::new();
    for r in rows {
        if !lambdas.contains(&(r.method, r.lambda)) {
            lambdas.push((r.method, r.lambda));
        }
    }
    lambdas
        .into_iter()
        .map(|(method, lambda)| {
            let cell: Vec<&GlobalRow> = rows.iter().filter(|r| r.method == method && r.lambda == lambda).collect();
            let col = |f: fn(&GlobalRow) -> Option<f64>| cell.iter().map(|r| f(r)).collect::<Vec<_>>();
            let acc: Vec<f64> = cell.iter().map(|r| r.accuracy).collect();
            let dis: Vec<f64> = cell.iter().map(|r| r.disagreement).collect();
            Ok(GlobalAggregate {
                method,
                lambda,
                n_seeds: cell.len(),
                accuracy: mean_std(&acc)?,
                disagreement: mean_std(&dis)?,
                corrected_rate: stat(&col(|r| r.corrected_rate)),
                topk: stat(&col(|r| r.topk)),
                topk_pos: stat(&col(|r| r.topk_pos)),
                topk_neg: stat(&col(|r| r.topk_neg)),
                topk_dissent_only: stat(&col(|r| r.topk_dissent_only)),
            })
        })
        .collect()
}

impl DissentReport {
    pub fn global(method: DissentKind, rows: Vec<GlobalRow>) -> Result<Self> {
        let aggregates = aggregate_global(&rows)?;
        Ok(Self { schema_version: REPORT_SCHEMA_VERSION, sweep: Sweep::Global(GlobalReport { method, rows, aggregates }) })
    }

    pub fn local(method: LocalMethod, records: Vec<LocalRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(CliError::EmptyReport);
        }
        let rows = summarize_records(&records)?;
        let buckets = match method {
            LocalMethod::RetrainMlp => Some(bucket_by_iterations(&records)?),
            LocalMethod::ShrinkSvm => None,
        };
        Ok(Self { schema_version: REPORT_SCHEMA_VERSION, sweep: Sweep::Local(LocalReport { method, records, rows, buckets }) })
    }

    /// Rebuilds the aggregates from the raw rows.
    pub fn recomputed(&self) -> Result<Self> {
        match &self.sweep {
            Sweep::Global(g) => Self::global(g.method, g.rows.clone()),
            Sweep::Local(l) => Self::local(l.method, l.records.clone()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Parses a report and checks its aggregates against its raw rows.
    pub fn from_json(s: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(s)?;
        if r.schema_version != REPORT_SCHEMA_VERSION {
            return Err(CliError::Check(format!("unsupported report schema_version {}", r.schema_version)));
        }
        if r.recomputed()? != r {
            return Err(CliError::Check("stored aggregates differ from the raw rows".into()));
        }
        Ok(r)
    }

    /// Raw rows as CSV.
    pub fn raw_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        match &self.sweep {
            Sweep::Global(g) => g.rows.iter().try_for_each(|r| w.serialize(r))?,
            Sweep::Local(l) => l.records.iter().try_for_each(|r| w.serialize(r))?,
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TableStyle {
    Table1,
    Table3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl TableFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TableFormat::Csv => "csv",
            TableFormat::Markdown => "md",
        }
    }
}

/// Rendered cells; both output formats carry exactly these strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

const NA: &str = "n/a";

fn acc(m: &MeanStd) -> String {
    format!("{:.3} ± {:.3}", m.mean, m.std)
}

fn pct(m: &MeanStd) -> String {
    format!("{:.1} ± {:.1}%", 100.0 * m.mean, 100.0 * m.std)
}

fn pct_mean(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Builds the table cells of `style` from a report.
pub fn build_table(report: &DissentReport, style: TableStyle) -> Result<Table> {
    match (&report.sweep, style) {
        (Sweep::Global(g), TableStyle::Table1) => {
            if g.aggregates.is_empty() {
                return Err(CliError::EmptyReport);
            }
            let rows = g
                .aggregates
                .iter()
                .map(|a| {
                    vec![
                        a.lambda.to_string(),
                        acc(&a.accuracy),
                        pct(&a.disagreement),
                        a.corrected_rate.as_ref().map_or(NA.into(), |c| pct_mean(c.mean)),
                    ]
                })
                .collect();
            Ok(Table { header: strings(&["λ", "Accuracy", "Disagreement", "Corr."]), rows })
        }
        (Sweep::Local(l), TableStyle::Table3) => match &l.buckets {
            None => {
                if l.rows.is_empty() {
                    return Err(CliError::EmptyReport);
                }
                let rows = l
                    .rows
                    .iter()
                    .map(|r| vec![r.grid_value.to_string(), acc(&r.success), acc(&r.topk), format!("{:.3}", r.accuracy.mean)])
                    .collect();
                Ok(Table { header: strings(&["|D|", "Success Rate", "TopK Agree.", "Acc."]), rows })
            }
            Some(buckets) => {
                let rows = buckets
                    .iter()
                    .map(|b| {
                        vec![
                            b.bucket.clone(),
                            pct_mean(b.share.mean),
                            b.topk.as_ref().map_or(NA.into(), acc),
                            b.accuracy.as_ref().map_or(NA.into(), |a| format!("{:.3}", a.mean)),
                        ]
                    })
                    .collect();
                Ok(Table { header: strings(&["Iter.", "Freq.", "TopK Agree.", "Acc."]), rows })
            }
        },
        (Sweep::Global(_), TableStyle::Table3) => {
            Err(CliError::Config("table3 needs a local sweep report".into()))
        }
        (Sweep::Local(_), TableStyle::Table1) => {
            Err(CliError::Config("table1 needs a global sweep report".into()))
        }
    }
}

impl Table {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
    }

    pub fn to_markdown(&self) -> String {
        let cell = |s: &String| s.replace('|', "\\|");
        let mut out = String::new();
        let line = |out: &mut String, cells: &[String]| {
            let joined: Vec<String> = cells.iter().map(cell).collect();
            let _ = writeln!(out, "| {} |", joined.join(" | "));
        };
        line(&mut out, &self.header);
        let _ = writeln!(out, "|{}|", vec!["---"; self.header.len()].join("|"));
        for r in &self.rows {
            line(&mut out, r);
        }
        out
    }

    pub fn render(&self, format: TableFormat) -> Result<String> {
        match format {
            TableFormat::Csv => self.to_csv(),
            TableFormat::Markdown => Ok(self.to_markdown()),
        }
    }

    pub fn from_csv(s: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(s.as_bytes());
        let mut lines = r.records().map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect::<Vec<_>>()));
        let header = lines.next().ok_or(CliError::EmptyReport)??;
        let rows = lines.collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { header, rows })
    }

    pub fn from_markdown(s: &str) -> Result<Self> {
        let parse = |line: &str| -> Vec<String> {
            let inner = line.trim().trim_start_matches('|').trim_end_matches('|');
            let mut cells = Vec::new();
            let mut cur = String::new();
            let mut chars = inner.chars().peekable();
            while let Some(c) = chars.next() {
                match c {
                    '\\' if chars.peek() == Some(&'|') => cur.push(chars.next().expect("peeked")),
                    '|' => cells.push(std::mem::take(&mut cur).trim().to_string()),
                    _ => cur.push(c),
                }
            }
            cells.push(cur.trim().to_string());
            cells
        };
        let mut lines = s.lines().filter(|l| !l.trim().is_empty());
        let header = parse(lines.next().ok_or(CliError::EmptyReport)?);
        lines.next();
        Ok(Self { header, rows: lines.map(parse).collect() })
    }
}

/// Renders `report` in `style` and `format`.
pub fn emit_table(report: &DissentReport, style: TableStyle, format: TableFormat) -> Result<String> {
    build_table(report, style)?.render(format)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(lambda: f64, seed: u64, accuracy: f64, disagreement: f64) -> GlobalRow {
        GlobalRow {
            method: DissentKind::Reg,
            lambda,
            seed,
            accuracy,
            disagreement,
            corrected_rate: Some(0.4),
            topk: Some(0.5),
            topk_pos: None,
            topk_neg: Some(1.0),
            topk_dissent_only: None,
            n_explained: 10,
            n_explained_dissent: 0,
        }
    }

    #[test]
    fn single_row_table() {
        let r = DissentReport::global(DissentKind::Reg, vec![row(0.0, 1, 0.889, 0.0866)]).unwrap();
        let csv = emit_table(&r, TableStyle::Table1, TableFormat::Csv).unwrap();
        assert_eq!(csv, "λ,Accuracy,Disagreement,Corr.\n0,0.889 ± 0.000,8.7 ± 0.0%,40.0%\n");
        let md = emit_table(&r, TableStyle::Table1, TableFormat::Markdown).unwrap();
        assert_eq!(md.lines().count(), 3);
    }

    #[test]
    fn markdown_round_trips_through_csv() {
        let rows = vec![row(0.0, 1, 0.9, 0.05), row(0.0, 2, 0.88, 0.07), row(0.5, 1, 0.8, 0.15), row(0.5, 2, 0.82, 0.2)];
        let r = DissentReport::global(DissentKind::Reg, rows).unwrap();
        let t = build_table(&r, TableStyle::Table1).unwrap();
        assert_eq!(Table::from_csv(&t.to_csv().unwrap()).unwrap(), t);
        assert_eq!(Table::from_markdown(&t.to_markdown()).unwrap(), t);
        assert_eq!(t.rows[1][2], "17.5 ± 3.5%");
    }

    #[test]
    fn aggregates_use_sample_std() {
        let rows = vec![row(0.0, 1, 0.8, 0.1), row(0.0, 2, 0.9, 0.3)];
        let a = &aggregate_global(&rows).unwrap()[0];
        assert!((a.accuracy.mean - 0.85).abs() < 1e-12);
        assert!((a.accuracy.std - (0.005f64).sqrt()).abs() < 1e-12);
        assert!(a.topk_pos.is_none() && a.topk_dissent_only.is_none());
        assert_eq!(a.n_seeds, 2);
    }

    #[test]
    fn tampered_aggregates_are_rejected() {
        let r = DissentReport::global(DissentKind::Reg, vec![row(0.0, 1, 0.9, 0.1), row(0.0, 2, 0.8, 0.1)]).unwrap();
        assert_eq!(DissentReport::from_json(&r.to_json()).unwrap(), r);
        let mut bad = r.clone();
        if let Sweep::Global(g) = &mut bad.sweep {
            g.aggregates[0].accuracy.mean = 0.5;
        }
        assert!(matches!(DissentReport::from_json(&bad.to_json()), Err(CliError::Check(_))));
    }

    #[test]
    fn styles_must_match_the_sweep() {
        let r = DissentReport::global(DissentKind::Reg, vec![row(0.0, 1, 0.9, 0.1)]).unwrap();
        assert!(build_table(&r, TableStyle::Table3).is_err());
        assert!(matches!(DissentReport::global(DissentKind::Reg, vec![]), Err(CliError::EmptyReport)));
        assert!(matches!(DissentReport::local(LocalMethod::ShrinkSvm, vec![]), Err(CliError::EmptyReport)));
    }

    #[test]
    fn local_tables() {
        let rec = |m: f64, success: bool, it: usize| LocalRecord {
            target_id: "t".into(),
            grid_value: m,
            seed: 1,
            success,
            iterations_or_subset_size: it,
            topk: 0.5,
            accuracy: 0.8,
            baseline_accuracy: 0.85,
        };
        let r = DissentReport::local(LocalMethod::ShrinkSvm, vec![rec(10.0, true, 10), rec(10.0, false, 10), rec(80.0, false, 80)])
            .unwrap();
        let t = build_table(&r, TableStyle::Table3).unwrap();
        assert_eq!(t.header[0], "|D|");
        assert_eq!(t.rows[0], strings(&["10", "0.500 ± 0.500", "0.500 ± 0.000", "0.800"]));
        assert_eq!(Table::from_markdown(&t.to_markdown()).unwrap(), t);

        let r = DissentReport::local(LocalMethod::RetrainMlp, vec![rec(0.01, true, 3), rec(0.01, false, 100)]).unwrap();
        let t = build_table(&r, TableStyle::Table3).unwrap();
        assert_eq!(t.header, strings(&["Iter.", "Freq.", "TopK Agree.", "Acc."]));
        assert_eq!(t.rows[0], strings(&["<5", "50.0%", "0.500 ± 0.000", "0.800"]));
        assert_eq!(t.rows[4], strings(&[">20", "0.0%", NA, NA]));
    }
}

//! The `dissent-kit` verbs. Each reads and writes only the JSON and CSV
//! formats of the core and study crates plus sweep reports, and prints a
//! one-line JSON summary on success.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use dissent_core::data::{
    build_vocabulary, generate_synthetic, load_tabular_csv, load_text_csv, load_text_dir, split_dataset,
    vectorize_tfidf, Dataset, SparseVec, Split, StopWords, TabularOptions, TextCorpus,
};
use dissent_core::explain::{explain_dataset, fidelity_check, Explanation, DEFAULT_FIDELITY_TAU};
use dissent_core::local::{local_sweep, LocalSweepConfig};
use dissent_core::metrics::{mean_agreement, topk_agreement, AgreementScores, Scope};
use dissent_core::models::{train_linear_svm, train_mlp, Classifier, Model};
use dissent_study::{build_bundle, AppState, BundleOptions, SessionStore, StudyBundle};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{DatasetSource, ExperimentConfig, ModelKind, StopWordChoice, SEED_ENV};
use crate::error::{CliError, Result};
use crate::report::{build_table, DissentReport, TableFormat, TableStyle};
use crate::sweep::{global_sweep, gradcheck_suite, GlobalSweepConfig};

#[derive(Debug, Parser)]
#[command(name = "dissent-kit", version, about = "Dissenting models and explanations: experiments, reports and the study service")]
pub struct Cli {
    /// Experiment config (JSON). Built-in defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config field, e.g. `--set dissent.kind=weights`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Output directory; takes precedence over `output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrainRole {
    /// The reference model of the config.
    Reference,
    /// One plain MLP per seed with the dissenter training config.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitChoice {
    Train,
    Test,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the resolved config.
    Config,
    /// Build the dataset of the config and write it with its split.
    Ingest,
    /// Train the reference model, or plain MLPs per seed.
    Train {
        #[arg(long, value_enum, default_value = "reference")]
        role: TrainRole,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Sweep the REG or WEIGHTS objective over λ and seeds.
    DissentGlobal {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Also write every dissenter model.
        #[arg(long)]
        save_models: bool,
    },
    /// Flip single test predictions by shrinking or retraining.
    DissentLocal {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Explain a model's predictions with the local surrogate.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitChoice,
        #[arg(long)]
        limit: Option<usize>,
        /// Output name; defaults to the model file stem.
        #[arg(long)]
        name: Option<String>,
        /// Fidelity threshold.
        #[arg(long, default_value_t = DEFAULT_FIDELITY_TAU, allow_hyphen_values = true)]
        tau: f64,
    },
    /// Compare two explanation files example by example.
    Agree {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
    },
    /// Re-derive a report's aggregates and render a table.
    Report {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_enum)]
        style: TableStyle,
        #[arg(long, value_enum, default_value = "csv")]
        format: TableFormat,
        /// Write here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check analytic gradients against central differences.
    Gradcheck {
        #[arg(long, default_value_t = 10)]
        models: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Build a study bundle from two models.
    Bundle {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// JSON map of example id to display text; defaults to
        /// `texts.json` in the output directory, else to the feature names
        /// of each example's active features.
        #[arg(long)]
        texts: Option<PathBuf>,
        #[arg(long = "id")]
        ids: Vec<String>,
        #[arg(long)]
        balanced: Option<usize>,
        #[arg(long)]
        require_dissent: bool,
        /// Plain-text file shown before the first item.
        #[arg(long)]
        instructions: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Serve a study bundle over HTTP.
    Serve {
        #[arg(long)]
        bundle: PathBuf,
        /// Answer log; defaults to `answers.jsonl` in the output directory.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory of the browser client.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
}

/// Resolves the config and runs one command, returning its summary.
pub fn run(cli: Cli) -> Result<Value> {
    let env_seed = std::env::var(SEED_ENV).ok();
    let mut cfg = ExperimentConfig::load(cli.config.as_deref(), &cli.overrides, env_seed.as_deref())?;
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    let out = cfg.output_dir.clone();
    match cli.command {
        Command::Config => Ok(serde_json::to_value(&cfg)?),
        Command::Ingest => cmd_ingest(&cfg),
        Command::Train { role, dataset } => cmd_train(&cfg, role, &artifact(dataset, &out, "dataset.json")?),
        Command::DissentGlobal { dataset, reference, save_models } => cmd_dissent_global(
            &cfg,
            &artifact(dataset, &out, "dataset.json")?,
            &artifact(reference, &out, "reference.json")?,
            save_models,
        ),
        Command::DissentLocal { dataset, reference } => cmd_dissent_local(
            &cfg,
            &artifact(dataset, &out, "dataset.json")?,
            &artifact(reference, &out, "reference.json")?,
        ),
        Command::Explain { model, dataset, split, limit, name, tau } => {
            let ds = artifact(dataset, &out, "dataset.json")?;
            cmd_explain(&cfg, &existing(model)?, &ds, split, limit, name, tau)
        }
        Command::Agree { f, g } => cmd_agree(&cfg, &existing(f)?, &existing(g)?),
        Command::Report { report, style, format, output } => cmd_report(&existing(report)?, style, format, output.as_deref()),
        Command::Gradcheck { models, seed, tolerance } => cmd_gradcheck(&cfg, models, seed, tolerance),
        Command::Bundle { f, g, dataset, texts, ids, balanced, require_dissent, instructions, output } => {
            let texts = match texts {
                Some(p) => Some(existing(p)?),
                None => Some(out.join("texts.json")).filter(|p| p.exists()),
            };
            let opts = BundleOptions {
                require_dissent,
                balanced,
                instructions: match instructions {
                    Some(p) => fs::read_to_string(existing(p)?)?,
                    None => String::new(),
                },
                ..BundleOptions::default()
            };
            let ds = artifact(dataset, &out, "dataset.json")?;
            let output = output.unwrap_or_else(|| out.join("bundle.json"));
            cmd_bundle(&cfg, &existing(f)?, &existing(g)?, &ds, texts.as_deref(), &ids, &opts, &output)
        }
        Command::Serve { bundle, log, addr, static_dir } => {
            let log = log.unwrap_or_else(|| out.join("answers.jsonl"));
            cmd_serve(&existing(bundle)?, &log, addr, static_dir)
        }
    }
}

fn existing(p: PathBuf) -> Result<PathBuf> {
    if p.exists() {
        Ok(p)
    } else {
        Err(CliError::MissingFile(p))
    }
}

fn artifact(given: Option<PathBuf>, out: &Path, default: &str) -> Result<PathBuf> {
    existing(given.unwrap_or_else(|| out.join(default)))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write(path, s)
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn stop_words(choice: StopWordChoice) -> StopWords {
    match choice {
        StopWordChoice::English => StopWords::english(),
        StopWordChoice::None => StopWords::none(),
    }
}

/// Splits first, then fits the vocabulary and idf on the training documents.
fn text_dataset(corpus: &TextCorpus, choice: StopWordChoice, cfg: &ExperimentConfig) -> Result<Dataset<f64>> {
    let n = corpus.texts.len();
    let placeholder = Dataset::<f64>::new(
        vec!["_".into()],
        vec![SparseVec::empty(); n],
        corpus.labels.clone(),
        corpus.ids.clone(),
        vec![None; n],
    )?;
    let splits = split_dataset(&placeholder, cfg.split.test_fraction, cfg.split.seed)?.splits().to_vec();
    let train_docs: Vec<&str> = corpus
        .texts
        .iter()
        .zip(&splits)
        .filter(|(_, s)| **s == Some(Split::Train))
        .map(|(t, _)| t.as_str())
        .collect();
    let vocab = build_vocabulary(&train_docs, &stop_words(choice))?;
    let rows = vectorize_tfidf(&corpus.texts, &vocab);
    write(&cfg.output_dir.join("vocabulary.json"), vocab.to_json())?;
    Ok(Dataset::new(vocab.terms().to_vec(), rows, corpus.labels.clone(), corpus.ids.clone(), splits)?)
}

/// Builds the configured dataset; text sources also write `texts.json`
/// and `vocabulary.json`.
pub fn build_dataset(cfg: &ExperimentConfig) -> Result<Dataset<f64>> {
    let split = |ds: Dataset<f64>| -> Result<Dataset<f64>> {
        Ok(split_dataset(&ds, cfg.split.test_fraction, cfg.split.seed)?)
    };
    let text = |corpus: TextCorpus, choice| -> Result<Dataset<f64>> {
        let texts: BTreeMap<&str, &str> = corpus.ids.iter().map(String::as_str).zip(corpus.texts.iter().map(String::as_str)).collect();
        write_json(&cfg.output_dir.join("texts.json"), &texts)?;
        text_dataset(&corpus, choice, cfg)
    };
    match &cfg.dataset {
        DatasetSource::Synthetic(spec) => split(generate_synthetic(spec)?),
        DatasetSource::Dataset { path } => {
            let ds = Dataset::load(existing(path.clone())?)?;
            if ds.splits().iter().any(Option::is_none) {
                split(ds)
            } else {
                Ok(ds)
            }
        }
        DatasetSource::TextCsv { path, stop_words } => text(load_text_csv(existing(path.clone())?)?, *stop_words),
        DatasetSource::TextDir { path, stop_words } => text(load_text_dir(existing(path.clone())?)?, *stop_words),
        DatasetSource::Tabular { path, label_column, categorical_columns, positive_label } => {
            let opts = TabularOptions {
                label_column: label_column.clone(),
                categorical_columns: categorical_columns.clone(),
                positive_label: positive_label.clone(),
                split: Some((cfg.split.test_fraction, cfg.split.seed)),
            };
            Ok(load_tabular_csv(existing(path.clone())?, &opts)?)
        }
    }
}

pub fn cmd_ingest(cfg: &ExperimentConfig) -> Result<Value> {
    let ds = build_dataset(cfg)?;
    let path = cfg.output_dir.join("dataset.json");
    write(&path, ds.to_json())?;
    Ok(json!({
        "dataset": display(&path),
        "n_examples": ds.len(),
        "n_features": ds.n_features(),
        "n_train": ds.indices_of(Split::Train).len(),
        "n_test": ds.indices_of(Split::Test).len(),
        "class_counts": ds.class_counts(),
        "fingerprint": ds.fingerprint(),
    }))
}

fn load_model(path: &Path) -> Result<Model<f64>> {
    Ok(Model::load(path)?)
}

fn split_accuracies(model: &dyn Classifier<f64>, ds: &Dataset<f64>) -> Result<(f64, f64)> {
    Ok((model.accuracy(&ds.part(Split::Train))?, model.accuracy(&ds.part(Split::Test))?))
}

pub fn train_reference(cfg: &ExperimentConfig, ds: &Dataset<f64>) -> Result<Model<f64>> {
    let train = ds.part(Split::Train);
    let tc = cfg.reference.train_config();
    Ok(match cfg.reference.model {
        ModelKind::Linear => Model::Linear(train_linear_svm(&train, &tc)?),
        ModelKind::Mlp => Model::Mlp(train_mlp(&train, &tc, None)?),
    })
}

pub fn plain_model_path(out: &Path, seed: u64) -> PathBuf {
    out.join("models").join(format!("plain_seed{seed}.json"))
}

pub fn cmd_train(cfg: &ExperimentConfig, role: TrainRole, dataset: &Path) -> Result<Value> {
    let ds = Dataset::load(dataset)?;
    let out = &cfg.output_dir;
    let summary = match role {
        TrainRole::Reference => {
            let model = train_reference(cfg, &ds)?;
            let path = out.join("reference.json");
            write(&path, model.to_json())?;
            let (train_accuracy, test_accuracy) = split_accuracies(&model, &ds)?;
            json!({
                "role": "reference",
                "model": display(&path),
                "kind": model.kind(),
                "fingerprint": model.fingerprint(),
                "train_accuracy": train_accuracy,
                "test_accuracy": test_accuracy,
            })
        }
        TrainRole::Plain => {
            let train = ds.part(Split::Train);
            let mut models = Vec::new();
            for &seed in &cfg.seeds {
                let m = Model::Mlp(train_mlp(&train, &cfg.dissent.train_config().with_seed(seed), None)?);
                let path = plain_model_path(out, seed);
                write(&path, m.to_json())?;
                let (train_accuracy, test_accuracy) = split_accuracies(&m, &ds)?;
                models.push(json!({
                    "seed": seed,
                    "model": display(&path),
                    "train_accuracy": train_accuracy,
                    "test_accuracy": test_accuracy,
                }));
            }
            json!({ "role": "plain", "models": models })
        }
    };
    let name = match role {
        TrainRole::Reference => "train_reference.json",
        TrainRole::Plain => "train_plain.json",
    };
    write_json(&out.join(name), &summary)?;
    Ok(summary)
}

fn write_tables(dir: &Path, report: &DissentReport, style: TableStyle) -> Result<()> {
    let table = build_table(report, style)?;
    let stem = match style {
        TableStyle::Table1 => "table1",
        TableStyle::Table3 => "table3",
    };
    for format in [TableFormat::Csv, TableFormat::Markdown] {
        write(&dir.join(format!("{stem}.{}", format.extension())), table.render(format)?)?;
    }
    Ok(())
}

pub fn cmd_dissent_global(cfg: &ExperimentConfig, dataset: &Path, reference: &Path, save_models: bool) -> Result<Value> {
    let ds = Dataset::load(dataset)?;
    let f = load_model(reference)?;
    let sweep = GlobalSweepConfig {
        kind: cfg.dissent.kind,
        lambdas: cfg.dissent.lambdas.clone(),
        seeds: cfg.seeds.clone(),
        train: cfg.dissent.train_config(),
        explainer: cfg.explainer.clone(),
        n_explain: cfg.agreement.n_instances,
    };
    let models_dir = cfg.output_dir.join("models");
    let kind = cfg.dissent.kind.name();
    let report = global_sweep(&ds, &f, &sweep, |lambda, seed, g| {
        if save_models {
            let path = models_dir.join(format!("g_{kind}_lambda{lambda}_seed{seed}.json"));
            write(&path, Model::Mlp(g.clone()).to_json())?;
        }
        Ok(())
    })?;
    let dir = cfg.output_dir.join(format!("global_{kind}"));
    write(&dir.join("report.json"), report.to_json())?;
    write(&dir.join("rows.csv"), report.raw_csv()?)?;
    write_tables(&dir, &report, TableStyle::Table1)?;
    Ok(json!({ "report": display(&dir.join("report.json")), "method": kind, "cells": cfg.dissent.lambdas.len() * cfg.seeds.len() }))
}

fn target_positions(cfg: &ExperimentConfig, ds: &Dataset<f64>) -> Result<Vec<usize>> {
    if cfg.local.targets.is_empty() {
        return Ok(ds.indices_of(Split::Test).into_iter().filter(|&i| !ds.row(i).is_empty()).take(cfg.local.n_targets).collect());
    }
    cfg.local
        .targets
        .iter()
        .map(|id| ds.position(id).ok_or_else(|| CliError::Core(dissent_core::Error::UnknownExample(id.clone()))))
        .collect()
}

pub fn cmd_dissent_local(cfg: &ExperimentConfig, dataset: &Path, reference: &Path) -> Result<Value> {
    let ds = Dataset::load(dataset)?;
    let f = load_model(reference)?;
    let targets = target_positions(cfg, &ds)?;
    let sweep = LocalSweepConfig {
        method: cfg.local.method,
        grid: cfg.local.grid()?,
        seeds: cfg.seeds.clone(),
        train: cfg.local.train_config(),
        max_iter: cfg.local.max_iter,
        explainer: cfg.explainer.clone(),
    };
    let result = local_sweep(&ds, &f, &targets, &sweep)?;
    let report = DissentReport::local(result.method, result.records)?;
    let dir = cfg.output_dir.join(format!("local_{}", cfg.local.method.name()));
    write(&dir.join("report.json"), report.to_json())?;
    write(&dir.join("records.csv"), report.raw_csv()?)?;
    write_tables(&dir, &report, TableStyle::Table3)?;
    Ok(json!({ "report": display(&dir.join("report.json")), "method": cfg.local.method.name(), "targets": targets.len() }))
}

fn positions(ds: &Dataset<f64>, split: SplitChoice) -> Vec<usize> {
    match split {
        SplitChoice::Train => ds.indices_of(Split::Train),
        SplitChoice::Test => ds.indices_of(Split::Test),
        SplitChoice::All => (0..ds.len()).collect(),
    }
}

pub fn cmd_explain(
    cfg: &ExperimentConfig,
    model: &Path,
    dataset: &Path,
    split: SplitChoice,
    limit: Option<usize>,
    name: Option<String>,
    tau: f64,
) -> Result<Value> {
    let ds = Dataset::load(dataset)?;
    let m = load_model(model)?;
    let all = positions(&ds, split);
    let skipped_empty = all.iter().filter(|&&i| ds.row(i).is_empty()).count();
    let picked: Vec<usize> = all.into_iter().filter(|&i| !ds.row(i).is_empty()).take(limit.unwrap_or(usize::MAX)).collect();
    let exps = explain_dataset(&m, &ds, &picked, &cfg.explainer)?;
    let inconsistent = exps.iter().filter(|e| !fidelity_check(e, e.predicted_label, tau).consistent).count();
    let name = name.unwrap_or_else(|| model.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or("model".into()));
    let path = cfg.output_dir.join("explanations").join(format!("{name}.json"));
    write_json(&path, &exps)?;
    let summary = json!({
        "explanations": display(&path),
        "n": exps.len(),
        "skipped_empty": skipped_empty,
        "fidelity": {
            "tau": tau,
            "inconsistent": inconsistent,
            "rate": if exps.is_empty() { Value::Null } else { json!(inconsistent as f64 / exps.len() as f64) },
        },
    });
    write_json(&path.with_extension("summary.json"), &summary)?;
    Ok(summary)
}

fn load_explanations(path: &Path) -> Result<Vec<Explanation<f64>>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[derive(Serialize)]
struct AgreementLine<'a> {
    example_id: &'a str,
    f_label: u8,
    g_label: u8,
    dissenting: bool,
    topk: f64,
    topk_pos: f64,
    topk_neg: f64,
}

pub fn cmd_agree(cfg: &ExperimentConfig, f: &Path, g: &Path) -> Result<Value> {
    let (ef, eg) = (load_explanations(f)?, load_explanations(g)?);
    let all = mean_agreement(&ef, &eg, Scope::All)?;
    let dissent = mean_agreement(&ef, &eg, Scope::DissentOnly)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for (a, b) in ef.iter().zip(&eg) {
        let s: AgreementScores<f64> = topk_agreement(a, b)?;
        w.serialize(AgreementLine {
            example_id: &a.example_id,
            f_label: a.predicted_label,
            g_label: b.predicted_label,
            dissenting: a.predicted_label != b.predicted_label,
            topk: s.topk,
            topk_pos: s.topk_pos,
            topk_neg: s.topk_neg,
        })?;
    }
    let stem = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let base = cfg.output_dir.join("agreement").join(format!("{}_vs_{}", stem(f), stem(g)));
    write(&base.with_extension("csv"), w.into_inner().map_err(|e| e.into_error())?)?;
    let summary = json!({ "agreement": display(&base.with_extension("csv")), "all": all, "dissent_only": dissent });
    write_json(&base.with_extension("json"), &summary)?;
    Ok(summary)
}

pub fn cmd_report(report: &Path, style: TableStyle, format: TableFormat, output: Option<&Path>) -> Result<Value> {
    let r = DissentReport::from_json(&fs::read_to_string(report)?)?;
    let text = build_table(&r, style)?.render(format)?;
    match output {
        Some(p) => {
            write(p, &text)?;
            Ok(json!({ "table": display(p) }))
        }
        None => Ok(Value::String(text)),
    }
}

pub fn cmd_gradcheck(cfg: &ExperimentConfig, models: usize, seed: u64, tolerance: f64) -> Result<Value> {
    let rows = gradcheck_suite(models, seed, 0.5, 10.0)?;
    let worst = rows.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let summary = json!({ "max_rel_error": worst, "tolerance": tolerance, "passed": worst < tolerance, "checks": rows });
    write_json(&cfg.output_dir.join("gradcheck.json"), &summary)?;
    if worst >= tolerance {
        return Err(CliError::Check(format!("gradient check failed: max relative error {worst:e} >= {tolerance:e}")));
    }
    Ok(json!({ "max_rel_error": worst, "tolerance": tolerance, "checks": rows.len(), "passed": true }))
}

/// Display text made of each example's active feature names.
fn feature_texts(ds: &Dataset<f64>) -> HashMap<String, String> {
    (0..ds.len())
        .map(|i| {
            let words: Vec<&str> = ds.row(i).indices().iter().map(|&j| ds.feature_names()[j].as_str()).collect();
            (ds.ids()[i].clone(), words.join(" "))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_bundle(
    cfg: &ExperimentConfig,
    f: &Path,
    g: &Path,
    dataset: &Path,
    texts: Option<&Path>,
    ids: &[String],
    opts: &BundleOptions,
    output: &Path,
) -> Result<Value> {
    let ds = Dataset::load(dataset)?;
    let texts: HashMap<String, String> = match texts {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
        None => feature_texts(&ds),
    };
    let (mf, mg) = (load_model(f)?, load_model(g)?);
    let bundle = build_bundle(&ds, &texts, &mf, &mg, &cfg.explainer, ids, opts)?;
    write(output, bundle.to_json())?;
    let dissenting = bundle.instances.iter().filter(|i| i.is_dissenting()).count();
    Ok(json!({ "bundle": display(output), "instances": bundle.len(), "dissenting": dissenting }))
}

pub fn cmd_serve(bundle: &Path, log: &Path, addr: SocketAddr, static_dir: Option<PathBuf>) -> Result<Value> {
    let bundle = StudyBundle::load(bundle)?;
    if let Some(dir) = log.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let store = SessionStore::open(log, bundle.len())?;
    let state = AppState::new(bundle, store);
    let runtime = tokio::runtime::Runtime::new()?;
    eprintln!("{}", json!({ "listening": addr.to_string(), "log": display(log) }));
    runtime.block_on(dissent_study::serve(addr, state, static_dir))?;
    Ok(json!({ "stopped": addr.to_string() }))
}

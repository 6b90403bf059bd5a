//! Experiment configuration: one versioned JSON schema, with `--set`
//! overrides applied to the raw JSON before it is typed.

use std::path::{Path, PathBuf};

use dissent_core::data::{SyntheticFamily, SyntheticSpec};
use dissent_core::explain::ExplainerConfig;
use dissent_core::local::{LocalMethod, DEFAULT_RETRAIN_MAX_ITER, DEFAULT_RETRAIN_STEP};
use dissent_core::models::TrainConfig;
use dissent_core::objectives::DissentKind;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

pub const CONFIG_SCHEMA_VERSION: u64 = 1;

/// Overrides the seed list with a single seed.
pub const SEED_ENV: &str = "DISSENT_KIT_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    /// A dataset JSON written by `ingest`.
    Dataset { path: PathBuf },
    /// CSV with `text` and `label` columns and an optional `id` column.
    TextCsv {
        path: PathBuf,
        #[serde(default)]
        stop_words: StopWordChoice,
    },
    /// Directory with `0/` and `1/` subdirectories of documents.
    TextDir {
        path: PathBuf,
        #[serde(default)]
        stop_words: StopWordChoice,
    },
    Tabular {
        path: PathBuf,
        label_column: String,
        #[serde(default)]
        categorical_columns: Vec<String>,
        #[serde(default)]
        positive_label: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopWordChoice {
    #[default]
    English,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { test_fraction: 0.5, seed: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    pub model: ModelKind,
    /// Defaults to the linear or MLP preset of `model`.
    pub train: Option<TrainConfig>,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { model: ModelKind::Linear, train: None }
    }
}

impl ReferenceConfig {
    pub fn train_config(&self) -> TrainConfig {
        self.train.clone().unwrap_or_else(|| match self.model {
            ModelKind::Linear => TrainConfig::linear(),
            ModelKind::Mlp => TrainConfig::mlp(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DissentConfig {
    pub kind: DissentKind,
    pub lambdas: Vec<f64>,
    /// Defaults to the MLP preset with batch 20, 40 epochs and learning rate
    /// 0.03 for REG, batch 100 and 60 epochs for WEIGHTS. The seed is
    /// replaced by each sweep seed.
    pub train: Option<TrainConfig>,
}

impl Default for DissentConfig {
    fn default() -> Self {
        Self { kind: DissentKind::Reg, lambdas: vec![0.0, 0.1, 0.25, 0.5], train: None }
    }
}

impl DissentConfig {
    pub fn train_config(&self) -> TrainConfig {
        self.train.clone().unwrap_or_else(|| match self.kind {
            DissentKind::Reg => TrainConfig { batch_size: 20, epochs: 40, learning_rate: 0.03, ..TrainConfig::mlp() },
            DissentKind::Weights => TrainConfig { batch_size: 100, epochs: 60, ..TrainConfig::mlp() },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalConfig {
    pub method: LocalMethod,
    /// Subset sizes for shrinkage, step sizes for retraining. Retraining
    /// defaults to the single default step size.
    pub grid: Vec<f64>,
    /// Explicit target ids; otherwise the first `n_targets` test examples.
    pub targets: Vec<String>,
    pub n_targets: usize,
    pub max_iter: usize,
    pub train: Option<TrainConfig>,
}

impl Default for LocalConfig {
    fn default() -> Self {
        Self {
            method: LocalMethod::ShrinkSvm,
            grid: Vec::new(),
            targets: Vec::new(),
            n_targets: 20,
            max_iter: DEFAULT_RETRAIN_MAX_ITER,
            train: None,
        }
    }
}

impl LocalConfig {
    pub fn train_config(&self) -> TrainConfig {
        self.train.clone().unwrap_or_else(|| match self.method {
            LocalMethod::ShrinkSvm => TrainConfig::linear(),
            LocalMethod::RetrainMlp => TrainConfig::mlp(),
        })
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        match (self.method, self.grid.is_empty()) {
            (LocalMethod::RetrainMlp, true) => Ok(vec![DEFAULT_RETRAIN_STEP]),
            (LocalMethod::ShrinkSvm, true) => Err(CliError::Config("local.grid needs subset sizes".into())),
            _ => Ok(self.grid.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgreementConfig {
    /// Test examples explained per model in a global sweep.
    pub n_instances: usize,
}

impl Default for AgreementConfig {
    fn default() -> Self {
        Self { n_instances: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u64,
    pub dataset: DatasetSource,
    pub split: SplitConfig,
    pub reference: ReferenceConfig,
    pub dissent: DissentConfig,
    pub local: LocalConfig,
    pub explainer: ExplainerConfig,
    pub agreement: AgreementConfig,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            dataset: DatasetSource::Synthetic(SyntheticSpec {
                family: SyntheticFamily::SparseBow,
                n_examples: 1000,
                n_features: 1000,
                class_separation: 1.0,
                noise_rate: 0.1,
                seed: 100,
                doc_length: 60,
            }),
            split: SplitConfig::default(),
            reference: ReferenceConfig::default(),
            dissent: DissentConfig::default(),
            local: LocalConfig::default(),
            explainer: ExplainerConfig { n_samples: 300, ..ExplainerConfig::default() },
            agreement: AgreementConfig::default(),
            seeds: (1..=5).collect(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(CliError::Config(format!("unsupported schema_version {}", self.schema_version)));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Config("seeds must not be empty".into()));
        }
        let lambdas = &self.dissent.lambdas;
        if lambdas.is_empty() {
            return Err(CliError::Config("dissent.lambdas must not be empty".into()));
        }
        if lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(CliError::Config("dissent.lambdas must be finite and non-negative".into()));
        }
        if lambdas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Config("dissent.lambdas must be strictly ascending".into()));
        }
        if self.local.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Config("local.grid must be strictly ascending".into()));
        }
        if let DatasetSource::Synthetic(spec) = &self.dataset {
            spec.validate()?;
        }
        self.reference.train_config().validate()?;
        self.dissent.train_config().validate()?;
        self.local.train_config().validate()?;
        self.explainer.validate()?;
        Ok(())
    }

    /// Reads `path` (defaults when `None`), applies `key=value` overrides
    /// and the seed environment variable, then validates.
    pub fn load(path: Option<&Path>, overrides: &[String], env_seed: Option<&str>) -> Result<Self> {
        let mut raw = match path {
            Some(p) => {
                if !p.exists() {
                    return Err(CliError::MissingFile(p.to_path_buf()));
                }
                let text = std::fs::read_to_string(p)?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => serde_json::to_value(Self::default())?,
        };
        for o in overrides {
            apply_override(&mut raw, o)?;
        }
        let mut cfg: Self = serde_json::from_value(raw).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(s) = env_seed {
            let seed = s.trim().parse().map_err(|_| CliError::Config(format!("{SEED_ENV}={s} is not an integer")))?;
            cfg.seeds = vec![seed];
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Sets a dotted path such as `dissent.train.epochs=5`. The value is parsed
/// as JSON, falling back to a plain string. Missing objects along the path
/// are created.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("override key `{key}` is malformed")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("`{}` is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("key has at least one part")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back: ExperimentConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = ExperimentConfig::load(
            None,
            &["dissent.kind=weights".into(), "dissent.lambdas=[0,10]".into(), "dissent.train.epochs=3".into()],
            None,
        )
        .unwrap();
        assert_eq!(cfg.dissent.kind, DissentKind::Weights);
        assert_eq!(cfg.dissent.lambdas, vec![0.0, 10.0]);
        assert_eq!(cfg.dissent.train_config().epochs, 3);
        assert_eq!(cfg.dissent.train_config().batch_size, TrainConfig::mlp().batch_size);
    }

    #[test]
    fn env_seed_replaces_seeds() {
        let cfg = ExperimentConfig::load(None, &[], Some("42")).unwrap();
        assert_eq!(cfg.seeds, vec![42]);
        assert!(ExperimentConfig::load(None, &[], Some("x")).is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for o in ["seeds=[]", "dissent.lambdas=[0.5,0.1]", "dissent.lambdas=[]", "nonsense=1", "schema_version=2"] {
            assert!(matches!(ExperimentConfig::load(None, &[o.into()], None), Err(CliError::Config(_))), "{o}");
        }
        assert!(ExperimentConfig::load(None, &["novalue".into()], None).is_err());
        assert!(ExperimentConfig::load(None, &["seeds.x=1".into()], None).is_err());
    }

    #[test]
    fn dataset_sources_parse() {
        let v: DatasetSource = serde_json::from_str(r#"{"source":"text_csv","path":"r.csv"}"#).unwrap();
        assert_eq!(v, DatasetSource::TextCsv { path: "r.csv".into(), stop_words: StopWordChoice::English });
        let s: DatasetSource = serde_json::from_str(
            r#"{"source":"synthetic","family":"gaussian_blobs","n_examples":10,"n_features":2,"class_separation":1,"noise_rate":0,"seed":1}"#,
        )
        .unwrap();
        assert!(matches!(s, DatasetSource::Synthetic(_)));
    }
}

//! The fixed list of instances shown to every participant.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use dissent_core::data::{Dataset, Split};
use dissent_core::explain::{explain_instance, ExplainerConfig};
use dissent_core::models::Classifier;
use dissent_core::Explanation;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StudyError};

pub const BUNDLE_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyInstance {
    pub example_id: String,
    pub display_text: String,
    pub true_label: u8,
    pub f_prediction: u8,
    pub f_explanation: Explanation,
    pub g_prediction: u8,
    pub g_explanation: Explanation,
    /// Attention checks: `true_label` is the instructed answer and the item
    /// is left out of every metric.
    #[serde(default)]
    pub attention: bool,
}

impl StudyInstance {
    pub fn is_dissenting(&self) -> bool {
        self.f_prediction != self.g_prediction
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyBundle {
    pub schema_version: u64,
    /// Opaque operator text shown before the first item.
    #[serde(default)]
    pub instructions: String,
    /// Display names of labels 0 and 1.
    pub label_names: [String; 2],
    /// Term of every feature some explanation refers to.
    pub terms: BTreeMap<usize, String>,
    pub instances: Vec<StudyInstance>,
}

impl StudyBundle {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != BUNDLE_SCHEMA_VERSION {
            return Err(StudyError::Bundle(format!("unsupported schema_version {}", self.schema_version)));
        }
        if self.instances.is_empty() {
            return Err(StudyError::Bundle("no instances".into()));
        }
        for inst in &self.instances {
            let labels = [inst.true_label, inst.f_prediction, inst.g_prediction];
            if labels.iter().any(|&l| l > 1) {
                return Err(StudyError::Bundle(format!("{}: labels must be 0 or 1", inst.example_id)));
            }
            if inst.attention {
                continue;
            }
            for e in [&inst.f_explanation, &inst.g_explanation] {
                if e.example_id != inst.example_id {
                    return Err(StudyError::Bundle(format!("{}: explanation for {}", inst.example_id, e.example_id)));
                }
                if let Some((i, _)) = e.attributions.iter().find(|(i, _)| !self.terms.contains_key(i)) {
                    return Err(StudyError::Bundle(format!("{}: feature {i} has no term", inst.example_id)));
                }
            }
        }
        Ok(())
    }

    /// Whether every scored instance has contradicting predictions, as the
    /// `C2` condition requires.
    pub fn all_dissenting(&self) -> bool {
        self.instances.iter().all(|i| i.attention || i.is_dissenting())
    }

    /// Inserts an attention check at `position`. Both predictions are set to
    /// the instructed label and the explanations are empty.
    pub fn insert_attention_check(&mut self, position: usize, id: &str, text: &str, instructed: u8) -> Result<()> {
        if instructed > 1 {
            return Err(StudyError::Invalid(format!("label {instructed} is not 0 or 1")));
        }
        if position > self.instances.len() {
            return Err(StudyError::Invalid(format!("position {position} past the end")));
        }
        let empty = Explanation {
            example_id: id.to_string(),
            model_fingerprint: String::new(),
            predicted_label: instructed,
            k: 0,
            intercept: 0.0,
            attributions: Vec::new(),
        };
        self.instances.insert(
            position,
            StudyInstance {
                example_id: id.to_string(),
                display_text: text.to_string(),
                true_label: instructed,
                f_prediction: instructed,
                f_explanation: empty.clone(),
                g_prediction: instructed,
                g_explanation: empty,
                attention: true,
            },
        );
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let b: Self = serde_json::from_str(s)?;
        b.validate()?;
        Ok(b)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BundleOptions {
    /// Keep only instances where the two models disagree.
    pub require_dissent: bool,
    /// Pick this many dissenting instances, half where the reference is
    /// right and half where it is wrong, in candidate order.
    pub balanced: Option<usize>,
    pub instructions: String,
    pub label_names: [String; 2],
}

impl Default for BundleOptions {
    fn default() -> Self {
        Self {
            require_dissent: false,
            balanced: None,
            instructions: String::new(),
            label_names: ["deceptive".into(), "real".into()],
        }
    }
}

/// Predicts and explains `instance_ids` (the whole test split when empty)
/// with both models. `texts` maps example ids to display text.
pub fn build_bundle(
    ds: &dissent_core::Dataset,
    texts: &HashMap<String, String>,
    f: &dyn Classifier<f64>,
    g: &dyn Classifier<f64>,
    explainer: &ExplainerConfig,
    instance_ids: &[String],
    opts: &BundleOptions,
) -> Result<StudyBundle> {
    let positions = candidates(ds, instance_ids)?;
    let mut scored = Vec::with_capacity(positions.len());
    for i in positions {
        let x = ds.row(i);
        let (fp, gp) = (f.predict(x)?.label, g.predict(x)?.label);
        if (opts.require_dissent || opts.balanced.is_some()) && fp == gp {
            continue;
        }
        scored.push((i, fp, gp));
    }
    if let Some(n) = opts.balanced {
        scored = balance(ds, scored, n)?;
    }
    if scored.is_empty() {
        return Err(StudyError::Bundle("no instance satisfies the selection".into()));
    }

    let mut terms = BTreeMap::new();
    let mut instances = Vec::with_capacity(scored.len());
    for (i, fp, gp) in scored {
        let id = &ds.ids()[i];
        let text = texts.get(id).ok_or_else(|| dissent_core::Error::UnknownExample(id.clone()))?;
        let cfg = ExplainerConfig { seed: explainer.seed ^ i as u64, ..explainer.clone() };
        let ef = explain_instance(f, ds.row(i), id, &cfg)?;
        let eg = explain_instance(g, ds.row(i), id, &cfg)?;
        for (j, _) in ef.attributions.iter().chain(&eg.attributions) {
            terms.entry(*j).or_insert_with(|| ds.feature_names()[*j].clone());
        }
        instances.push(StudyInstance {
            example_id: id.clone(),
            display_text: text.clone(),
            true_label: ds.labels()[i],
            f_prediction: fp,
            f_explanation: ef,
            g_prediction: gp,
            g_explanation: eg,
            attention: false,
        });
    }
    let bundle = StudyBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        instructions: opts.instructions.clone(),
        label_names: opts.label_names.clone(),
        terms,
        instances,
    };
    bundle.validate()?;
    Ok(bundle)
}

fn candidates(ds: &Dataset<f64>, ids: &[String]) -> Result<Vec<usize>> {
    if ids.is_empty() {
        return Ok(ds.indices_of(Split::Test));
    }
    ids.iter()
        .map(|id| {
            let i = ds.position(id).ok_or_else(|| dissent_core::Error::UnknownExample(id.clone()))?;
            if ds.splits()[i] != Some(Split::Test) {
                return Err(StudyError::Bundle(format!("{id} is not in the test split")));
            }
            Ok(i)
        })
        .collect()
}

fn balance(ds: &Dataset<f64>, scored: Vec<(usize, u8, u8)>, n: usize) -> Result<Vec<(usize, u8, u8)>> {
    if n == 0 || n % 2 == 1 {
        return Err(StudyError::Bundle(format!("balanced selection needs an even positive count, got {n}")));
    }
    let (right, wrong): (Vec<_>, Vec<_>) = scored.into_iter().partition(|&(i, fp, _)| fp == ds.labels()[i]);
    if right.len() < n / 2 || wrong.len() < n / 2 {
        return Err(StudyError::Bundle(format!(
            "cannot balance {n}: {} reference-correct and {} reference-wrong dissenting instances",
            right.len(),
            wrong.len()
        )));
    }
    let mut picked: Vec<_> = right.into_iter().take(n / 2).chain(wrong.into_iter().take(n / 2)).collect();
    picked.sort_by_key(|&(i, _, _)| i);
    Ok(picked)
}

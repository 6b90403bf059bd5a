//! What a participant sees for one item under one condition.

use std::fmt;
use std::str::FromStr;

use dissent_core::data::token_spans;
use dissent_core::explain::split_evidence;
use dissent_core::Explanation;
use serde::{Deserialize, Serialize};

use crate::bundle::StudyBundle;
use crate::error::{Result, StudyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    C0,
    C1,
    C2,
    C3,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Condition {
    type Err = StudyError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "C0" => Ok(Condition::C0),
            "C1" => Ok(Condition::C1),
            "C2" => Ok(Condition::C2),
            "C3" => Ok(Condition::C3),
            other => Err(StudyError::Invalid(format!("unknown condition `{other}`"))),
        }
    }
}

/// `Pos` is evidence for label 1 (orange), `Neg` for label 0 (blue).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Pos,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    F,
    G,
}

/// A highlighted token. Offsets count UTF-16 code units of `display_text`,
/// matching JavaScript string indexing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HighlightSpan {
    pub start: usize,
    pub end: usize,
    pub polarity: Polarity,
    pub source: Source,
    pub term: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionPayload {
    pub n: usize,
    pub total: usize,
    pub condition: Condition,
    pub display_text: String,
    pub model_statement: String,
    pub spans: Vec<HighlightSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_statement: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_spans: Option<Vec<HighlightSpan>>,
}

fn prediction_sentence(bundle: &StudyBundle, label: u8) -> String {
    format!("The model predicts that this review is {}.", bundle.label_names[label as usize])
}

/// Every occurrence in `text` of each selected feature's term.
fn spans(bundle: &StudyBundle, text: &str, picked: &[(usize, Polarity)], source: Source) -> Vec<HighlightSpan> {
    let tokens = token_spans(text);
    let mut out = Vec::new();
    for &(feature, polarity) in picked {
        let Some(term) = bundle.terms.get(&feature) else { continue };
        for t in tokens.iter().filter(|t| &t.token == term) {
            out.push(HighlightSpan {
                start: utf16_offset(text, t.start),
                end: utf16_offset(text, t.end),
                polarity,
                source,
                term: term.clone(),
            });
        }
    }
    out.sort_by_key(|s| (s.start, s.end));
    out
}

fn utf16_offset(text: &str, byte: usize) -> usize {
    text[..byte].encode_utf16().count()
}

/// The evidence side supporting `label`.
fn supporting(exp: &Explanation, label: u8) -> Vec<(usize, Polarity)> {
    let (pos, neg) = split_evidence(exp);
    if label == 1 {
        pos.iter().map(|&(i, _)| (i, Polarity::Pos)).collect()
    } else {
        neg.iter().map(|&(i, _)| (i, Polarity::Neg)).collect()
    }
}

pub fn payload_for(bundle: &StudyBundle, n: usize, condition: Condition) -> Result<ConditionPayload> {
    let inst = bundle.instances.get(n).ok_or(StudyError::UnknownItem { n, total: bundle.len() })?;
    let text = &inst.display_text;
    let mut payload = ConditionPayload {
        n,
        total: bundle.len(),
        condition,
        display_text: text.clone(),
        model_statement: prediction_sentence(bundle, inst.f_prediction),
        spans: Vec::new(),
        second_statement: None,
        second_spans: None,
    };
    if inst.attention {
        return Ok(payload);
    }
    match condition {
        Condition::C0 => {}
        Condition::C1 => {
            payload.spans = spans(bundle, text, &supporting(&inst.f_explanation, inst.f_prediction), Source::F);
        }
        Condition::C2 => {
            if !inst.is_dissenting() {
                return Err(StudyError::Invalid(format!(
                    "item {n} is not a dissenting instance; condition C2 needs contradicting predictions"
                )));
            }
            payload.spans = spans(bundle, text, &supporting(&inst.f_explanation, inst.f_prediction), Source::F);
            payload.second_statement = Some(format!(
                "Another model predicts that this review is {}.",
                bundle.label_names[inst.g_prediction as usize]
            ));
            payload.second_spans =
                Some(spans(bundle, text, &supporting(&inst.g_explanation, inst.g_prediction), Source::G));
        }
        Condition::C3 => {
            payload.model_statement = format!(
                "{} It thinks the words in orange are evidence the review is {}, while the words in blue are evidence it is {}.",
                payload.model_statement, bundle.label_names[1], bundle.label_names[0]
            );
            let mut both = supporting(&inst.f_explanation, 1);
            both.extend(supporting(&inst.f_explanation, 0));
            payload.spans = spans(bundle, text, &both, Source::F);
        }
    }
    Ok(payload)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{StudyInstance, BUNDLE_SCHEMA_VERSION};

    fn exp(label: u8, attributions: Vec<(usize, f64)>) -> Explanation {
        Explanation {
            example_id: "r1".into(),
            model_fingerprint: "m".into(),
            predicted_label: label,
            k: 15,
            intercept: 0.0,
            attributions,
        }
    }

    fn bundle(fp: u8, gp: u8) -> StudyBundle {
        StudyBundle {
            schema_version: BUNDLE_SCHEMA_VERSION,
            instructions: String::new(),
            label_names: ["deceptive".into(), "real".into()],
            terms: [(0, "great".into()), (1, "hotel".into()), (2, "my".into()), (3, "café".into())].into(),
            instances: vec![StudyInstance {
                example_id: "r1".into(),
                display_text: "Great café, great hotel. My stay!".into(),
                true_label: 1,
                f_prediction: fp,
                f_explanation: exp(fp, vec![(0, 0.5), (2, -0.4), (1, 0.1)]),
                g_prediction: gp,
                g_explanation: exp(gp, vec![(2, -0.6), (3, -0.2), (0, 0.1)]),
                attention: false,
            }],
        }
    }

    #[test]
    fn c0_has_no_spans() {
        let p = payload_for(&bundle(1, 0), 0, Condition::C0).unwrap();
        assert!(p.spans.is_empty() && p.second_statement.is_none());
        assert_eq!(p.model_statement, "The model predicts that this review is real.");
    }

    #[test]
    fn c1_shows_the_supporting_side() {
        let p = payload_for(&bundle(1, 0), 0, Condition::C1).unwrap();
        assert!(p.spans.iter().all(|s| s.polarity == Polarity::Pos && s.source == Source::F));
        let terms: Vec<&str> = p.spans.iter().map(|s| s.term.as_str()).collect();
        assert_eq!(terms, ["great", "great", "hotel"]);
        let neg = payload_for(&bundle(0, 1), 0, Condition::C1).unwrap();
        assert!(neg.spans.iter().all(|s| s.polarity == Polarity::Neg && s.source == Source::F));
        assert_eq!(neg.spans.len(), 1);
    }

    #[test]
    fn c2_adds_the_dissenting_model() {
        let p = payload_for(&bundle(1, 0), 0, Condition::C2).unwrap();
        assert_eq!(p.second_statement.as_deref(), Some("Another model predicts that this review is deceptive."));
        let second = p.second_spans.unwrap();
        assert!(second.iter().all(|s| s.polarity == Polarity::Neg && s.source == Source::G));
        assert_eq!(second.len(), 2);
        assert!(payload_for(&bundle(1, 1), 0, Condition::C2).is_err());
    }

    #[test]
    fn c3_shows_both_sides_of_f() {
        let p = payload_for(&bundle(1, 0), 0, Condition::C3).unwrap();
        assert_eq!(
            p.model_statement,
            "The model predicts that this review is real. It thinks the words in orange are evidence the review is real, while the words in blue are evidence it is deceptive."
        );
        assert!(p.spans.iter().all(|s| s.source == Source::F));
        assert!(p.spans.iter().any(|s| s.polarity == Polarity::Pos));
        assert!(p.spans.iter().any(|s| s.polarity == Polarity::Neg));
    }

    #[test]
    fn offsets_are_utf16() {
        let b = bundle(1, 0);
        let p = payload_for(&b, 0, Condition::C2).unwrap();
        let second = p.second_spans.unwrap();
        let cafe = second.iter().find(|s| s.term == "café").unwrap();
        let units: Vec<u16> = b.instances[0].display_text.encode_utf16().collect();
        assert_eq!(String::from_utf16(&units[cafe.start..cafe.end]).unwrap(), "café");
        let my = second.iter().find(|s| s.term == "my").unwrap();
        assert_eq!(String::from_utf16(&units[my.start..my.end]).unwrap(), "My");
    }

    #[test]
    fn payload_is_pure() {
        let b = bundle(1, 0);
        for c in [Condition::C0, Condition::C1, Condition::C2, Condition::C3] {
            assert_eq!(payload_for(&b, 0, c).unwrap(), payload_for(&b, 0, c).unwrap());
        }
        assert!(matches!(payload_for(&b, 1, Condition::C0), Err(StudyError::UnknownItem { .. })));
    }
}

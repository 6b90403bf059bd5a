//! Sessions, the answer log and per-participant results.
//!
//! The log is append-only JSON lines. A session is opened with
//! `{"session", "condition", "ts"}` and each answer is one
//! `{"session", "n", "label", "ts"}` line, written and flushed before the
//! answer is acknowledged.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use dissent_core::metrics::{accuracy, cohens_kappa, overreliance};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::bundle::StudyBundle;
use crate::error::{Result, StudyError};
use crate::payload::Condition;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub label: u8,
    pub ts: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub id: String,
    pub condition: Condition,
    pub answers: Vec<Option<Answer>>,
}

impl Session {
    pub fn answered(&self) -> usize {
        self.answers.iter().filter(|a| a.is_some()).count()
    }

    pub fn completed(&self) -> bool {
        self.answers.iter().all(Option::is_some)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum LogLine {
    Answer { session: String, n: usize, label: u8, ts: String },
    Created { session: String, condition: Condition, ts: String },
}

/// Per-participant results over the scored (non-attention) items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResults {
    pub session: String,
    pub condition: Condition,
    pub n_items: usize,
    pub n_scored: usize,
    pub n_model_wrong: usize,
    pub accuracy: f64,
    /// `None` when the reference makes no mistake on the scored items.
    pub overreliance: Option<f64>,
    /// Agreement between the participant and the reference.
    pub kappa: f64,
}

/// Computes results for answers `h` aligned with the bundle's instances.
pub fn compute_results(bundle: &StudyBundle, session: &str, condition: Condition, h: &[u8]) -> Result<StudyResults> {
    let scored: Vec<usize> = (0..bundle.len()).filter(|&i| !bundle.instances[i].attention).collect();
    if scored.is_empty() {
        return Err(StudyError::Bundle("every item is an attention check".into()));
    }
    let pick = |f: &dyn Fn(usize) -> u8| scored.iter().map(|&i| f(i)).collect::<Vec<u8>>();
    let hs = pick(&|i| h[i]);
    let ys = pick(&|i| bundle.instances[i].true_label);
    let fs = pick(&|i| bundle.instances[i].f_prediction);
    let n_model_wrong = fs.iter().zip(&ys).filter(|(f, y)| f != y).count();
    Ok(StudyResults {
        session: session.to_string(),
        condition,
        n_items: bundle.len(),
        n_scored: scored.len(),
        n_model_wrong,
        accuracy: accuracy(&hs, &ys)?,
        overreliance: if n_model_wrong == 0 { None } else { Some(overreliance(&hs, &fs, &ys)?) },
        kappa: cohens_kappa(&hs, &fs)?,
    })
}

/// All sessions of one service instance, backed by the log file.
#[derive(Debug)]
pub struct SessionStore {
    n_items: usize,
    sessions: HashMap<String, Session>,
    log: File,
    path: PathBuf,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl SessionStore {
    /// Opens `path` for appending, first replaying any sessions it holds.
    pub fn open(path: impl AsRef<Path>, n_items: usize) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let sessions = if path.exists() { replay(&path, n_items)? } else { HashMap::new() };
        let log = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { n_items, sessions, log, path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, id: &str) -> Result<&Session> {
        self.sessions.get(id).ok_or_else(|| StudyError::UnknownSession(id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    fn append(&mut self, line: &LogLine) -> Result<()> {
        let mut s = serde_json::to_string(line)?;
        s.push('\n');
        self.log.write_all(s.as_bytes())?;
        self.log.flush()?;
        self.log.sync_data()?;
        Ok(())
    }

    pub fn create(&mut self, condition: Condition) -> Result<String> {
        let id = Uuid::new_v4().to_string();
        self.append(&LogLine::Created { session: id.clone(), condition, ts: now() })?;
        let answers = vec![None; self.n_items];
        self.sessions.insert(id.clone(), Session { id: id.clone(), condition, answers });
        Ok(id)
    }

    /// Records an answer once it is on disk.
    pub fn answer(&mut self, id: &str, n: usize, label: u8) -> Result<&Session> {
        let total = self.n_items;
        let session = self.get(id)?;
        if n >= total {
            return Err(StudyError::UnknownItem { n, total });
        }
        if label > 1 {
            return Err(StudyError::Invalid(format!("label {label} is not 0 or 1")));
        }
        if session.answers[n].is_some() {
            return Err(StudyError::DuplicateAnswer(n));
        }
        let ts = now();
        self.append(&LogLine::Answer { session: id.to_string(), n, label, ts: ts.clone() })?;
        let session = self.sessions.get_mut(id).expect("checked above");
        session.answers[n] = Some(Answer { label, ts });
        Ok(session)
    }

    pub fn results(&self, bundle: &StudyBundle, id: &str) -> Result<StudyResults> {
        let s = self.get(id)?;
        if !s.completed() {
            return Err(StudyError::Incomplete { answered: s.answered(), total: s.answers.len() });
        }
        let h: Vec<u8> = s.answers.iter().map(|a| a.as_ref().expect("completed").label).collect();
        compute_results(bundle, id, s.condition, &h)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &Session> {
        self.sessions.values()
    }
}

/// Rebuilds sessions from a log.
pub fn replay(path: &Path, n_items: usize) -> Result<HashMap<String, Session>> {
    let mut sessions: HashMap<String, Session> = HashMap::new();
    let reader = BufReader::new(File::open(path)?);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |reason: String| StudyError::CorruptLog { line: i + 1, reason };
        let parsed: LogLine = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        match parsed {
            LogLine::Created { session, condition, .. } => {
                if sessions.contains_key(&session) {
                    return Err(corrupt(format!("session {session} created twice")));
                }
                let answers = vec![None; n_items];
                sessions.insert(session.clone(), Session { id: session, condition, answers });
            }
            LogLine::Answer { session, n, label, ts } => {
                let s = sessions.get_mut(&session).ok_or_else(|| corrupt(format!("unknown session {session}")))?;
                if n >= n_items || label > 1 {
                    return Err(corrupt(format!("answer ({n}, {label}) out of range")));
                }
                if s.answers[n].is_some() {
                    return Err(corrupt(format!("item {n} answered twice")));
                }
                s.answers[n] = Some(Answer { label, ts });
            }
        }
    }
    Ok(sessions)
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session has no item {n} (items are 0..{total})")]
    UnknownItem { n: usize, total: usize },
    #[error("item {0} already answered")]
    DuplicateAnswer(usize),
    #[error("{0}")]
    Invalid(String),
    #[error("session incomplete: {answered} of {total} items answered")]
    Incomplete { answered: usize, total: usize },
    #[error("bundle: {0}")]
    Bundle(String),
    #[error("log line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error(transparent)]
    Core(#[from] dissent_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = StudyError> = std::result::Result<T, E>;

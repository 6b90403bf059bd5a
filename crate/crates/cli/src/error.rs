use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{0}")]
    Check(String),
    #[error("empty report")]
    EmptyReport,
    #[error(transparent)]
    Core(#[from] dissent_core::Error),
    #[error(transparent)]
    Study(#[from] dissent_study::StudyError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::MissingFile(_) => "missing_file",
            CliError::Check(_) => "check_failed",
            CliError::EmptyReport => "empty_report",
            CliError::Core(dissent_core::Error::Diverged { .. }) => "diverged",
            CliError::Core(_) => "core",
            CliError::Study(_) => "study",
            CliError::Io(_) => "io",
            CliError::Json(_) => "json",
            CliError::Csv(_) => "csv",
        }
    }

    /// The error as one line of JSON.
    pub fn to_json_line(&self) -> String {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        if let CliError::Core(dissent_core::Error::Diverged { epoch }) = self {
            v["epoch"] = json!(epoch);
        }
        v.to_string()
    }
}

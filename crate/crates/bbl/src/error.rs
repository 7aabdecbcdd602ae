use std::io;
use std::path::PathBuf;

use bbl_core::Status;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("{0}")]
    Core(#[from] bbl_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("sampling refused: posterior is {}; failed condition: {condition}", status_word(*.status))]
    Refused { status: Status, condition: String },
    #[error("report serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn status_word(status: Status) -> &'static str {
    match status {
        Status::Proper => "proper",
        Status::Improper => "improper",
        Status::Unknown => "unknown",
    }
}

impl CliError {
    /// Process exit code: 2 for an improper refusal, 3 for unknown, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Refused { status: Status::Improper, .. } => 2,
            CliError::Refused { status: Status::Unknown, .. } => 3,
            _ => 1,
        }
    }
}

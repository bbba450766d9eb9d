//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's preconditions (unknown id,
    /// length mismatch, empty candidate set, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value is out of range or inconsistent.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// The text-model backend failed after the given number of attempts.
    #[error("backend failure after {attempts} attempt(s): {message}")]
    Backend { attempts: u32, message: String },

    /// The backend returned something the caller cannot use at all
    /// (e.g. an empty completion where text is required).
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),

    /// No exercise is available for a knowledge concept.
    #[error("no exercise available for concept {concept}")]
    NoExercise { concept: usize },

    /// A records/config file could not be ingested.
    #[error("ingestion error: {0}")]
    Ingest(String),

    /// Training produced a non-finite loss; the message carries a
    /// diagnostic snapshot.
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("emit error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid_input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn invalid_config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    /// Process exit code for the CLI: 1 usage, 2 data, 3 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::InvalidConfig(_) => 1,
            Error::Ingest(_) | Error::MalformedResponse(_) | Error::Json(_) => 2,
            Error::Backend { .. }
            | Error::NoExercise { .. }
            | Error::NumericalDegeneracy(_)
            | Error::Io(_) => 3,
        }
    }
}

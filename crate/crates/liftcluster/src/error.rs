//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by dataset handling, embedding, distances and consensus.
#[derive(Debug, Error)]
pub enum Error {
    /// An input collection that must be non-empty was empty.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Two inputs that must agree on a dimension did not.
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    /// A numeric parameter was outside its admissible range.
    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: String, message: String },

    /// A partition failed validation (row sums, negative weights, empty cluster).
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    /// A computation hit a numerical degeneracy it cannot recover from,
    /// e.g. a cluster vector with norm below the floor.
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    /// A text input could not be parsed. `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Serialization or deserialization failure for cached artifacts.
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid_parameter(name: &str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            message: message.into(),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

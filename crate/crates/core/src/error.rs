//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any part of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("trace format error: {0}")]
    TraceFormat(String),

    #[error("trace version mismatch: expected {expected}, got {got}")]
    TraceVersion { expected: u32, got: u32 },

    #[error("trace record for round {round} is corrupted: {msg}")]
    TraceRecord { round: usize, msg: String },

    #[error("criterion {criterion} is not applicable to model {model}: {reason}")]
    Inapplicable {
        criterion: String,
        model: String,
        reason: String,
    },

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("learner failure: {0}")]
    Learner(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

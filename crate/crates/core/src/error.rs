// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid confidence matrix: {0}")]
    InvalidConfidence(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("dimension mismatch: expected {expected} features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("row mismatch: {what} has {left} rows but {right} were expected")]
    RowMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid hyperparameter `{key}` for {family}: {reason}")]
    InvalidHyperparam {
        family: &'static str,
        key: String,
        reason: String,
    },

    #[error("training failed: {0}")]
    Training(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid transfer: {0}")]
    InvalidTransfer(String),

    #[error("{procedure}: every sample weight is zero")]
    AllZeroWeights { procedure: &'static str },

    #[error("model family mismatch: {0}")]
    FamilyMismatch(String),

    #[error("expected a binary task, found {0} labels")]
    NotBinary(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("infinite divergence: {0}")]
    InfiniteDivergence(String),

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: String,
        message: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid network layout: {0}")]
    InvalidSpec(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("message {message} out of range 1..={max}")]
    MessageOutOfRange { message: usize, max: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("encoder produced an all-zero batch; power normalization is undefined")]
    DegenerateEncoding,

    #[error("zero pilot energy on channel use {channel_use}")]
    ZeroPilotEnergy { channel_use: usize },

    #[error("QPSK requires an even bit count equal to twice the channel uses (k = {k}, n = {n_ch})")]
    QpskShape { k: usize, n_ch: usize },

    #[error("task buffer is empty; meta-training must be skipped")]
    EmptyBuffer,

    #[error("invalid config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("failed to parse config: {0}")]
    ConfigParse(String),

    #[error("efficiency analysis: {0}")]
    Efficiency(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

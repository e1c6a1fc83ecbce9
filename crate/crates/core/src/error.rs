use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("threshold {threshold} never crossed (envelope peak {peak})")]
    ThresholdNotCrossed { threshold: f64, peak: f64 },

    #[error("sensor {sensor}: {source}")]
    Sensor {
        sensor: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("zero variance in column {column}")]
    ZeroVariance { column: usize },

    #[error("standardizer is not fitted")]
    NotFitted,

    #[error("cholesky factorisation failed with jitter up to {max_jitter:e}")]
    Cholesky { max_jitter: f64 },

    #[error("non-finite log marginal likelihood at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("numerical breakdown: {0}")]
    Numerical(String),

    #[error("kernel {kernel}: {source}")]
    Kernel {
        kernel: String,
        #[source]
        source: Box<Error>,
    },

    #[error("dataset is not laid out on a {cols}x{rows} grid: {reason}")]
    NotGrid {
        cols: usize,
        rows: usize,
        reason: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
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

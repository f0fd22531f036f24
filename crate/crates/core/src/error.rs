use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix not symmetric")]
    NotSymmetric,

    #[error("matrix not positive definite")]
    NotPositiveDefinite,

    #[error("Q not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("schema error at `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("insufficient history: need {needed} recorded steps, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("no iterations performed yet")]
    NoIterations,

    #[error("oracle did not converge after {iterations} iterations (relative change {relative_change:e})")]
    OracleNonConvergence {
        iterations: usize,
        relative_change: f64,
    },

    #[error("grid too small: minimizer on the grid boundary")]
    GridTooSmall,

    #[error("unsupported grid dimension {0}")]
    GridDimension(usize),

    #[error("unknown instance `{0}`")]
    UnknownInstance(String),

    #[error("failed to read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}

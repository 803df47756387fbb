use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the model, solvers and experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two measurements cannot both be explained by the channel model.
    #[error("inconsistent measurements: {0}")]
    MeasurementInconsistency(String),

    /// A configuration, scenario or measurement set violates a constraint.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("failed to parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

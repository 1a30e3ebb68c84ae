//! Crate-wide error type.
//!
//! Low-level numeric kernels (layer forward/backward, Adam updates) treat
//! shape mismatches as programmer error and panic via `assert!`. Everything
//! reachable from user input — configuration, data files, training runs —
//! returns [`Error`].

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: bad dimensions, inconsistent options, bad flags.
    #[error("configuration error: {0}")]
    Config(String),

    /// A data file could not be read or parsed. Carries the location of the
    /// offending cell when one exists.
    #[error("data error: {message}{}", location_suffix(*.row, .column.as_deref()))]
    Data {
        message: String,
        row: Option<usize>,
        column: Option<String>,
    },

    /// Training produced a non-finite loss.
    #[error("training diverged at stage {stage}, epoch {epoch}: {detail}")]
    Divergence {
        stage: usize,
        epoch: usize,
        detail: String,
    },

    /// A matrix factorization failed (rank-deficient design, non-SPD covariance).
    #[error("linear algebra error: {0}")]
    LinAlg(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data {
            message: msg.into(),
            row: None,
            column: None,
        }
    }

    pub fn data_at(msg: impl Into<String>, row: usize, column: impl Into<String>) -> Self {
        Error::Data {
            message: msg.into(),
            row: Some(row),
            column: Some(column.into()),
        }
    }
}

fn location_suffix(row: Option<usize>, column: Option<&str>) -> String {
    match (row, column) {
        (Some(r), Some(c)) => format!(" (row {r}, column {c})"),
        (Some(r), None) => format!(" (row {r})"),
        (None, Some(c)) => format!(" (column {c})"),
        (None, None) => String::new(),
    }
}

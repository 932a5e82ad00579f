// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T, E = CmorError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CmorError {
    /// A value outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("address ({iteration},{cell}) out of range for a {m}x{n} array")]
    Address {
        iteration: usize,
        cell: usize,
        m: usize,
        n: usize,
    },

    #[error("dimension mismatch: expected n={expected_n}, m={expected_m}, got n={n}, m={m}")]
    Dimension {
        expected_n: usize,
        expected_m: usize,
        n: usize,
        m: usize,
    },

    /// The request is well formed but too large to enumerate.
    #[error("refused: {0}")]
    Refused(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid value for `{key}`: {message}")]
    InvalidValue { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CmorError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        CmorError::Domain(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        CmorError::Parse {
            line,
            message: msg.into(),
        }
    }
}

// SPDX-License-Identifier: Apache-2.0

use std::io;

use thiserror::Error;

/// Errors raised anywhere in the training stack.
#[derive(Debug, Error)]
pub enum PinnError {
    /// A primitive could not be evaluated (division by zero, log of a
    /// non-positive number, overflow to a non-finite value).
    #[error("evaluation error: {0}")]
    Eval(String),

    /// The caller broke an API contract (wrong dimension, foreign node, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// Argument outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A gradient or loss became NaN/Inf; the step is rejected.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A reference solver could not produce a trustworthy solution.
    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = PinnError> = std::result::Result<T, E>;

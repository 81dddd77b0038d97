//! Error types shared across the toolkit.

use thiserror::Error;

/// Unified error type for all planning, simulation and I/O operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is invalid. `field` names the offending entry.
    #[error("invalid configuration at `{field}`: {message}")]
    Config { field: String, message: String },

    /// A trace or report line failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Inputs are structurally inconsistent with each other.
    #[error("validation error: {0}")]
    Validation(String),

    /// An argument violates an operation's precondition.
    #[error("argument error: {0}")]
    Argument(String),

    /// An exhaustive search was requested on an instance that is too large.
    #[error("instance too large: {0}")]
    TooLarge(String),

    /// A name was not found in a registry.
    #[error("lookup error: no entry named `{0}`")]
    Lookup(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

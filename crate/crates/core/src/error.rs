//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or input failed validation before any computation ran.
    #[error("invalid input: {0}")]
    Validation(String),

    /// A physical constraint stated by the model was violated.
    #[error("constraint violated: {0}")]
    Constraint(String),

    /// Text input could not be parsed; carries the 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// An iterative solver failed to reach its tolerance.
    #[error("no convergence in {context}: {detail}")]
    NoConvergence { context: String, detail: String },

    /// Two grids or datasets that must share axes do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn constraint(msg: impl Into<String>) -> Self {
        Error::Constraint(msg.into())
    }
}

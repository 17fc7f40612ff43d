use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid input `{what}`: {reason}")]
    InvalidInput { what: &'static str, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("iterative solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("expression error at column {column}: {message}")]
    Expr { column: usize, message: String },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LabError {
    pub(crate) fn input(what: &'static str, reason: impl Into<String>) -> Self {
        LabError::InvalidInput {
            what,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;

use thiserror::Error;

/// Errors raised by the integrator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("root finder did not converge: {0}")]
    RootFinding(String),

    #[error("nonlinearity evaluation failed: {0}")]
    Nonlinearity(String),

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("unknown problem kind `{0}`")]
    UnknownProblem(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

use crate::tensor_group::AlgebraShape;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch {
        left: AlgebraShape,
        right: AlgebraShape,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("construction failed after {iterations} iterations (defect {defect:.3e})")]
    ConstructionFailure { iterations: usize, defect: f64 },

    #[error("signature constraint violated: achieved {achieved:.3e}, tolerance {tolerance:.3e}")]
    ConstraintViolation { achieved: f64, tolerance: f64 },

    #[error("internal consistency error: {0}")]
    Inconsistent(String),

    #[error("step size underflow at t = {time} (h = {step:.3e})")]
    Stiffness { time: f64, step: f64 },

    #[error("regression refused: {0}")]
    RegressionRefused(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Parse(err.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

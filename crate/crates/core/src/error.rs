use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Error)]
pub enum SietError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient samples: need at least {need}, got {got}")]
    InsufficientSamples { need: usize, got: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SietError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        SietError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for the error kinds that mean "the constraint set is empty".
    pub fn is_infeasible(&self) -> bool {
        matches!(self, SietError::Infeasible(_))
    }
}

pub type Result<T> = std::result::Result<T, SietError>;

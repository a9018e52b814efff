use thiserror::Error;

/// Errors raised by the reconciliation engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("degenerate score: x = 0 with zero signal-to-noise ratio")]
    DegenerateScore,

    #[error("non-physical symplectic eigenvalue {which} = {value}")]
    NonPhysical { which: &'static str, value: f64 },

    #[error("row provider failed for row {row}: {reason}")]
    RowProvider { row: usize, reason: String },

    #[error("compute budget exceeded: {required} > {budget} multiply-accumulates")]
    BudgetExceeded { required: f64, budget: f64 },

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

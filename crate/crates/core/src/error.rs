use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain of the model (negative mean, eta outside (0,1], ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data violates a documented constraint.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A bin holds events while the model assigns it zero probability.
    #[error(
        "infeasible data: bin {bin} holds {count} events but the model probability is 0; \
         check the response matrix and grid (include-mode overflow bins cover out-of-range events)"
    )]
    Infeasible { bin: usize, count: f64 },

    #[error("response matrix is rank deficient: smallest singular value {smallest_singular_value:e}")]
    RankDeficient { smallest_singular_value: f64 },

    /// Numerical defect that should not happen for valid inputs.
    #[error("internal numerical error: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

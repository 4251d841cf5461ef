use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: String,
        got: String,
    },

    #[error("matrix `{name}` is not symmetric positive definite")]
    NotSpd { name: String },

    #[error("matrix `{name}` is singular: {reason}")]
    Singular { name: String, reason: String },

    #[error("responses are collinear: Y^T Y is not invertible")]
    CollinearResponses,

    #[error("insufficient samples: N = {n}, need N > {needed}")]
    InsufficientSamples { n: usize, needed: usize },

    #[error("least squares requires N > D (got N = {n}, D = {d}): X^T X is not invertible")]
    UnsupportedDesign { n: usize, d: usize },

    #[error("probability must lie in (0, 1), got {0}")]
    InvalidProbability(f64),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("SNR calibration failed after {attempts} attempts: {reason}")]
    Calibration { attempts: usize, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dims(context: &str, expected: impl ToString, got: impl ToString) -> Self {
        Error::DimensionMismatch {
            context: context.to_string(),
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    /// True for failures caused by numerically singular or non-SPD inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotSpd { .. } | Error::Singular { .. } | Error::CollinearResponses
        )
    }
}

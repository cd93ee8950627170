use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("dimension mismatch: expected d={expected}, got d={got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("field does not match domain: {0}")]
    FieldMismatch(String),

    #[error("{0} is not a subset of the domain")]
    NotSubset(&'static str),

    #[error("eigensolver did not converge after {iterations} iterations (best residual {best_residual:.3e})")]
    NonConvergence { iterations: usize, best_residual: f64 },

    #[error("zero vector has no localization center")]
    ZeroVector,

    #[error("every component was trimmed")]
    AllTrimmed,

    #[error("scale plan rejected: {0}")]
    Plan(String),

    #[error("Monte Carlo resolution too coarse: need at least {required} samples, got {got}")]
    Resolution { required: usize, got: usize },

    #[error("insufficient ensemble: need at least {required} clouds, got {got}")]
    InsufficientEnsemble { required: usize, got: usize },

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("too few observations: need at least {needed}, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("data contains non-finite entries")]
    NonFiniteData,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigendecomposition did not converge")]
    EigenFailure,

    #[error("degenerate eigenvalue at index {index} (1-based)")]
    DegenerateEigenvalue { index: usize },

    #[error("variance components must be positive")]
    NonPositiveVariance,

    #[error("oracle covariances required for this matrix choice")]
    OracleRequired,

    #[error("pooled sample variance is degenerate in coordinate {coord} (1-based)")]
    DegenerateDiagonal { coord: usize },

    #[error("bad dimension: {0}")]
    BadDimension(String),

    #[error("bad family parameters: {0}")]
    BadFamilyParams(String),

    #[error("alpha must lie in (0, 0.5), got {0}")]
    BadAlpha(f64),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("invalid experiment config: {0}")]
    BadConfig(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

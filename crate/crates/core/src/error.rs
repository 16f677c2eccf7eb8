use thiserror::Error;

/// Errors produced by the model, oracle, engine, and ensemble layers.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("site {site} outside chain [{lo}, {hi}]")]
    SiteOutOfRange { site: i64, lo: i64, hi: i64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("chain of {n} sites exceeds the dimension cap of {cap} sites")]
    DimensionCap { n: usize, cap: usize },

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("matrix is not orthogonal (max deviation {0:.3e})")]
    NotOrthogonal(f64),

    #[error("eigensolver failed: {0}")]
    EigenFailure(String),

    #[error("matrix exponential series did not reach tolerance {tol:.3e} within {max_terms} terms")]
    ExpmDivergence { tol: f64, max_terms: usize },

    #[error("non-finite value in {context} at pair ({row}, {col})")]
    NonFinite {
        context: &'static str,
        row: usize,
        col: usize,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;

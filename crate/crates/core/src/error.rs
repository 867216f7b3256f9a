use thiserror::Error;

/// Errors raised by filter synthesis, detection and the readout harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// The normal-equation matrix stayed singular after Tikhonov loading.
    #[error("ill-conditioned moments (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("hypotheses are indistinguishable: feature means coincide")]
    IndistinguishableHypotheses,

    #[error("invalid detection rule: {0}")]
    InvalidRule(String),

    /// The infinite-prior error bound does not exist (rank-deficient measurement).
    #[error("unbounded error bound: {0}")]
    UnboundedBound(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid vector: {0}")]
    InvalidVector(String),

    #[error("invalid set descriptor: {0}")]
    InvalidSet(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("sampling produced no usable points: {0}")]
    NoSamples(String),

    #[error("too few usable points for a rate fit: found {found}, need at least {needed}")]
    TooFewPoints { found: usize, needed: usize },

    #[error("iterates are not contracting (fitted rate {kappa})")]
    NonContracting { kappa: f64 },

    #[error("the intersection of the two sets is empty")]
    EmptyIntersection,

    #[error("affine reduction violated: offset deviation {deviation:e} at step {step}")]
    ReductionViolation { step: usize, deviation: f64 },

    #[error("trajectory did not converge (stop reason {0})")]
    NotConverged(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("norm drift {drift:.3e} in a single step exceeds 1e-6; reduce dt")]
    NormDrift { drift: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Chebyshev order cap {cap} exceeded; about {required} terms required")]
    OrderCapExceeded { cap: usize, required: usize },

    #[error("Chebyshev recurrence diverged at term {term}: operator spectrum exceeds plan bounds [{lo}, {hi}]")]
    BoundViolation { term: usize, lo: f64, hi: f64 },

    #[error("exact diagonalization limited to {cap} spins, model has {spins}")]
    SizeCapExceeded { cap: usize, spins: usize },

    #[error("power-law fit needs at least {needed} points with positive values, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum FnlsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("grids differ between operands")]
    GridMismatch,

    #[error("Coulomb center {index} sits on a grid node and softening is zero")]
    SingularSample { index: usize },

    #[error("Gram matrix is rank deficient (min eigenvalue {min_eigenvalue:e})")]
    RankDeficient { min_eigenvalue: f64 },

    #[error("orbital mixing couples unequal occupations {0} and {1}")]
    OccupationMismatch(f64, f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("eigensolver did not converge in {iterations} iterations")]
    NoConvergence {
        iterations: usize,
        best: Box<crate::eigensolver::SpectrumResult>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("malformed field dump: {0}")]
    Decode(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FnlsError>;

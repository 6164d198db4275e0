use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cutoff must be at least 2 Fock levels, got {0}")]
    CutoffTooSmall(usize),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("truncation leakage {leakage:.3e} exceeds limit {limit:.1e} ({context})")]
    Truncation {
        leakage: f64,
        limit: f64,
        context: String,
    },

    #[error("product space of {entries} entries exceeds the memory budget of {budget}")]
    BudgetExceeded { entries: usize, budget: usize },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("witness spectrum [{min:.6}, {max:.6}] leaves the box [-{n}, {m}]")]
    BoxViolation { min: f64, max: f64, n: f64, m: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("zero vector cannot be normalized ({0})")]
    ZeroVector(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix dimension must be at least 1")]
    EmptyMatrix,

    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not orthogonal: max |U^T U - I| = {deviation:e}")]
    NotOrthogonal { deviation: f64 },

    #[error("matrix is not symmetric: max |A - A^T| = {deviation:e}")]
    NotSymmetric { deviation: f64 },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("coordinates are not pairwise distinct")]
    TiedCoordinates,

    #[error("rounding failed after {attempts} redraws (random stream is degenerate)")]
    RetriesExhausted { attempts: usize },

    #[error("probability {0} is outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension {n} exceeds the limit of {max}")]
    TooLarge { n: usize, max: usize },

    #[error("symmetric eigensolver did not converge")]
    EigenFailure,

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced anywhere in the completion pipeline.
#[derive(Debug, Error)]
pub enum SetError {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate observation at ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },

    #[error("no observed entries")]
    EmptyObservation,

    #[error("non-finite value in input")]
    NonFinite,

    #[error("columns are not orthonormal (error {0:e})")]
    NotOrthonormal(f64),

    #[error("matrix is rank deficient")]
    RankDeficient,

    #[error("invalid rank {rank}: must satisfy 1 <= rank <= {max}")]
    InvalidRank { rank: usize, max: usize },

    #[error("invalid geodesic direction: {0}")]
    InvalidDirection(String),

    #[error("gradient vanishes: stationary point")]
    ZeroGradient,

    #[error("no column admits a barrier")]
    EmptyAdmittingSet,

    #[error("observed entries have zero norm")]
    ZeroObservedNorm,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SetError>;

//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode index {mode} out of range for order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A factorization pivot or diagonal fell below the rank tolerance.
    #[error("rank-deficient input{}: {detail}", match .mode { Some(m) => format!(" (mode {m})"), None => String::new() })]
    RankDeficient { mode: Option<usize>, detail: String },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("row {row} of the input is zero")]
    ZeroRow { row: usize },

    /// Block coordinate descent diverged; the decomposition may not exist
    /// for this input.
    #[error("decomposition may not exist for this input: {0}")]
    MayNotExist(String),

    #[error("hypotheses are not nested: {0}")]
    NotNested(String),

    #[error("{failed} of {total} null replicates failed; aborting (failure rate > 1%)")]
    TooManyReplicateFailures { failed: usize, total: usize },

    #[error(transparent)]
    Parse(#[from] crate::io::ParseError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

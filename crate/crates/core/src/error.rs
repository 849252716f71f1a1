use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rank out of range: {0}")]
    RankOutOfRange(String),

    /// A mode unfolding has fewer than the requested number of numerically
    /// nonzero singular values.
    #[error("rank-deficient tensor in mode {mode}")]
    RankDeficient { mode: usize },

    #[error("singular core: {0}")]
    Singular(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("unsupported link: {0}")]
    UnsupportedLink(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("divergence at iteration {iter}: {reason}")]
    Divergence { iter: usize, reason: String },

    #[error("rank collapse at iteration {iter}")]
    RankCollapse { iter: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

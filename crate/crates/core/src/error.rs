use thiserror::Error;

use crate::model::InfluenceTransform;

/// Errors raised by the market model, the solvers and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarketError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid {what}: {reason}")]
    InvalidParameter { what: &'static str, reason: String },
    #[error("degenerate market: {0}")]
    DegenerateMarket(&'static str),
    #[error("influence transform `{0}` has no closed-form one-step expectation")]
    UnsupportedTransform(InfluenceTransform),
    #[error("corrupt state: song {song} has {downloads} downloads but only {samples} samples")]
    StateCorruption { song: usize, downloads: u64, samples: u64 },
    #[error("exhaustive search is limited to n <= {limit}, got n = {n}")]
    SizeGuard { n: usize, limit: usize },
    #[error("parametric iteration did not converge within {0} iterations")]
    IterationLimit(usize),
    #[error("world {0} has no downloads, market shares are undefined")]
    UndefinedShare(usize),
    #[error("missing data: {0}")]
    MissingData(String),
}

pub type Result<T> = std::result::Result<T, MarketError>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(MarketError::DimensionMismatch { what, expected, got })
    }
}

pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> MarketError {
    MarketError::InvalidParameter {
        what,
        reason: reason.into(),
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-positive variance {value} at coordinate {index}")]
    NonPositiveVariance { index: usize, value: f64 },

    #[error("empty truncation window [{lo}, {hi}]")]
    EmptySupport { lo: f64, hi: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("K = 0 has no mass under a zero-truncated prior")]
    ZeroComponents,

    #[error("K = {k} lies outside the tabulated range {first}..={last}")]
    KOutsideTable { k: usize, first: usize, last: usize },

    #[error("all {n_mc} Monte Carlo draws of the repulsive function were zero")]
    DegenerateEstimate { n_mc: usize },

    #[error("rejection sampler exhausted after {attempts} attempts")]
    RejectionExhausted { attempts: usize },

    #[error("series for V_n({ell}) did not converge within {terms} terms")]
    SeriesNotConverged { ell: usize, terms: usize },

    #[error("cluster count {ell} exceeds the V_n table (max {max})")]
    EllOutsideTable { ell: usize, max: usize },

    #[error("set partition enumeration limited to n <= {max}, got {n}")]
    TooLarge { n: usize, max: usize },

    #[error("prior truncation insufficient: tail mass {tail:e} beyond k_max = {k_max}")]
    TruncationInsufficient { k_max: usize, tail: f64 },

    #[error("sampler failed at sweep {iteration}: {source}")]
    Sweep {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("dataset has no observations")]
    EmptyDataset,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

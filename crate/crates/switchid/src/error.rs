//! Crate-wide error type.

/// Errors reported by model construction, filtering, decoding and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Incompatible dimensions between two objects that must agree.
    #[error("dimension mismatch: {0}")]
    Dim(String),

    /// A value or structure violates a documented requirement.
    #[error("invalid value: {0}")]
    Invalid(String),

    /// The filter produced a non-finite mean or covariance.
    #[error("filter diverged at step {t} (epoch {epoch})")]
    FilterDiverged { t: usize, epoch: usize },

    /// Every candidate in a decode step was disqualified (non-finite cost).
    #[error("mode decoding failed at step {t}: no candidate has finite cost")]
    NoFeasibleCandidate { t: usize },

    /// The candidate space of an enumeration exceeds the configured cap.
    #[error("candidate space {candidates} exceeds cap {cap}; reduce the window length")]
    CandidateCap { candidates: u128, cap: u128 },

    /// A model file failed schema or value validation.
    #[error("model file: {0}")]
    ModelFormat(String),

    /// A CSV file failed to parse; `line` is 1-based including the header.
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },

    /// A config file failed to parse or contained unknown keys.
    #[error("config: {0}")]
    Config(String),

    /// An evaluation metric is undefined for the given data.
    #[error("metric undefined: {0}")]
    Metric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line interface.
    ///
    /// 0 success, 1 usage, 2 I/O, 3 divergence-degraded result,
    /// 4 validation failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Csv { .. } => 2,
            Error::FilterDiverged { .. } => 3,
            _ => 4,
        }
    }
}

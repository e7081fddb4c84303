use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the forecasting toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("series `{series}`: non-uniform step at index {index} (expected {expected_secs}s, found {found_secs}s)")]
    NonUniformStep {
        series: String,
        index: usize,
        expected_secs: i64,
        found_secs: i64,
    },

    #[error("series `{series}`: {missing} missing value(s) and imputation is disabled")]
    MissingValue { series: String, missing: usize },

    #[error("gap at index {index} is not bounded by observed values on both sides")]
    UnboundedGap { index: usize },

    #[error("segment `{0}` would be empty")]
    EmptySegment(&'static str),

    #[error("series too short: need at least {needed} points, have {actual}")]
    SeriesTooShort { needed: usize, actual: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("degenerate value range: all values equal {0}")]
    DegenerateRange(f64),

    #[error("special token {token} found at position {position} in decoded span")]
    SpecialTokenInSpan { token: u32, position: usize },

    #[error("mixup pool too small: need {needed} series of sufficient length, have {actual}")]
    PoolTooSmall { needed: usize, actual: usize },

    #[error("sub-sequence length {len} is too short (minimum 2)")]
    SubsequenceTooShort { len: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("token {token} out of range for vocabulary of size {vocab}")]
    TokenOutOfRange { token: u32, vocab: usize },

    #[error("sequence length {len} exceeds the configured limit {limit}")]
    LengthExceeded { len: usize, limit: usize },

    #[error("training diverged at step {step}: loss is not finite")]
    DivergedLoss { step: usize },

    #[error("zero actual value at index {0}; MAPE is undefined")]
    ZeroActualInMape(usize),

    #[error("need at least 2 residuals, have {0}")]
    InsufficientResiduals(usize),

    #[error("models were evaluated on different origins")]
    MismatchedWindows,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error stems from invalid user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io(_) | Error::DivergedLoss { .. } | Error::ShapeMismatch(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

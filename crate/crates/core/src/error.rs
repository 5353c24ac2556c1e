use thiserror::Error;

/// Errors raised anywhere in the calibration toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("normalization parameters are missing column `{0}`")]
    MissingColumn(String),
    #[error("too few rows: need at least {needed}, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("no rows left after dropping incomplete records")]
    EmptyAfterDrop,
    #[error("timestamps are not monotonic at record {index}")]
    NonMonotonicTimestamps { index: usize },
    #[error("lagged features require uniformly bucketed records (record {index} is off the grid)")]
    NotBucketed { index: usize },
    #[error("invalid feature spec: {0}")]
    InvalidFeatureSpec(String),
    #[error("csv input has no header row")]
    MissingHeader,
    #[error("mandatory column `{0}` not found in header")]
    MissingMandatoryColumn(String),
    #[error("csv input has a header but no data rows")]
    EmptyFile,
    #[error("mobile mode requested but records carry neither speed nor GPS fixes")]
    NoMotionData,
    #[error("normal equations are rank deficient (condition estimate {condition:e})")]
    RankDeficient { condition: f64 },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("model used before it was fitted")]
    NotFitted,
    #[error("loss targets must be non-negative (row {index} is {value})")]
    NegativeTargets { index: usize, value: f64 },
    #[error("target is constant; R² is undefined")]
    ConstantTarget,
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("report has no rows")]
    EmptyReport,
    #[error("unsupported model file (format `{format}`, version {version})")]
    UnsupportedFormat { format: String, version: u32 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

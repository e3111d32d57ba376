use thiserror::Error;

/// Errors raised by the forest engine and its surrounding utilities.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is invalid: {0}")]
    InvalidDataset(String),
    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("leaf has zero total weight")]
    ZeroWeightLeaf,
    #[error("split leaves a child without positive-weight rows")]
    EmptyChild,
    #[error("training data has no rows with positive weight")]
    DegenerateData,
    #[error("expected a feature vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("block length {block_len} is not in [1, {len}]")]
    InvalidBlockLen { block_len: usize, len: usize },
    #[error("minimum node size formula needs T >= 16, got {0}")]
    DomainError(usize),
    #[error("series of length {len} is too short for maximum lag {max_lag}")]
    SeriesTooShort { len: usize, max_lag: usize },
    #[error("log transform needs positive values, found {value} at index {index}")]
    NonPositiveValue { index: usize, value: f64 },
    #[error("time index {0} is outside the available history")]
    IndexOutOfHistory(usize),
    #[error("series of length {len} cannot hold {train} training and {test} test points")]
    InsufficientLength { len: usize, train: usize, test: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("no tree pair has non-constant predictions on the query points")]
    DegenerateVariance,
    #[error("unknown exogenous channel `{0}`")]
    UnknownChannel(String),
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

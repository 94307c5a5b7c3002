use thiserror::Error;

#[derive(Debug, Error)]
pub enum CggmError {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not symmetric: entry ({row}, {col}) differs from its transpose")]
    NotSymmetric { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("fusion penalty is vacuous for p = {0} (need p >= 3)")]
    PenaltyVacuous(usize),
    #[error("invalid fusion weight {weight} for pair ({i}, {j})")]
    InvalidWeight { i: usize, j: usize, weight: f64 },
    #[error("invalid pair ({i}, {j}) for dimension {p}")]
    InvalidPair { i: usize, j: usize, p: usize },
    #[error("line search stalled at outer iteration {outer}, inner iteration {inner} (step {step:e})")]
    LineSearchStalled { outer: usize, inner: usize, step: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("rand index is undefined for fewer than two variables")]
    Undefined,
    #[error("cluster sizes {sizes:?} do not sum to p = {p}")]
    InvalidSizes { p: usize, sizes: Vec<usize> },
    #[error("invalid number of clusters k = {k} for p = {p}")]
    InvalidK { k: usize, p: usize },
    #[error("column {0} has zero variance")]
    DegenerateColumn(usize),
    #[error("dataset columns are not centered")]
    NotCentered,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },
    #[error("resampling failed to produce a positive definite precision after {0} attempts")]
    ResampleExhausted(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CggmError>;

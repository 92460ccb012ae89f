use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhiError {
    #[error("dimension mismatch: expected {expected}x{expected}, got {rows}x{cols}")]
    DimensionMismatch {
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix must have at least one row")]
    Empty,
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("singular pivot at index {index} (|pivot| = {magnitude:e})")]
    SingularPivot { index: usize, magnitude: f64 },
    #[error("matrix is not (quasi-)upper-triangular")]
    StructureMismatch,
    #[error("p must be at least 1")]
    InvalidIndex,
    #[error("unsupported Pade degree {0}")]
    UnsupportedDegree(usize),
    #[error("series truncation order {k} is below the minimum {min}")]
    TruncationTooShort { k: usize, min: usize },
    #[error("input magnitude too large: norm estimate is not finite")]
    InputMagnitude,
    #[error("inconsistent selection: recovered scaling {0} is not a nonnegative integer")]
    Inconsistent(String),
    #[error("argument {x} outside the validated range [0, {limit}]")]
    Domain { x: f64, limit: f64 },
    #[error("bisection failed to bracket or converge: {0}")]
    NoConvergence(String),
    #[error("oracle precision budget exceeded after {0} Taylor terms")]
    PrecisionBudget(usize),
    #[error("oracle limited to n*(p+1) <= 2048, got {0}")]
    OracleTooLarge(usize),
}

pub type Result<T, E = PhiError> = std::result::Result<T, E>;

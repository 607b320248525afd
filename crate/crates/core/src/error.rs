use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode {mode} out of range for a {order}-way tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("column count mismatch: expected {expected}, found {found}")]
    ColumnMismatch { expected: usize, found: usize },

    #[error("operation would materialize {requested} elements, above the budget of {budget}")]
    ElementBudget { requested: u128, budget: usize },

    #[error("data has zero Frobenius norm")]
    ZeroNorm,

    #[error("penalty parameter rho must be positive, got {0}")]
    InvalidRho(f64),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("Gram matrix has zero trace (all-zero factors); re-draw the initialization")]
    ZeroTraceGram,

    #[error("matrix is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("duplicate index on line {line} (first seen on line {first_line})")]
    DuplicateIndex { line: usize, first_line: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

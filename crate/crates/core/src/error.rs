use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (anti-Hermitian part {0:.3e})")]
    NotHermitian(f64),

    #[error("not a density matrix: {0}")]
    InvalidDensity(String),

    #[error("operator is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("invalid factor shape: {0}")]
    InvalidShape(String),

    #[error("dimension {0} must be odd")]
    EvenDimension(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Kraus operators are not trace preserving (deviation {0:.3e})")]
    NotTracePreserving(f64),

    #[error("POVM elements do not sum to identity (deviation {0:.3e})")]
    IncompletePovm(f64),

    #[error("eigensolver did not converge")]
    EigenFailure,

    #[error("iteration budget of {iterations} exhausted (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("budget exceeded: {required} cells requested, limit {limit}")]
    BudgetExceeded { required: u128, limit: u128 },

    #[error("no fixed point found in any cell (f leaves the simplex?)")]
    NoFixedPoint,

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

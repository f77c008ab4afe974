use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("objective value at the initial point is not finite")]
    InfiniteInitialValue,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quasi-Newton step has zero length")]
    ZeroStep,

    #[error("quasi-Newton pair rejected: sᵀv = {0:e} is not positive")]
    NonPositiveCurvature(f64),

    #[error("point set is empty")]
    EmptyPointSet,

    #[error("{solver} did not converge within {iterations} iterations (KKT residual {residual:e})")]
    QpNotConverged { solver: &'static str, iterations: usize, residual: f64 },

    #[error("matrix is numerically singular")]
    Singular,

    #[error("line search needs a positive model decrease, got {0:e}")]
    NonPositiveModelDecrease(f64),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("invalid option `{key}`: {reason}")]
    InvalidOption { key: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed PGM image: {0}")]
    Pgm(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

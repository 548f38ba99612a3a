use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },
    #[error("point evaluation at a polygon corner is undefined")]
    CornerEvaluation,
    #[error("mismatched discretizations: {0}")]
    Mismatch(String),
    #[error("singular linear system: {0}")]
    SingularSystem(String),
    #[error("solver did not converge after {iterations} iterations (merit^1/2 = {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("expression error: {0}")]
    Expression(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

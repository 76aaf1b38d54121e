use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("singular linear system at row {row}")]
    SingularSystem { row: usize },
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error("eigen solver failed: {0}")]
    Eigen(String),
    #[error("conjugate gradient did not converge: residual {residual:.3e} after {iterations} iterations")]
    CgNotConverged { iterations: usize, residual: f64 },
    #[error("fixed point did not converge: change {change:.3e} after {iterations} iterations")]
    FixedPointNotConverged { iterations: usize, change: f64 },
    #[error("source has infinite weighted norm: {0}")]
    InfiniteWeightedNorm(String),
    #[error("kernel support check failed: {0}")]
    KernelSupport(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

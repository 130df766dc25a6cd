use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field does not live on the operator's grid")]
    GridMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("derivative order {0} exceeds the supported maximum of 4")]
    OrderTooHigh(u32),
    #[error("potential is negative ({value}) at grid index {index}")]
    NegativePotential { index: usize, value: f64 },
    #[error("spectral parameter {0} lies outside the open sector of angle pi")]
    OutsideSector(String),
    #[error("shifted operator is singular at lambda = {0}")]
    SingularShift(String),
    #[error("krylov solver did not converge: {iterations} iterations, relative residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("capability mismatch: {0}")]
    Capability(String),
    #[error("spectrum touches the branch cut (-inf, 0] at {0}")]
    BranchCut(String),
    #[error("insufficient sample coverage: {0}")]
    InsufficientCoverage(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

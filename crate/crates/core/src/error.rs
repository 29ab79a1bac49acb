use thiserror::Error;

/// Errors raised by the solver, the kernel laboratory and the run driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected} values, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("kernel at t = 0 is a Dirac mass and has no grid representation")]
    ZeroTime,

    #[error("derivative order {order} exceeds the configured cap {cap}")]
    DerivativeCap { order: usize, cap: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error("numerical breakdown: {0}")]
    Breakdown(String),

    #[error("invalid config: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("invalid array file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

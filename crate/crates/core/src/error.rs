use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("the zero mode is excluded from every operation")]
    ZeroMode,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("operands use different time grids")]
    TimeGridMismatch,

    #[error(
        "some period is at least 2*pi (growing or neutral modes), so the horizon must be finite"
    )]
    InfiniteHorizon,

    #[error("invalid horizon {0}")]
    InvalidHorizon(f64),

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("time {t} lies beyond the horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("at least two time nodes are required, got {0}")]
    TooFewTimeNodes(usize),

    #[error("linear weight rate {rate} is not below M2/2 = {limit}")]
    InadmissibleWeight { rate: f64, limit: f64 },

    #[error("inadmissible exponents m1={m1}, m2={m2}: need m2 - m1 - 4 < -{dim}")]
    InadmissibleExponents { m1: f64, m2: f64, dim: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("smallness violated: 4*eta*|x0| = {product} is not below 1")]
    SmallnessViolated { product: f64 },

    #[error("no convergence within {} iterations (last residual {:e})", .residuals.len(), .residuals.last().copied().unwrap_or(f64::NAN))]
    NotConverged { residuals: Vec<f64> },

    #[error("blow-up or instability after t = {last_good_time}")]
    Instability { last_good_time: f64 },

    #[error("insufficient decay data: {usable} usable shells, need at least {required}")]
    InsufficientDecayData { usable: usize, required: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl From<std::io::Error> for KsError {
    fn from(err: std::io::Error) -> Self {
        KsError::Io(err.to_string())
    }
}

pub type Result<T, E = KsError> = std::result::Result<T, E>;

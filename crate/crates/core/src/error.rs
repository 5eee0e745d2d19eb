use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("curve is not strictly convex (min radius of curvature {min_radius:e}, tolerance {tolerance:e})")]
    NonConvex { min_radius: f64, tolerance: f64 },
    #[error("grids do not match ({left} vs {right} nodes)")]
    GridMismatch { left: usize, right: usize },
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("no event found before theta = {limit}")]
    EventNotFound { limit: f64 },
    #[error("integrator step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("ratio {target} not attainable; attained range [{lo}, {hi}]")]
    NoBracket { target: f64, lo: f64, hi: f64 },
    #[error("base point {point:?} is not strictly inside the body")]
    PointOutside { point: [f64; 2] },
    #[error("entropy maximization failed: {0}")]
    OptimFailed(String),
    #[error("entropy ordering violated: {0}")]
    OrderingViolated(String),
    #[error("eigensolver failed: {0}")]
    EigenFailed(String),
    #[error("perturbation left the linear window: {0}")]
    WindowEscaped(String),
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("bad domain: {0}")]
    BadDomain(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("alpha {alpha} does not equal 1/(k^2-1) for k = {k}")]
    AlphaMismatch { alpha: f64, k: usize },
    #[error("perturbation too large for the asymptotic regime: {0}")]
    TooLarge(String),
    #[error("closed forms disagree: {0}")]
    MismatchBug(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

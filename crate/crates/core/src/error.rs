use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid state space: {0}")]
    InvalidSpace(String),

    #[error("expected {expected} mode, got {actual}")]
    ModeMismatch {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("objects live on different state spaces")]
    SpaceMismatch,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid rate matrix: {0}")]
    InvalidRateMatrix(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("time {t} outside the schedule domain [0, {horizon}]")]
    ScheduleDomain { t: f64, horizon: f64 },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid time interval: {0}")]
    InvalidInterval(String),

    #[error("conditioning context has zero probability")]
    ZeroProbabilityContext,

    #[error("tilt partition value underflowed ({0:e})")]
    DegenerateTilt(f64),

    #[error("degenerate column {column}: {reason}")]
    DegenerateColumn { column: usize, reason: String },

    #[error("quadrature did not converge within {0} evaluations")]
    QuadratureNonConvergence(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

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

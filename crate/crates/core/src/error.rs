use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state ({x}, {y}) lies outside the admissible region: {reason}")]
    OutsideStateSpace { x: f64, y: f64, reason: String },

    #[error("frame mismatch: expected {expected:?}, got {found:?}")]
    FrameMismatch {
        expected: crate::model::Frame,
        found: crate::model::Frame,
    },

    #[error("step size {dt} exceeds stiffness limit {limit}")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("diffusion clamp active on {fraction:.4} of steps (limit 0.01)")]
    ClampRate { fraction: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("solver disagreement: {0}")]
    SolverDisagreement(String),

    #[error("rate not estimable: {0}")]
    RateNotEstimable(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

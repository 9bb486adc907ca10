use thiserror::Error;

/// Errors raised by the sampling, planning and verification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("ill-posed proximal problem: diagonal entry {index} of A + I/eta is {value}")]
    IllPosedProx { index: usize, value: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("rejection sampler gave up after {proposals} proposals")]
    GaveUp { proposals: usize },

    #[error("sampler step {step} failed: {source}")]
    StepFailed {
        step: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("r = {r} is outside the validity range (0, {max}]")]
    OutOfRange { r: f64, max: f64 },

    #[error("density integrates to {integral} on the support (expected 1 within 0.01)")]
    Normalization { integral: f64 },

    #[error("planner did not reach a fixed point after {rounds} rounds (last T = {last_t}, eta = {last_eta})")]
    PlanNotConverged {
        rounds: usize,
        last_t: u64,
        last_eta: f64,
    },

    #[error("subgradient at the Gaussian mean has norm {norm} (must be <= 1e-8)")]
    GradientAtMean { norm: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

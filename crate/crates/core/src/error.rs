use thiserror::Error;

use crate::mle::MleFit;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("probability {0} is outside (0, 1)")]
    InvalidProbability(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("density has no exponential-tilt/concave decomposition: {0}")]
    NotFStar(String),

    #[error("fit did not converge after {iterations} iterations (largest residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        fit: Box<MleFit>,
    },

    #[error("{excluded} of {reps} replications failed to converge at n = {n}")]
    TooManyExclusions { n: usize, reps: usize, excluded: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

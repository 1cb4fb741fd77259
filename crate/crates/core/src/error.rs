use alloc::string::String;
use thiserror::Error;

/// Everything that can go wrong inside the estimation core.
///
/// Step indices are 1-based sample numbers; step 0 refers to the initial
/// belief.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("function returned a non-finite value")]
    NonFiniteOutput,
    #[error("sequence has zero variance")]
    ZeroVariance,
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
    #[error("state became non-finite at step {step}")]
    NonFiniteState { step: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("innovation covariance is singular at step {step}")]
    InnovationCovSingular { step: usize },
    #[error("prior covariance is singular at step {step}")]
    PriorCovSingular { step: usize },
    #[error("information matrix is singular")]
    SingularInformation,
    #[error("weight {weight} is singular at step {step}")]
    WeightSingular { weight: &'static str, step: usize },
    #[error("filter diverged in iteration {iteration} at step {step}")]
    FilterDiverged { iteration: usize, step: usize },
    #[error("Gauss-Newton information matrix is singular")]
    HessianSingular,
    #[error("information increment is singular at step {step}")]
    SingularIncrement { step: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

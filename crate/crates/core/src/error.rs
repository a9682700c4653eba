use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter box: {0}")]
    InvalidBox(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("m-dimensional Jacobian is not finite and positive at {point:?} (value {value})")]
    NonFiniteJacobian { point: Vec<f64>, value: f64 },

    #[error("model has no differential and finite differences are disabled")]
    MissingDifferential,

    #[error("bandwidth {h} must be below the narrowest box side {min_width}")]
    BandwidthTooLarge { h: f64, min_width: f64 },

    #[error("duplicate images: {count} points have a zero k-NN radius (deduplicate or raise k)")]
    DuplicateImages { count: usize },

    #[error("all resampling weights are zero; the target has no mass on the sampled region")]
    AllZeroWeights,

    #[error("slot {slot} exceeded {limit} rejections; truncation level b is misconfigured")]
    StallGuard { slot: usize, limit: usize },

    #[error("sample size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("exact W1 limited to {limit} points, got {n}; use w1_sliced")]
    TooLarge { n: usize, limit: usize },

    #[error("no steady state reached before t = {t_max}")]
    NoSteadyState { t_max: f64 },

    #[error("envelope violated: density {value} exceeds envelope {envelope}")]
    EnvelopeViolation { value: f64, envelope: f64 },

    #[error("initial points were given without the density they were drawn from")]
    MissingInitialDensity,

    #[error("model evaluation failed: {0}")]
    Model(String),
}

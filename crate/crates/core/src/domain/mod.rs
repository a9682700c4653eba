//! Types shared by every stage of the sampler.

mod config;
mod diagnostics;
mod ensemble;
mod model;
mod param_box;
mod target;

pub use config::{Algorithm, RunConfig};
pub use diagnostics::{effective_sample_size, Diagnostics, IterationRecord, Termination};
pub use ensemble::{neumaier_sum, Density, Draws, Ensemble, Point, Proposal};
pub use model::{
    finite_difference_differential, jacobian_m, log_gram_sqrt_det, log_jacobian_m,
    unit_ball_volume, JacobianFallback, Model,
};
pub use param_box::ParamBox;
pub use target::{FnTarget, InverseSquaredDistance, TargetDensity, UniformTarget};

//! Iterative space-filling designs for computer experiments.
//!
//! Given a model `f` on a parameter box and a target density `mu` on the
//! model's output manifold, the sampler returns design points `x_i` whose
//! images `f(x_i)` are approximately distributed according to `mu`. Each
//! iteration evaluates `f` once per point, reweights the ensemble (by `k`-NN
//! radii in output space, or by the Jacobian `J_m f` when it is available),
//! resamples, and perturbs the survivors with a boundary-reflected kernel
//! mixed with a uniform floor.
//!
//! ```
//! use spacefill::{run, Algorithm, RunConfig, UniformTarget};
//! use spacefill::models::TorusModel;
//!
//! let model = TorusModel::default();
//! let cfg = RunConfig::new(Algorithm::Jacobian, 200, 0.1, 0.5, 2).with_seed(1);
//! let out = run(&model, &UniformTarget, &TorusModel::param_box(), &cfg, None).unwrap();
//! assert_eq!(out.ensemble.len(), 200);
//! assert_eq!(out.diagnostics.f_evals(), 600);
//! ```

pub mod domain;
pub mod engine;
pub mod error;
pub mod estimate;
pub mod kernel;
pub mod models;
pub mod oracle;
pub mod perturb;
pub mod quadrature;
pub mod resample;
pub mod rng;
pub mod transport;

pub use domain::{
    Algorithm, Density, Diagnostics, Draws, Ensemble, InverseSquaredDistance, IterationRecord,
    JacobianFallback, Model, ParamBox, Point, Proposal, RunConfig, TargetDensity, Termination,
    UniformTarget,
};
pub use engine::{rate_alpha, run, run_with, InitialDesign, Progress, RunOutput};
pub use error::{Error, Result};
pub use kernel::{KernelFamily, ReflectedKernel};
pub use transport::{w1_1d, w1_exact, w1_sliced, GroundMetric};

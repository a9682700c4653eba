//! The iteration loop: evaluate, weight, resample, perturb.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::domain::{
    effective_sample_size, Algorithm, Density, Diagnostics, Draws, Ensemble, IterationRecord,
    JacobianFallback, Model, ParamBox, Point, Proposal, RunConfig, TargetDensity, Termination,
};
use crate::error::{Error, Result};
use crate::perturb::perturb_truncated;
use crate::resample::{resample_multinomial, weights_jacobian, weights_knn};
use crate::rng::{substream, tag};
use crate::transport::{mean_pairwise_distance, w1_exact, w1_sliced, GroundMetric};

/// Successive-iteration W1 is exact up to this many points, sliced above.
pub const DIAGNOSTIC_EXACT_LIMIT: usize = 1000;
/// Random directions for the sliced diagnostic.
pub const DIAGNOSTIC_PROJECTIONS: usize = 64;

/// Caller-supplied starting points and the density they were drawn from.
#[derive(Clone)]
pub struct InitialDesign {
    pub points: Vec<Point>,
    /// Required by the Jacobian weights; ignored by the k-NN weights.
    pub density: Option<Arc<dyn Density>>,
}

/// What the observer sees after each resampling step.
pub struct Progress<'a> {
    pub record: &'a IterationRecord,
    /// The evaluated ensemble before resampling, carrying its weights.
    pub weighted: &'a Ensemble,
    /// The resampled ensemble.
    pub resampled: &'a Ensemble,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Post-resampling ensemble of the last iteration.
    pub ensemble: Ensemble,
    pub diagnostics: Diagnostics,
}

/// Counts every point the wrapped model evaluates.
struct Counting<'a> {
    inner: &'a dyn Model,
    count: AtomicU64,
}

impl Model for Counting<'_> {
    fn dim_in(&self) -> usize {
        self.inner.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.inner.dim_out()
    }
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.eval(x)
    }
    fn differential(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.inner.differential(x)
    }
    fn jacobian(&self, x: &[f64]) -> Option<f64> {
        self.inner.jacobian(x)
    }
    fn log_jacobian(&self, x: &[f64]) -> Option<f64> {
        self.inner.log_jacobian(x)
    }
    fn is_reentrant(&self) -> bool {
        self.inner.is_reentrant()
    }
    fn eval_batch(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.count.fetch_add(points.len() as u64, Ordering::Relaxed);
        self.inner.eval_batch(points)
    }
}

/// `alpha(N)`: `N^-1/2` for `m = 1`, `N^-1/2 log(N + 1)` for `m = 2`,
/// `N^-1/m` otherwise.
pub fn rate_alpha(n: usize, m: usize) -> f64 {
    let n = n as f64;
    match m {
        1 => n.powf(-0.5),
        2 => n.powf(-0.5) * (n + 1.0).ln(),
        _ => n.powf(-1.0 / m as f64),
    }
}

/// Whether the run should stop after the last recorded iteration.
pub fn stopping_check(diagnostics: &Diagnostics, cfg: &RunConfig) -> Option<Termination> {
    let last = diagnostics.last()?;
    if let (Some(tol), Some(scale)) = (cfg.stop_tol, diagnostics.scale) {
        let quiet = |r: &IterationRecord| r.w1_successive.is_some_and(|w| w < tol * scale);
        let n = diagnostics.records.len();
        if n >= 2 && quiet(&diagnostics.records[n - 1]) && quiet(&diagnostics.records[n - 2]) {
            return Some(Termination::Converged);
        }
    }
    (last.iteration >= cfg.max_iterations).then_some(Termination::IterationLimit)
}

pub fn run(
    model: &dyn Model,
    target: &dyn TargetDensity,
    bx: &ParamBox,
    cfg: &RunConfig,
    init: Option<InitialDesign>,
) -> Result<RunOutput> {
    run_with(model, target, bx, cfg, init, |_| {})
}

/// [`run`] with a callback after every resampling step.
pub fn run_with<F>(
    model: &dyn Model,
    target: &dyn TargetDensity,
    bx: &ParamBox,
    cfg: &RunConfig,
    init: Option<InitialDesign>,
    mut observer: F,
) -> Result<RunOutput>
where
    F: FnMut(Progress<'_>),
{
    let cfg = cfg.resolve(bx)?;
    let m = bx.dim();
    if model.dim_in() != m {
        return Err(Error::InvalidConfig(format!(
            "model takes {} parameters but the box has {m} dimensions",
            model.dim_in()
        )));
    }
    let n = cfg.n;
    let k = cfg.k_for(m);
    let fallback = if cfg.finite_difference_jacobian {
        JacobianFallback::FiniteDifference
    } else {
        JacobianFallback::Disabled
    };
    let shared_box = Arc::new(bx.clone());
    let counting = Counting {
        inner: model,
        count: AtomicU64::new(0),
    };

    let draws = initial_draws(bx, &cfg, init)?;
    let mut evaluated = draws.evaluate(&counting)?;
    let mut diagnostics = Diagnostics {
        alpha: rate_alpha(n, m),
        kernel_lipschitz: cfg.kernel.lipschitz_bounds(cfg.h, m),
        ..Diagnostics::default()
    };
    let mut previous: Option<Ensemble> = None;

    for iteration in 0.. {
        let weights = match cfg.algorithm {
            Algorithm::DerivativeFree => weights_knn(&evaluated, target, k, m)?,
            Algorithm::Jacobian => weights_jacobian(&evaluated, target, &counting, bx, fallback)?,
        };
        let mut rng = substream(cfg.seed, &[tag::RESAMPLE, iteration as u64]);
        let resampled = resample_multinomial(&evaluated, &weights, &mut rng)?;
        if iteration == 0 {
            diagnostics.scale = Some(mean_pairwise_distance(
                resampled.images(),
                GroundMetric::Euclidean,
            ));
        }
        let w1_successive = match &previous {
            Some(prev) => Some(successive_w1(prev, &resampled, cfg.seed, iteration as u64)?),
            None => None,
        };
        let f_evals = counting.count.load(Ordering::Relaxed);
        debug_assert_eq!(f_evals, (n * (iteration + 1)) as u64);
        diagnostics.records.push(IterationRecord {
            iteration,
            w1_successive,
            ess: effective_sample_size(&weights),
            min_weight: weights.iter().copied().fold(f64::INFINITY, f64::min),
            max_weight: weights.iter().copied().fold(0.0, f64::max),
            f_evals,
        });
        let weighted = evaluated.with_weights(weights)?;
        observer(Progress {
            record: diagnostics.last().expect("just pushed"),
            weighted: &weighted,
            resampled: &resampled,
        });
        if let Some(reason) = stopping_check(&diagnostics, &cfg) {
            diagnostics.termination = Some(reason);
            return Ok(RunOutput {
                ensemble: resampled,
                diagnostics,
            });
        }
        let draws = perturb_truncated(&resampled, &shared_box, &cfg, iteration as u64 + 1)?;
        evaluated = draws.evaluate(&counting)?;
        previous = Some(resampled);
    }
    unreachable!("the loop only exits by returning")
}

fn initial_draws(bx: &ParamBox, cfg: &RunConfig, init: Option<InitialDesign>) -> Result<Draws> {
    match init {
        None => {
            let mut rng = substream(cfg.seed, &[tag::INITIAL]);
            let points = (0..cfg.n).map(|_| bx.sample_uniform(&mut rng)).collect();
            Ok(Draws {
                points,
                proposal: Proposal::Uniform(bx.clone()),
            })
        }
        Some(design) => {
            if design.points.len() != cfg.n {
                return Err(Error::SizeMismatch {
                    left: cfg.n,
                    right: design.points.len(),
                });
            }
            if let Some(p) = design
                .points
                .iter()
                .find(|p| p.len() != bx.dim() || !bx.contains(p))
            {
                return Err(Error::InvalidConfig(format!(
                    "initial point {p:?} lies outside the box"
                )));
            }
            let proposal = match (design.density, cfg.algorithm) {
                (Some(d), _) => Proposal::Custom(d),
                (None, Algorithm::Jacobian) => return Err(Error::MissingInitialDensity),
                (None, Algorithm::DerivativeFree) => Proposal::Uniform(bx.clone()),
            };
            Ok(Draws {
                points: design.points,
                proposal,
            })
        }
    }
}

fn successive_w1(prev: &Ensemble, next: &Ensemble, seed: u64, iteration: u64) -> Result<f64> {
    if next.len() <= DIAGNOSTIC_EXACT_LIMIT {
        w1_exact(prev.images(), next.images(), GroundMetric::Euclidean)
    } else {
        let mut rng = substream(seed, &[tag::DIAGNOSTICS, iteration]);
        w1_sliced(
            prev.images(),
            next.images(),
            DIAGNOSTIC_PROJECTIONS,
            &mut rng,
        )
    }
}

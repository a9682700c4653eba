//! Exact samplers from the target distribution on benchmark manifolds.
//!
//! By the area formula, `y = f(x)` has density `mu` on the manifold when `x`
//! has density proportional to `mu(f(x)) J_m f(x)` on the parameter box. The
//! samplers draw `x` by acceptance–rejection against a uniform proposal.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::domain::{Model, ParamBox, Point, TargetDensity};
use crate::error::{Error, Result};
use crate::models::{ExponentialModel, TorusModel};
use crate::rng::{substream, tag, StreamRng};

/// Accepted draws per random substream.
pub const CHUNK: usize = 1024;
/// Envelope = grid maximum times this.
pub const ENVELOPE_MARGIN: f64 = 1.05;

const TORUS_UNIFORM_STREAM: u64 = 1;
const AREA_FORMULA_STREAM: u64 = 2;

/// Oracle draws with their parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSample {
    pub params: Vec<Point>,
    pub images: Vec<Point>,
}

/// Runs `draw` on consecutive chunks in parallel, one substream per chunk.
fn chunked<F>(count: usize, seed: u64, stream: u64, draw: F) -> Result<Vec<Point>>
where
    F: Fn(&mut StreamRng) -> Result<Point> + Sync,
{
    let chunks = count.div_ceil(CHUNK);
    let parts: Vec<Vec<Point>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, &[tag::ORACLE, stream, c as u64]);
            let len = CHUNK.min(count - c * CHUNK);
            (0..len).map(|_| draw(&mut rng)).collect()
        })
        .collect::<Result<_>>()?;
    Ok(parts.concat())
}

/// Uniform on the torus: `psi` uniform, `theta` with density proportional to
/// `R + r cos theta`.
pub fn torus_uniform(model: &TorusModel, count: usize, seed: u64) -> OracleSample {
    let (big, small) = (model.major, model.minor);
    let params = chunked(count, seed, TORUS_UNIFORM_STREAM, |rng| {
        let psi = rng.random::<f64>() * TAU;
        loop {
            let theta = rng.random::<f64>() * TAU;
            if rng.random::<f64>() * (big + small) < big + small * theta.cos() {
                return Ok(vec![theta, psi]);
            }
        }
    })
    .expect("infallible draw");
    let images = params
        .iter()
        .map(|x| model.map(x[0], x[1]).to_vec())
        .collect();
    OracleSample { params, images }
}

type DensityFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Acceptance–rejection from an unnormalized density on a 2-D box, with a
/// constant envelope taken from a grid maximum.
pub struct GridRejection {
    bx: ParamBox,
    density: DensityFn,
    /// Cheap pointwise upper bound on `density`, consulted first.
    bound: Option<DensityFn>,
    envelope: f64,
}

impl GridRejection {
    /// `resolution` grid nodes per axis, endpoints included.
    pub fn new(bx: ParamBox, density: DensityFn, resolution: usize) -> Result<Self> {
        if bx.dim() != 2 || resolution < 2 {
            return Err(Error::InvalidConfig(
                "grid envelopes need a 2-D box and resolution >= 2".into(),
            ));
        }
        let step = |i: usize, axis: usize| {
            bx.lower()[axis] + bx.width(axis) * i as f64 / (resolution - 1) as f64
        };
        let max = (0..resolution)
            .into_par_iter()
            .map(|i| {
                let a = step(i, 0);
                (0..resolution)
                    .map(|j| density(&[a, step(j, 1)]))
                    .fold(0.0f64, f64::max)
            })
            .reduce(|| 0.0, f64::max);
        if !(max > 0.0 && max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "grid maximum of the density is {max}"
            )));
        }
        Ok(GridRejection {
            bx,
            density,
            bound: None,
            envelope: max * ENVELOPE_MARGIN,
        })
    }

    /// `bound` must dominate the density everywhere on the box.
    pub fn with_bound(mut self, bound: DensityFn) -> Self {
        self.bound = Some(bound);
        self
    }

    pub fn envelope(&self) -> f64 {
        self.envelope
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        (self.density)(x)
    }

    /// `count` exact draws; fails if the density ever exceeds the envelope.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<Point>> {
        chunked(count, seed, AREA_FORMULA_STREAM, |rng| loop {
            let x = self.bx.sample_uniform(rng);
            let level = rng.random::<f64>() * self.envelope;
            if self.bound.as_ref().is_some_and(|b| level >= b(&x)) {
                continue;
            }
            let d = (self.density)(&x);
            if d > self.envelope {
                return Err(Error::EnvelopeViolation {
                    value: d,
                    envelope: self.envelope,
                });
            }
            if level < d {
                return Ok(x);
            }
        })
    }
}

/// Area-formula oracle for any model with a closed-form Jacobian.
pub struct AreaFormulaOracle {
    model: Arc<dyn Model>,
    sampler: GridRejection,
}

impl AreaFormulaOracle {
    /// `target = None` means uniform on the manifold.
    pub fn new(
        model: Arc<dyn Model>,
        target: Option<Arc<dyn TargetDensity>>,
        bx: ParamBox,
        resolution: usize,
    ) -> Result<Self> {
        let m = model.clone();
        let density: DensityFn = Box::new(move |x: &[f64]| {
            let lj = m.log_jacobian(x).unwrap_or(f64::NAN);
            let lt = match &target {
                None => 0.0,
                Some(t) => match m.eval(x) {
                    Ok(y) => t.log_eval(&y),
                    Err(_) => f64::NAN,
                },
            };
            (lj + lt).exp()
        });
        if model
            .log_jacobian(&bx.from_unit(&vec![0.5; bx.dim()]))
            .is_none()
        {
            return Err(Error::MissingDifferential);
        }
        Ok(AreaFormulaOracle {
            model,
            sampler: GridRejection::new(bx, density, resolution)?,
        })
    }

    /// Uniform on the exponential manifold; 2048^2 grid.
    pub fn exponential(model: ExponentialModel) -> Result<Self> {
        let mut oracle = Self::new(Arc::new(model), None, ExponentialModel::param_box(), 2048)?;
        let bound: DensityFn = Box::new(move |x: &[f64]| model.area_element_bound(x[0], x[1]));
        oracle.sampler = oracle.sampler.with_bound(bound);
        Ok(oracle)
    }

    /// Density proportional to `1 / |y - center|^2` on the torus; 1024^2 grid.
    pub fn torus_inverse_squared(model: TorusModel, center: Vec<f64>) -> Result<Self> {
        let target = crate::domain::InverseSquaredDistance { center };
        Self::new(
            Arc::new(model),
            Some(Arc::new(target)),
            TorusModel::param_box(),
            1024,
        )
    }

    pub fn sampler(&self) -> &GridRejection {
        &self.sampler
    }

    pub fn sample(&self, count: usize, seed: u64) -> Result<OracleSample> {
        let params = self.sampler.sample(count, seed)?;
        let images = self.model.eval_batch(&params)?;
        Ok(OracleSample { params, images })
    }
}

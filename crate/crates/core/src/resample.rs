//! Resampling potentials and multinomial resampling.
//!
//! Both weight schemes are computed in log space and max-shifted before
//! exponentiation, so tiny Jacobians or densities never underflow the sum.

use rand::Rng;
use rayon::prelude::*;

use crate::domain::{
    log_jacobian_m, neumaier_sum, Ensemble, JacobianFallback, Model, ParamBox, TargetDensity,
};
use crate::error::{Error, Result};
use crate::estimate::knn_radii;

/// Normalizes `exp(log_w)` to unit sum.
pub fn normalize_log_weights(log_w: &[f64]) -> Result<Vec<f64>> {
    if log_w.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::InvalidConfig(
            "target density or weights are not finite".into(),
        ));
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::AllZeroWeights);
    }
    let mut w: Vec<f64> = log_w.iter().map(|v| (v - max).exp()).collect();
    for _ in 0..2 {
        let total = neumaier_sum(w.iter().copied());
        w.iter_mut().for_each(|v| *v /= total);
    }
    Ok(w)
}

/// `G_i ∝ r_i^m mu(y_i)` with `r_i` the k-NN radius of image `i` and `m` the
/// manifold dimension.
pub fn weights_knn(
    ensemble: &Ensemble,
    target: &dyn TargetDensity,
    k: usize,
    m: usize,
) -> Result<Vec<f64>> {
    let radii = knn_radii(ensemble.images(), k);
    let zeros = radii.iter().filter(|r| **r == 0.0).count();
    if zeros > 0 {
        return Err(Error::DuplicateImages { count: zeros });
    }
    let log_w: Vec<f64> = ensemble
        .images()
        .par_iter()
        .zip(radii.par_iter())
        .map(|(y, r)| target.log_eval(y) + m as f64 * r.ln())
        .collect();
    normalize_log_weights(&log_w)
}

/// `G_i ∝ mu(f(x_i)) J_m f(x_i) / d(x_i)` where `d` is the density the points
/// were drawn from.
pub fn weights_jacobian(
    ensemble: &Ensemble,
    target: &dyn TargetDensity,
    model: &dyn Model,
    bx: &ParamBox,
    fallback: JacobianFallback,
) -> Result<Vec<f64>> {
    let proposal = ensemble.proposal().ok_or(Error::MissingInitialDensity)?;
    let log_w: Vec<f64> = ensemble
        .points()
        .par_iter()
        .zip(ensemble.images().par_iter())
        .map(|(x, y)| {
            let lj = log_jacobian_m(model, bx, x, fallback)?;
            Ok(target.log_eval(y) + lj - proposal.density(x).ln())
        })
        .collect::<Result<_>>()?;
    normalize_log_weights(&log_w)
}

/// `N` iid categorical draws by inverse CDF over one sorted batch of
/// uniforms. The result carries the cached images and equal weights.
pub fn resample_multinomial<R: Rng + ?Sized>(
    ensemble: &Ensemble,
    weights: &[f64],
    rng: &mut R,
) -> Result<Ensemble> {
    let n = ensemble.len();
    if weights.len() != n {
        return Err(Error::SizeMismatch {
            left: n,
            right: weights.len(),
        });
    }
    let indices = multinomial_indices(weights, n, rng);
    let points = indices
        .iter()
        .map(|&i| ensemble.points()[i].clone())
        .collect();
    let images = indices
        .iter()
        .map(|&i| ensemble.images()[i].clone())
        .collect();
    Ensemble::uniform(points, images, None)
}

/// Ancestor indices, ascending.
pub fn multinomial_indices<R: Rng + ?Sized>(
    weights: &[f64],
    count: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cumulative.push(acc);
    }
    let total = acc;
    let mut u: Vec<f64> = (0..count).map(|_| rng.random::<f64>() * total).collect();
    u.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(count);
    let mut j = 0;
    for v in u {
        while j + 1 < cumulative.len() && (cumulative[j] <= v || weights[j] == 0.0) {
            j += 1;
        }
        out.push(j);
    }
    out
}

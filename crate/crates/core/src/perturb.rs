//! Draws the next generation of design points from the mixture proposal.
//!
//! Each slot has its own random substream keyed by `(seed, iteration, slot)`,
//! so the draws are the same whatever the thread count.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::domain::{Draws, Ensemble, ParamBox, Point, Proposal, RunConfig};
use crate::error::{Error, Result};
use crate::estimate::{MixtureDensity, TruncatedMixture};
use crate::kernel::ReflectedKernel;
use crate::rng::{substream, tag};

/// Rejections allowed per slot before the truncated sampler gives up.
pub const STALL_LIMIT: usize = 1_000_000;

/// Builds the mixture proposal around a resampled ensemble's points.
pub fn mixture_for(
    resampled: &Ensemble,
    bx: &Arc<ParamBox>,
    cfg: &RunConfig,
) -> Result<MixtureDensity> {
    let kernel = ReflectedKernel::new(cfg.kernel, cfg.h, bx.clone())?;
    Ok(MixtureDensity::new(
        cfg.q,
        kernel,
        resampled.points().to_vec(),
    ))
}

/// `N` independent draws from the untruncated mixture.
pub fn perturb_plain(
    resampled: &Ensemble,
    bx: &Arc<ParamBox>,
    cfg: &RunConfig,
    iteration: u64,
) -> Result<Draws> {
    let mixture = Arc::new(mixture_for(resampled, bx, cfg)?);
    Ok(draw_plain(&mixture, cfg.n, cfg.seed, iteration))
}

/// `N` draws from `min(b, d)` by acceptance–rejection against `d`.
pub fn perturb_truncated(
    resampled: &Ensemble,
    bx: &Arc<ParamBox>,
    cfg: &RunConfig,
    iteration: u64,
) -> Result<Draws> {
    let mixture = Arc::new(mixture_for(resampled, bx, cfg)?);
    draw_truncated(&mixture, cfg.b_for(bx), cfg.n, cfg.seed, iteration)
}

pub fn draw_plain(mixture: &Arc<MixtureDensity>, count: usize, seed: u64, iteration: u64) -> Draws {
    let points: Vec<Point> = (0..count)
        .into_par_iter()
        .map(|slot| {
            let mut rng = substream(seed, &[tag::PERTURB, iteration, slot as u64]);
            mixture.sample(&mut rng)
        })
        .collect();
    Draws {
        points,
        proposal: Proposal::Mixture(mixture.clone()),
    }
}

/// With `level = inf` this is exactly [`draw_plain`].
pub fn draw_truncated(
    mixture: &Arc<MixtureDensity>,
    level: f64,
    count: usize,
    seed: u64,
    iteration: u64,
) -> Result<Draws> {
    if level.is_infinite() {
        return Ok(draw_plain(mixture, count, seed, iteration));
    }
    if level <= mixture.floor() {
        return Err(Error::InvalidConfig(format!(
            "b = {level} must exceed q / volume = {}",
            mixture.floor()
        )));
    }
    let points: Vec<Point> = (0..count)
        .into_par_iter()
        .map(|slot| {
            let mut rng = substream(seed, &[tag::PERTURB, iteration, slot as u64]);
            for _ in 0..=STALL_LIMIT {
                let x = mixture.sample(&mut rng);
                let a = mixture.eval(&x);
                if rng.random::<f64>() * a < a.min(level) {
                    return Ok(x);
                }
            }
            Err(Error::StallGuard {
                slot,
                limit: STALL_LIMIT,
            })
        })
        .collect::<Result<_>>()?;
    let truncated = TruncatedMixture::new(mixture.clone(), level);
    Ok(Draws {
        points,
        proposal: Proposal::Truncated(Arc::new(truncated)),
    })
}

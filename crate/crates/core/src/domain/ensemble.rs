use std::sync::Arc;

use super::{Model, ParamBox};
use crate::error::{Error, Result};
use crate::estimate::{MixtureDensity, TruncatedMixture};

pub type Point = Vec<f64>;

/// A density on the parameter box that points can be drawn from.
pub trait Density: Send + Sync {
    fn density(&self, x: &[f64]) -> f64;
}

/// The density an ensemble's points were drawn from; its reciprocal is the
/// importance factor used by the Jacobian weights.
#[derive(Clone)]
pub enum Proposal {
    Uniform(ParamBox),
    Custom(Arc<dyn Density>),
    Mixture(Arc<MixtureDensity>),
    Truncated(Arc<TruncatedMixture>),
}

impl Proposal {
    pub fn density(&self, x: &[f64]) -> f64 {
        match self {
            Proposal::Uniform(bx) => 1.0 / bx.volume(),
            Proposal::Custom(d) => d.density(x),
            Proposal::Mixture(d) => d.eval(x),
            Proposal::Truncated(d) => d.density(x),
        }
    }
}

impl std::fmt::Debug for Proposal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Proposal::Uniform(bx) => f.debug_tuple("Uniform").field(bx).finish(),
            Proposal::Custom(_) => f.write_str("Custom(..)"),
            Proposal::Mixture(d) => write!(f, "Mixture({} centers)", d.centers().len()),
            Proposal::Truncated(d) => {
                write!(
                    f,
                    "Truncated({} centers, b = {})",
                    d.mixture().centers().len(),
                    d.level()
                )
            }
        }
    }
}

/// Newly drawn points whose images have not been computed yet.
#[derive(Debug, Clone)]
pub struct Draws {
    pub points: Vec<Point>,
    pub proposal: Proposal,
}

impl Draws {
    /// Evaluates the model once on the whole batch.
    pub fn evaluate(self, model: &dyn Model) -> Result<Ensemble> {
        let images = model.eval_batch(&self.points)?;
        if let Some(bad) = images.iter().find(|y| y.iter().any(|v| !v.is_finite())) {
            return Err(Error::Model(format!("non-finite output {bad:?}")));
        }
        Ensemble::uniform(self.points, images, Some(self.proposal))
    }
}

/// Weighted design points with cached model images.
#[derive(Debug, Clone)]
pub struct Ensemble {
    points: Vec<Point>,
    images: Vec<Point>,
    weights: Vec<f64>,
    proposal: Option<Proposal>,
}

impl Ensemble {
    pub fn new(
        points: Vec<Point>,
        images: Vec<Point>,
        weights: Vec<f64>,
        proposal: Option<Proposal>,
    ) -> Result<Self> {
        if points.len() != images.len() {
            return Err(Error::SizeMismatch {
                left: points.len(),
                right: images.len(),
            });
        }
        if points.len() != weights.len() {
            return Err(Error::SizeMismatch {
                left: points.len(),
                right: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidConfig(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total = neumaier_sum(weights.iter().copied());
        if !points.is_empty() && (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Ensemble {
            points,
            images,
            weights,
            proposal,
        })
    }

    /// Equal weights `1/N`.
    pub fn uniform(
        points: Vec<Point>,
        images: Vec<Point>,
        proposal: Option<Proposal>,
    ) -> Result<Self> {
        let n = points.len();
        Ensemble::new(points, images, vec![1.0 / n as f64; n], proposal)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn images(&self) -> &[Point] {
        &self.images
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn proposal(&self) -> Option<&Proposal> {
        self.proposal.as_ref()
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(Error::SizeMismatch {
                left: self.len(),
                right: weights.len(),
            });
        }
        self.weights = weights;
        Ensemble::new(self.points, self.images, self.weights, self.proposal)
    }

    pub fn into_parts(self) -> (Vec<Point>, Vec<Point>, Vec<f64>) {
        (self.points, self.images, self.weights)
    }
}

/// Compensated summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_must_sum_to_one() {
        let p = vec![vec![0.0], vec![1.0]];
        assert!(Ensemble::new(p.clone(), p.clone(), vec![0.5, 0.6], None).is_err());
        assert!(Ensemble::new(p.clone(), p.clone(), vec![1.5, -0.5], None).is_err());
        assert!(Ensemble::new(p.clone(), p, vec![0.25, 0.75], None).is_ok());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(neumaier_sum(v), 2.0);
    }
}

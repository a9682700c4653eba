use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed hypercube `∏ [lower_i, upper_i]`, the domain of all sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct ParamBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawBox> for ParamBox {
    type Error = Error;
    fn try_from(raw: RawBox) -> Result<Self> {
        ParamBox::new(raw.lower, raw.upper)
    }
}

impl From<ParamBox> for RawBox {
    fn from(b: ParamBox) -> Self {
        RawBox {
            lower: b.lower,
            upper: b.upper,
        }
    }
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidBox("dimension must be at least 1".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::InvalidBox(format!(
                "lower has {} coordinates, upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidBox(format!(
                    "side {i} is [{lo}, {hi}]; need finite lower < upper"
                )));
            }
        }
        let b = ParamBox { lower, upper };
        let v = b.volume();
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidBox(format!(
                "volume {v} is not finite and positive"
            )));
        }
        Ok(b)
    }

    /// The unit cube `[0, 1]^m`.
    pub fn unit(m: usize) -> Self {
        ParamBox::new(vec![0.0; m], vec![1.0; m]).expect("unit cube is valid")
    }

    /// `[lo, hi]^m`.
    pub fn cube(m: usize, lo: f64, hi: f64) -> Result<Self> {
        ParamBox::new(vec![lo; m], vec![hi; m])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn min_width(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.width(i))
            .fold(f64::INFINITY, f64::min)
    }

    /// Lebesgue measure of the box.
    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).product()
    }

    /// Euclidean length of the main diagonal.
    pub fn diameter(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.width(i).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Closed-box membership; boundary points are inside.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect()
    }

    /// Maps a point of the unit cube affinely into the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, v)| self.lower[i] + self.width(i) * v)
            .collect()
    }
}

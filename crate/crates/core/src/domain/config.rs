use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ParamBox;
use crate::error::{Error, Result};
use crate::kernel::KernelFamily;

/// Which resampling potential drives the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// k-NN radii in output space stand in for the Jacobian.
    #[serde(alias = "knn")]
    DerivativeFree,
    /// Closed-form or numerical `J_m f` times the inverse proposal density.
    Jacobian,
}

/// All tunables of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    #[serde(rename = "N", alias = "n")]
    pub n: usize,
    /// Uniform mixture weight, in (0, 1).
    pub q: f64,
    /// Perturbation bandwidth.
    pub h: f64,
    /// Truncation level; `None` picks the algorithm default.
    #[serde(default, with = "level", skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Neighbour count for the derivative-free weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub max_iterations: usize,
    /// Relative W1 change below which the run stops.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_tol: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub kernel: KernelFamily,
    /// Use finite differences when the model has no analytic Jacobian.
    #[serde(default)]
    pub finite_difference_jacobian: bool,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, n: usize, q: f64, h: f64, max_iterations: usize) -> Self {
        RunConfig {
            algorithm,
            n,
            q,
            h,
            b: None,
            k: None,
            max_iterations,
            stop_tol: None,
            seed: 0,
            kernel: KernelFamily::default(),
            finite_difference_jacobian: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn with_b(mut self, b: f64) -> Self {
        self.b = Some(b);
        self
    }

    pub fn with_stop_tol(mut self, tol: f64) -> Self {
        self.stop_tol = Some(tol);
        self
    }

    pub fn with_kernel(mut self, kernel: KernelFamily) -> Self {
        self.kernel = kernel;
        self
    }

    /// Default neighbour count `ceil(N^((m+2)/(2(m+1))))`.
    pub fn default_k(n: usize, m: usize) -> usize {
        let alpha = (m as f64 + 2.0) / (2.0 * (m as f64 + 1.0));
        ((n as f64).powf(alpha).ceil() as usize).clamp(1, n.max(1))
    }

    /// Effective neighbour count for a box of dimension `m`.
    pub fn k_for(&self, m: usize) -> usize {
        self.k.unwrap_or_else(|| Self::default_k(self.n, m))
    }

    /// Effective truncation level.
    pub fn b_for(&self, bx: &ParamBox) -> f64 {
        self.b.unwrap_or(match self.algorithm {
            Algorithm::Jacobian => f64::INFINITY,
            Algorithm::DerivativeFree => 1e3 * self.q / bx.volume(),
        })
    }

    /// Checks every constraint and fills in `k` and `b`.
    pub fn resolve(&self, bx: &ParamBox) -> Result<RunConfig> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n < 2 {
            return bad(format!("N = {} must be at least 2", self.n));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return bad(format!("q = {} must lie in (0, 1)", self.q));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("h = {} must be positive", self.h));
        }
        if self.h >= bx.min_width() {
            return Err(Error::BandwidthTooLarge {
                h: self.h,
                min_width: bx.min_width(),
            });
        }
        let k = self.k_for(bx.dim());
        if k < 1 || k > self.n {
            return bad(format!("k = {k} must lie in [1, N = {}]", self.n));
        }
        let b = self.b_for(bx);
        let floor = self.q / bx.volume();
        if b.is_nan() || b <= floor {
            return bad(format!("b = {b} must exceed q / volume = {floor}"));
        }
        if let Some(tol) = self.stop_tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return bad(format!("stop_tol = {tol} must be positive"));
            }
        }
        Ok(RunConfig {
            k: Some(k),
            b: Some(b),
            ..self.clone()
        })
    }
}

/// Truncation levels serialize as numbers, with `"inf"` for no truncation.
mod level {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(b: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match b {
            Some(v) if v.is_infinite() => s.serialize_str("inf"),
            Some(v) => s.serialize_f64(*v),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Number(v)) => Ok(Some(v)),
            Some(Repr::Text(t)) => match t.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "+inf" => Ok(Some(f64::INFINITY)),
                other => Err(serde::de::Error::custom(format!(
                    "b must be a number or \"inf\", got {other:?}"
                ))),
            },
        }
    }
}

use crate::domain::Model;
use crate::error::Result;

/// `f(x) = x`; its image is the parameter box itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentityModel {
    pub dim: usize,
}

impl Model for IdentityModel {
    fn dim_in(&self) -> usize {
        self.dim
    }

    fn dim_out(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.to_vec())
    }

    fn jacobian(&self, _x: &[f64]) -> Option<f64> {
        Some(1.0)
    }

    fn log_jacobian(&self, _x: &[f64]) -> Option<f64> {
        Some(0.0)
    }
}

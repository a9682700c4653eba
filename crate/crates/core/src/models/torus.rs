use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::domain::{Model, ParamBox};
use crate::error::{Error, Result};

/// Ring torus in `R^3` parameterized by tube angle `theta` and ring angle
/// `psi`, both in `[0, 2 pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TorusModel {
    /// Distance from the torus center to the tube center.
    #[serde(rename = "R")]
    pub major: f64,
    /// Tube radius.
    #[serde(rename = "r")]
    pub minor: f64,
}

impl Default for TorusModel {
    fn default() -> Self {
        TorusModel {
            major: 1.0,
            minor: 0.9,
        }
    }
}

impl TorusModel {
    pub fn new(major: f64, minor: f64) -> Result<Self> {
        if !(minor > 0.0 && minor < major && major.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "torus radii need 0 < r < R, got R = {major}, r = {minor}"
            )));
        }
        Ok(TorusModel { major, minor })
    }

    pub fn param_box() -> ParamBox {
        ParamBox::cube(2, 0.0, TAU).expect("valid box")
    }

    pub fn map(&self, theta: f64, psi: f64) -> [f64; 3] {
        let ring = self.major + self.minor * theta.cos();
        [ring * psi.cos(), ring * psi.sin(), self.minor * theta.sin()]
    }

    /// `J_2 f = r (R + r cos theta)`.
    pub fn area_element(&self, theta: f64) -> f64 {
        self.minor * (self.major + self.minor * theta.cos())
    }

    /// Tube angle of a point on the surface, in `(-pi, pi]`.
    pub fn tube_angle(&self, y: &[f64]) -> f64 {
        let rho = y[0].hypot(y[1]);
        (y[2] / self.minor).atan2((rho - self.major) / self.minor)
    }
}

impl Model for TorusModel {
    fn dim_in(&self) -> usize {
        2
    }

    fn dim_out(&self) -> usize {
        3
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.map(x[0], x[1]).to_vec())
    }

    fn differential(&self, x: &[f64]) -> Option<Vec<f64>> {
        let (st, ct) = x[0].sin_cos();
        let (sp, cp) = x[1].sin_cos();
        let ring = self.major + self.minor * ct;
        let r = self.minor;
        Some(vec![
            -r * st * cp,
            -ring * sp,
            -r * st * sp,
            ring * cp,
            r * ct,
            0.0,
        ])
    }

    fn jacobian(&self, x: &[f64]) -> Option<f64> {
        Some(self.area_element(x[0]))
    }
}

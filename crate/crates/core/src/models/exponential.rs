use serde::{Deserialize, Serialize};

use crate::domain::{Model, ParamBox};
use crate::error::{Error, Result};

/// Sums of two exponential decays observed at three times:
/// `f_k(theta, psi) = exp(-theta t_k) + exp(-psi t_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentialModel {
    pub t: [f64; 3],
}

impl Default for ExponentialModel {
    fn default() -> Self {
        ExponentialModel { t: [1.0, 2.0, 4.0] }
    }
}

impl ExponentialModel {
    pub fn new(t: [f64; 3]) -> Result<Self> {
        if !(t[0] > 0.0 && t[0] < t[1] && t[1] < t[2] && t[2].is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "observation times need 0 < t1 < t2 < t3, got {t:?}"
            )));
        }
        Ok(ExponentialModel { t })
    }

    pub fn param_box() -> ParamBox {
        ParamBox::cube(2, 0.0, 100.0).expect("valid box")
    }

    /// `ln J_2 f` from the three 2x2 minors of `Df`,
    /// `t_i t_j (exp(-theta t_i - psi t_j) - exp(-theta t_j - psi t_i))`,
    /// each kept in log form.
    pub fn log_area_element(&self, theta: f64, psi: f64) -> f64 {
        let t = &self.t;
        let mut logs = [0.0; 3];
        for (slot, (i, j)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
            let a = -theta * t[i] - psi * t[j];
            let b = -theta * t[j] - psi * t[i];
            // ln |e^a - e^b| = max(a, b) + ln(1 - e^-|a - b|)
            let gap = (a - b).abs();
            logs[slot] = (t[i] * t[j]).ln() + a.max(b) + (-(-gap).exp_m1()).ln();
        }
        0.5 * log_sum_exp(&logs.map(|l| 2.0 * l))
    }

    /// `J_2 f <= |t_i t_j|_2 exp(-(theta + psi) t_1)`, since every exponent
    /// in a minor is at most `-(theta + psi) t_1`.
    pub fn area_element_bound(&self, theta: f64, psi: f64) -> f64 {
        let t = &self.t;
        let norm = ((t[0] * t[1]).powi(2) + (t[0] * t[2]).powi(2) + (t[1] * t[2]).powi(2)).sqrt();
        norm * (-(theta + psi) * t[0]).exp()
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

impl Model for ExponentialModel {
    fn dim_in(&self) -> usize {
        2
    }

    fn dim_out(&self) -> usize {
        3
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .t
            .iter()
            .map(|tk| (-x[0] * tk).exp() + (-x[1] * tk).exp())
            .collect())
    }

    fn differential(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut df = Vec::with_capacity(6);
        for tk in self.t {
            df.push(-tk * (-x[0] * tk).exp());
            df.push(-tk * (-x[1] * tk).exp());
        }
        Some(df)
    }

    fn jacobian(&self, x: &[f64]) -> Option<f64> {
        Some(self.log_area_element(x[0], x[1]).exp())
    }

    fn log_jacobian(&self, x: &[f64]) -> Option<f64> {
        Some(self.log_area_element(x[0], x[1]))
    }
}

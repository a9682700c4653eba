use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::ode::{integrate, Control, OdeOptions, StepView};
use crate::domain::{Model, ParamBox};
use crate::error::{Error, Result};

/// Fixed rate and Michaelis constants of the three-enzyme network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnzymeConstants {
    #[serde(rename = "kp_FAA")]
    pub kp_faa: f64,
    #[serde(rename = "kp_FBB")]
    pub kp_fbb: f64,
    #[serde(rename = "k_AC")]
    pub k_ac: f64,
    #[serde(rename = "kp_BC")]
    pub kp_bc: f64,
    #[serde(rename = "K_IA")]
    pub km_ia: f64,
    #[serde(rename = "Kp_FAA")]
    pub kmp_faa: f64,
    #[serde(rename = "K_CB")]
    pub km_cb: f64,
    #[serde(rename = "Kp_FBB")]
    pub kmp_fbb: f64,
    #[serde(rename = "K_AC")]
    pub km_ac: f64,
    #[serde(rename = "Kp_BC")]
    pub kmp_bc: f64,
}

impl Default for EnzymeConstants {
    fn default() -> Self {
        EnzymeConstants {
            kp_faa: 7.0437,
            kp_fbb: 0.1364,
            k_ac: 3.0061,
            kp_bc: 0.8395,
            km_ia: 0.0183,
            kmp_faa: 0.0016,
            km_cb: 0.0122,
            kmp_fbb: 0.0032,
            km_ac: 0.0044,
            kmp_bc: 0.0742,
        }
    }
}

/// Everything that fixes the experiment apart from the two free rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnzymeSettings {
    pub constants: EnzymeConstants,
    /// Input level before the stimulus.
    pub input_before: f64,
    /// Input level after the stimulus.
    pub input_after: f64,
    pub f_a: f64,
    pub f_b: f64,
    /// `(A, B, C)` at time zero.
    pub initial_state: [f64; 3],
    pub atol: f64,
    pub rtol: f64,
    /// Steady state: mean `|dy/dt|_inf` below this for `settle_time`.
    pub steady_tol: f64,
    pub settle_time: f64,
    /// Integration horizon of each phase.
    pub t_max: f64,
}

impl Default for EnzymeSettings {
    fn default() -> Self {
        EnzymeSettings {
            constants: EnzymeConstants::default(),
            input_before: 0.5,
            input_after: 0.6,
            f_a: 0.5,
            f_b: 0.5,
            initial_state: [0.0; 3],
            atol: 1e-9,
            rtol: 1e-7,
            steady_tol: 1e-6,
            settle_time: 10.0,
            t_max: 1000.0,
        }
    }
}

/// Adaptation response of the network to a step in its input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnzymeResponse {
    pub sensitivity: f64,
    pub precision: f64,
    pub c_before: f64,
    pub c_peak: f64,
    pub c_after: f64,
    /// Both phases reached a steady state before `t_max`.
    pub converged: bool,
}

/// Sensitivity and precision of the network as functions of
/// `u = ((log10 k_IA + 1) / 2, (log10 k_CB + 1) / 2)`.
#[derive(Debug, Default)]
pub struct EnzymeModel {
    settings: EnzymeSettings,
    unconverged: AtomicU64,
}

impl Clone for EnzymeModel {
    fn clone(&self) -> Self {
        EnzymeModel::new(self.settings).expect("settings were validated")
    }
}

impl EnzymeModel {
    pub fn new(settings: EnzymeSettings) -> Result<Self> {
        let s = &settings;
        if s.input_before == s.input_after {
            return Err(Error::InvalidConfig(
                "input_after must differ from input_before".into(),
            ));
        }
        if !(s.input_before > 0.0 && s.input_after > 0.0) {
            return Err(Error::InvalidConfig("input levels must be positive".into()));
        }
        if !(s.atol > 0.0 && s.rtol > 0.0 && s.steady_tol > 0.0 && s.settle_time > 0.0) {
            return Err(Error::InvalidConfig(
                "integrator tolerances must be positive".into(),
            ));
        }
        if s.t_max.is_nan() || s.t_max <= s.settle_time {
            return Err(Error::InvalidConfig("t_max must exceed settle_time".into()));
        }
        Ok(EnzymeModel {
            settings,
            unconverged: AtomicU64::new(0),
        })
    }

    pub fn settings(&self) -> &EnzymeSettings {
        &self.settings
    }

    pub fn param_box() -> ParamBox {
        ParamBox::new(vec![0.35, 0.0], vec![0.88, 1.0]).expect("valid box")
    }

    /// Evaluations so far whose phases hit `t_max` without settling.
    pub fn unconverged_count(&self) -> u64 {
        self.unconverged.load(Ordering::Relaxed)
    }

    pub fn rates(u: &[f64]) -> (f64, f64) {
        (10f64.powf(2.0 * u[0] - 1.0), 10f64.powf(2.0 * u[1] - 1.0))
    }

    /// Right-hand side at input level `input`.
    pub fn rhs(&self, k_ia: f64, k_cb: f64, input: f64, y: &[f64], dy: &mut [f64]) {
        let c = &self.settings.constants;
        let s = &self.settings;
        let (a, b, cc) = (y[0], y[1], y[2]);
        dy[0] = k_ia * input * (1.0 - a) / ((1.0 - a) + c.km_ia)
            - s.f_a * c.kp_faa * a / (a + c.kmp_faa);
        dy[1] =
            cc * k_cb * (1.0 - b) / ((1.0 - b) + c.km_cb) - s.f_b * c.kp_fbb * b / (b + c.kmp_fbb);
        dy[2] =
            a * c.k_ac * (1.0 - cc) / ((1.0 - cc) + c.km_ac) - b * c.kp_bc * cc / (cc + c.kmp_bc);
    }

    pub fn response(&self, u: &[f64]) -> Result<EnzymeResponse> {
        let s = &self.settings;
        let (k_ia, k_cb) = Self::rates(u);
        let before = self.settle(k_ia, k_cb, s.input_before, &s.initial_state, false)?;
        let after = self.settle(k_ia, k_cb, s.input_after, &before.state, true)?;
        let c0 = before.state[2];
        let c1 = after.state[2];
        let c_peak = after.peak.max(c0).max(c1);
        let stimulus = (s.input_after - s.input_before) / s.input_before;
        let converged = before.converged && after.converged;
        if !converged {
            self.unconverged.fetch_add(1, Ordering::Relaxed);
        }
        Ok(EnzymeResponse {
            sensitivity: (((c_peak - c0) / c0) / stimulus).abs(),
            precision: (stimulus / ((c1 - c0) / c0)).abs(),
            c_before: c0,
            c_peak,
            c_after: c1,
            converged,
        })
    }

    /// Integrates to steady state, then polishes it with Newton's method.
    fn settle(
        &self,
        k_ia: f64,
        k_cb: f64,
        input: f64,
        start: &[f64],
        track_peak: bool,
    ) -> Result<Settled> {
        let s = &self.settings;
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| self.rhs(k_ia, k_cb, input, y, dy);
        let opts = OdeOptions {
            atol: s.atol,
            rtol: s.rtol,
            h_max: 1.0,
            ..OdeOptions::default()
        };
        // Velocity is measured across probe windows of unit length: at the
        // stiff fixed point the pointwise derivative chatters at the
        // integrator's tolerance.
        let mut anchor = (0.0, start.to_vec());
        let mut quiet_since: Option<f64> = None;
        let mut peak = start[2];
        let end = integrate(rhs, 0.0, start, s.t_max, &opts, |step| {
            if track_peak {
                peak = peak.max(step.y1[2]);
                let h = step.t1 - step.t0;
                if step.y0[2].max(step.y1[2]) + h * step.dy0[2].abs() > peak {
                    peak = peak.max(self.peak_in_step(k_ia, k_cb, input, step));
                }
            }
            let span = step.t1 - anchor.0;
            if span >= PROBE_WINDOW {
                let moved = step
                    .y1
                    .iter()
                    .zip(&anchor.1)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                if moved / span < s.steady_tol {
                    let since = *quiet_since.get_or_insert(anchor.0);
                    if step.t1 - since >= s.settle_time {
                        return Control::Stop;
                    }
                } else {
                    quiet_since = None;
                }
                anchor = (step.t1, step.y1.to_vec());
            }
            Control::Continue
        })?;
        let state = self
            .newton_polish(k_ia, k_cb, input, &end.y)
            .unwrap_or(end.y);
        Ok(Settled {
            state,
            peak,
            converged: end.stopped,
        })
    }

    /// Largest `C` at an interior local maximum of the step's dense output.
    fn peak_in_step(&self, k_ia: f64, k_cb: f64, input: f64, step: &StepView) -> f64 {
        if !(step.dy0[2] > 0.0 && step.dy1[2] <= 0.0) {
            return f64::NEG_INFINITY;
        }
        let slope = |t: f64| {
            let y = step.interpolate(t);
            let mut dy = [0.0; 3];
            self.rhs(k_ia, k_cb, input, &y, &mut dy);
            dy[2]
        };
        let (mut lo, mut hi) = (step.t0, step.t1);
        for _ in 0..48 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        step.interpolate(0.5 * (lo + hi))[2]
    }

    /// Newton on the steady-state equations from a nearby integrated state.
    /// `None` unless it converges to a nearby point inside the unit cube.
    fn newton_polish(&self, k_ia: f64, k_cb: f64, input: f64, y: &[f64]) -> Option<Vec<f64>> {
        let f = |v: &Vector3<f64>| {
            let mut dy = [0.0; 3];
            self.rhs(k_ia, k_cb, input, v.as_slice(), &mut dy);
            Vector3::from(dy)
        };
        let start = Vector3::new(y[0], y[1], y[2]);
        let mut x = start;
        for _ in 0..20 {
            let fx = f(&x);
            if fx.amax() < 1e-15 {
                break;
            }
            let mut jac = Matrix3::zeros();
            for j in 0..3 {
                let step = 1e-7 * x[j].abs().max(1e-3);
                let mut up = x;
                let mut down = x;
                up[j] += step;
                down[j] -= step;
                jac.set_column(j, &((f(&up) - f(&down)) / (2.0 * step)));
            }
            x -= jac.lu().solve(&fx)?;
        }
        let close = (x - start).amax() < 1e-4;
        let inside = x.iter().all(|v| (0.0..=1.0).contains(v));
        (f(&x).amax() < 1e-12 && close && inside).then(|| x.as_slice().to_vec())
    }
}

const PROBE_WINDOW: f64 = 1.0;

struct Settled {
    state: Vec<f64>,
    peak: f64,
    converged: bool,
}

impl Model for EnzymeModel {
    fn dim_in(&self) -> usize {
        2
    }

    fn dim_out(&self) -> usize {
        2
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = self.response(x)?;
        Ok(vec![r.sensitivity, r.precision])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_from_unit_coordinates() {
        let (a, b) = EnzymeModel::rates(&[0.5, 0.0]);
        assert!((a - 1.0).abs() < 1e-15 && (b - 0.1).abs() < 1e-15);
    }

    #[test]
    fn equal_inputs_are_rejected() {
        let s = EnzymeSettings {
            input_after: 0.5,
            ..EnzymeSettings::default()
        };
        assert!(EnzymeModel::new(s).is_err());
    }

    #[test]
    fn midpoint_response_is_finite_and_settled() {
        let m = EnzymeModel::default();
        let r = m.response(&[0.615, 0.5]).unwrap();
        assert!(r.converged);
        assert!(r.sensitivity.is_finite() && r.sensitivity > 0.0);
        assert!(r.precision.is_finite() && r.precision > 0.0);
        assert!(r.c_peak >= r.c_before.max(r.c_after));
        for c in [r.c_before, r.c_peak, r.c_after] {
            assert!((0.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn steady_states_are_roots() {
        let m = EnzymeModel::default();
        let (k_ia, k_cb) = EnzymeModel::rates(&[0.6, 0.4]);
        let s = m.settle(k_ia, k_cb, 0.5, &[0.0; 3], false).unwrap();
        let mut dy = [0.0; 3];
        m.rhs(k_ia, k_cb, 0.5, &s.state, &mut dy);
        assert!(dy.iter().all(|v| v.abs() < 1e-12), "{dy:?}");
    }

    #[test]
    fn trajectories_stay_in_the_unit_cube() {
        let m = EnzymeModel::default();
        let (k_ia, k_cb) = EnzymeModel::rates(&[0.8, 0.9]);
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| m.rhs(k_ia, k_cb, 0.5, y, dy);
        integrate(rhs, 0.0, &[0.0; 3], 100.0, &OdeOptions::default(), |step| {
            assert!(
                step.y1.iter().all(|v| (-1e-7..=1.0 + 1e-7).contains(v)),
                "{:?}",
                step.y1
            );
            Control::Continue
        })
        .unwrap();
    }

    #[test]
    fn coarse_grid_is_finite_and_flags_are_counted() {
        let m = EnzymeModel::default();
        let bx = EnzymeModel::param_box();
        let mut flagged = 0;
        for i in 0..5 {
            for j in 0..5 {
                let v = j as f64 / 4.0;
                let u = bx.from_unit(&[i as f64 / 4.0, v]);
                let r = m.response(&u).unwrap();
                assert!(
                    r.sensitivity.is_finite() && r.precision.is_finite(),
                    "{u:?} {r:?}"
                );
                // k_CB = 0.1 relaxes on a time scale of hundreds of units
                if v > 0.0 {
                    assert!(r.converged, "{u:?}");
                }
                flagged += u64::from(!r.converged);
            }
        }
        assert_eq!(m.unconverged_count(), flagged);
    }
}

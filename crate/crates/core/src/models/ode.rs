//! Explicit adaptive Runge–Kutta 5(4) (Dormand–Prince) with dense output.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub atol: f64,
    pub rtol: f64,
    /// Largest step; `inf` for none.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            atol: 1e-9,
            rtol: 1e-7,
            h_max: f64::INFINITY,
            max_steps: 10_000_000,
        }
    }
}

/// Whether the integration should go on after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// One accepted step, with the continuous extension over `[t0, t1]`.
pub struct StepView<'a> {
    pub t0: f64,
    pub t1: f64,
    pub y0: &'a [f64],
    pub y1: &'a [f64],
    /// `y'` at `t0` and `t1`.
    pub dy0: &'a [f64],
    pub dy1: &'a [f64],
    rcont: &'a [Vec<f64>; 5],
}

impl StepView<'_> {
    /// Dense output at `t` in `[t0, t1]`, fourth-order accurate.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let s = (t - self.t0) / (self.t1 - self.t0);
        let s1 = 1.0 - s;
        let [r1, r2, r3, r4, r5] = self.rcont;
        (0..r1.len())
            .map(|i| r1[i] + s * (r2[i] + s1 * (r3[i] + s * (r4[i] + s1 * r5[i]))))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct OdeEnd {
    pub t: f64,
    pub y: Vec<f64>,
    pub steps: usize,
    /// `true` when the observer stopped the run before `t_end`.
    pub stopped: bool,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrates `y' = rhs(t, y)` from `t0` to `t_end`, handing every accepted
/// step to `observer`.
pub fn integrate<F, O>(
    mut rhs: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &OdeOptions,
    mut observer: O,
) -> Result<OdeEnd>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(&StepView) -> Control,
{
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let mut stage = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut rcont: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
    rhs(t, &y, &mut k1);

    let mut h = initial_step(&mut rhs, t, &y, &k1, t_end, opts).min(opts.h_max);
    let mut steps = 0;
    let mut rejected_last = false;
    while t < t_end {
        if steps >= opts.max_steps {
            return Err(Error::Model(format!(
                "ODE step limit {} reached at t = {t}",
                opts.max_steps
            )));
        }
        if t + 1.01 * h >= t_end {
            h = t_end - t;
        }
        macro_rules! stage {
            ($($a:expr, $k:expr),+) => {{
                for i in 0..n {
                    stage[i] = y[i] + h * (0.0 $(+ $a * $k[i])+);
                }
            }};
        }
        stage!(A21, k1);
        rhs(t + C2 * h, &stage, &mut k2);
        stage!(A31, k1, A32, k2);
        rhs(t + C3 * h, &stage, &mut k3);
        stage!(A41, k1, A42, k2, A43, k3);
        rhs(t + C4 * h, &stage, &mut k4);
        stage!(A51, k1, A52, k2, A53, k3, A54, k4);
        rhs(t + C5 * h, &stage, &mut k5);
        stage!(A61, k1, A62, k2, A63, k3, A64, k4, A65, k5);
        rhs(t + h, &stage, &mut k6);
        for i in 0..n {
            y1[i] =
                y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs(t + h, &y1, &mut k7);

        let mut err = 0.0;
        for i in 0..n {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y1[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            h *= 0.1;
            rejected_last = true;
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::Model(format!("ODE step size underflow at t = {t}")));
            }
            continue;
        }
        let factor = (0.9 * err.powf(-0.2)).clamp(0.2, 10.0);
        if err <= 1.0 {
            steps += 1;
            let t1 = if h == t_end - t { t_end } else { t + h };
            for i in 0..n {
                let diff = y1[i] - y[i];
                let bspl = h * k1[i] - diff;
                rcont[0][i] = y[i];
                rcont[1][i] = diff;
                rcont[2][i] = bspl;
                rcont[3][i] = diff - h * k7[i] - bspl;
                rcont[4][i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let control = observer(&StepView {
                t0: t,
                t1,
                y0: &y,
                y1: &y1,
                dy0: &k1,
                dy1: &k7,
                rcont: &rcont,
            });
            t = t1;
            std::mem::swap(&mut y, &mut y1);
            std::mem::swap(&mut k1, &mut k7);
            if control == Control::Stop {
                return Ok(OdeEnd {
                    t,
                    y,
                    steps,
                    stopped: true,
                });
            }
            let grow = if rejected_last {
                factor.min(1.0)
            } else {
                factor
            };
            h = (h * grow).min(opts.h_max);
            rejected_last = false;
        } else {
            h *= factor.min(1.0);
            rejected_last = true;
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::Model(format!("ODE step size underflow at t = {t}")));
            }
        }
    }
    Ok(OdeEnd {
        t,
        y,
        steps,
        stopped: false,
    })
}

/// Starting step from the size of `y` and its first two derivatives.
fn initial_step<F>(rhs: &mut F, t: f64, y: &[f64], dy: &[f64], t_end: f64, opts: &OdeOptions) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let scale: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let rms = |v: &[f64]| {
        (v.iter()
            .zip(&scale)
            .map(|(a, s)| (a / s).powi(2))
            .sum::<f64>()
            / n as f64)
            .sqrt()
    };
    let d0 = rms(y);
    let d1 = rms(dy);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(t_end - t);
    let probe: Vec<f64> = y.iter().zip(dy).map(|(a, b)| a + h0 * b).collect();
    let mut dy2 = vec![0.0; n];
    rhs(t + h0, &probe, &mut dy2);
    let diff: Vec<f64> = dy2.iter().zip(dy).map(|(a, b)| (a - b) / h0).collect();
    let d2 = rms(&diff);
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(t_end - t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(opts: &OdeOptions) -> f64 {
        let end = integrate(
            |_, y, dy| dy[0] = -y[0],
            0.0,
            &[1.0],
            1.0,
            opts,
            |_| Control::Continue,
        )
        .unwrap();
        assert_eq!(end.t, 1.0);
        (end.y[0] - (-1.0f64).exp()).abs()
    }

    #[test]
    fn exponential_decay() {
        assert!(decay(&OdeOptions::default()) < 1e-7);
        let tight = OdeOptions {
            atol: 1e-12,
            rtol: 1e-10,
            ..OdeOptions::default()
        };
        assert!(decay(&tight) < 1e-9);
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let opts = OdeOptions {
            atol: 1e-12,
            rtol: 1e-12,
            ..OdeOptions::default()
        };
        let mut worst: f64 = 0.0;
        integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[0.0, 1.0],
            10.0,
            &opts,
            |step| {
                for k in 1..4 {
                    let t = step.t0 + (step.t1 - step.t0) * k as f64 / 4.0;
                    let y = step.interpolate(t);
                    worst = worst.max((y[0] - t.sin()).abs());
                }
                Control::Continue
            },
        )
        .unwrap();
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn dense_output_hits_step_ends() {
        integrate(
            |t, _y, dy| dy[0] = t.cos(),
            0.0,
            &[0.0],
            3.0,
            &OdeOptions::default(),
            |step| {
                assert!((step.interpolate(step.t0)[0] - step.y0[0]).abs() < 1e-15);
                assert!((step.interpolate(step.t1)[0] - step.y1[0]).abs() < 1e-13);
                Control::Continue
            },
        )
        .unwrap();
    }

    #[test]
    fn observer_can_stop() {
        let end = integrate(
            |_, y, dy| dy[0] = y[0],
            0.0,
            &[1.0],
            10.0,
            &OdeOptions::default(),
            |step| {
                if step.t1 > 1.0 {
                    Control::Stop
                } else {
                    Control::Continue
                }
            },
        )
        .unwrap();
        assert!(end.stopped && end.t > 1.0 && end.t < 10.0);
    }

    #[test]
    fn polynomial_of_degree_four_is_exact() {
        let end = integrate(
            |t, _y, dy| dy[0] = t.powi(4),
            0.0,
            &[0.0],
            2.0,
            &OdeOptions::default(),
            |_| Control::Continue,
        )
        .unwrap();
        assert!((end.y[0] - 32.0 / 5.0).abs() < 1e-12);
    }
}

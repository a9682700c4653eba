//! Compactly supported smoothing kernels and their boundary-reflected form.
//!
//! The multivariate kernel is a product of a 1-D profile, so its support is the
//! sup-norm ball of radius `h`. Reflection across the faces of the box then acts
//! coordinate by coordinate, which makes both evaluation and sampling exact.

use std::sync::{Arc, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::ParamBox;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    #[default]
    Biweight,
    Triweight,
    Tricube,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 3] = [
        KernelFamily::Biweight,
        KernelFamily::Triweight,
        KernelFamily::Tricube,
    ];

    /// The 1-D profile, normalized to unit mass on `[-1, 1]`.
    pub fn profile(self, u: f64) -> f64 {
        if u.is_nan() || u.abs() >= 1.0 {
            return 0.0;
        }
        match self {
            KernelFamily::Biweight => 15.0 / 16.0 * (1.0 - u * u).powi(2),
            KernelFamily::Triweight => 35.0 / 32.0 * (1.0 - u * u).powi(3),
            KernelFamily::Tricube => 70.0 / 81.0 * (1.0 - u.abs().powi(3)).powi(3),
        }
    }

    /// Derivative of the profile.
    pub fn profile_slope(self, u: f64) -> f64 {
        if u.is_nan() || u.abs() >= 1.0 {
            return 0.0;
        }
        match self {
            KernelFamily::Biweight => -15.0 / 4.0 * u * (1.0 - u * u),
            KernelFamily::Triweight => -105.0 / 16.0 * u * (1.0 - u * u).powi(2),
            KernelFamily::Tricube => -70.0 / 9.0 * u * u.abs() * (1.0 - u.abs().powi(3)).powi(2),
        }
    }

    /// Closed-form CDF of the profile.
    pub fn cdf(self, u: f64) -> f64 {
        if u <= -1.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        let half_mass = match self {
            KernelFamily::Biweight => 15.0 / 16.0 * (u - 2.0 * u.powi(3) / 3.0 + u.powi(5) / 5.0),
            KernelFamily::Triweight => {
                35.0 / 32.0 * (u - u.powi(3) + 3.0 * u.powi(5) / 5.0 - u.powi(7) / 7.0)
            }
            KernelFamily::Tricube => {
                let a = u.abs();
                let g = a - 0.75 * a.powi(4) + 3.0 * a.powi(7) / 7.0 - a.powi(10) / 10.0;
                (70.0 / 81.0 * g).copysign(u)
            }
        };
        0.5 + half_mass
    }

    /// Product kernel on the unit sup-ball, unscaled.
    pub fn eval_base(self, u: &[f64]) -> f64 {
        u.iter().map(|&v| self.profile(v)).product()
    }

    fn inverse_cdf_table(self) -> &'static InverseCdf {
        static TABLES: [OnceLock<InverseCdf>; 3] =
            [OnceLock::new(), OnceLock::new(), OnceLock::new()];
        let idx = self as usize;
        TABLES[idx].get_or_init(|| InverseCdf::new(self))
    }

    /// Draws from the 1-D profile by inverting its CDF.
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        self.inverse_cdf_table().invert(rng.random::<f64>())
    }

    /// Lipschitz bounds `(|zeta_h|_Lip, |grad zeta_h|_Lip)` of the scaled
    /// product kernel in dimension `m`, from grid suprema of the 1-D profile's
    /// first and second derivatives.
    pub fn lipschitz_bounds(self, h: f64, m: usize) -> (f64, f64) {
        let grid = 20_001;
        let du = 2.0 / (grid - 1) as f64;
        let mut slope = 0.0f64;
        let mut curvature = 0.0f64;
        let mut prev = self.profile_slope(-1.0);
        for i in 1..grid {
            let u = -1.0 + i as f64 * du;
            let s = self.profile_slope(u);
            slope = slope.max(s.abs());
            curvature = curvature.max(((s - prev) / du).abs());
            prev = s;
        }
        let peak = self.profile(0.0);
        let mf = m as f64;
        let lip = h.powi(-(m as i32) - 1) * mf.sqrt() * slope * peak.powi(m as i32 - 1);
        let cross = if m >= 2 {
            slope * slope * peak.powi(m as i32 - 2)
        } else {
            0.0
        };
        let grad_lip =
            h.powi(-(m as i32) - 2) * mf * (curvature * peak.powi(m as i32 - 1)).max(cross);
        (lip, grad_lip)
    }
}

const INVERSE_CDF_KNOTS: usize = 4096;

/// Tabulated CDF on a uniform knot grid, refined by safeguarded Newton steps.
struct InverseCdf {
    family: KernelFamily,
    knots: Vec<f64>,
    cdf: Vec<f64>,
}

impl InverseCdf {
    fn new(family: KernelFamily) -> Self {
        let knots: Vec<f64> = (0..INVERSE_CDF_KNOTS)
            .map(|i| -1.0 + 2.0 * i as f64 / (INVERSE_CDF_KNOTS - 1) as f64)
            .collect();
        let cdf = knots.iter().map(|&u| family.cdf(u)).collect();
        InverseCdf { family, knots, cdf }
    }

    fn invert(&self, p: f64) -> f64 {
        let j = self
            .cdf
            .partition_point(|&c| c <= p)
            .clamp(1, self.knots.len() - 1);
        let (mut lo, mut hi) = (self.knots[j - 1], self.knots[j]);
        let (clo, chi) = (self.cdf[j - 1], self.cdf[j]);
        let mut u = if chi > clo {
            lo + (hi - lo) * (p - clo) / (chi - clo)
        } else {
            lo
        };
        for _ in 0..4 {
            let r = self.family.cdf(u) - p;
            if r > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let d = self.family.profile(u);
            let next = if d > 0.0 { u - r / d } else { f64::NAN };
            u = if next >= lo && next <= hi {
                next
            } else {
                0.5 * (lo + hi)
            };
        }
        u
    }
}

/// `zeta_h` folded back into the box by mirror reflection across each face.
#[derive(Debug, Clone)]
pub struct ReflectedKernel {
    family: KernelFamily,
    h: f64,
    inv_volume: f64,
    bx: Arc<ParamBox>,
}

impl ReflectedKernel {
    /// Requires `h` below every side length so at most one reflection per
    /// coordinate contributes.
    pub fn new(family: KernelFamily, h: f64, bx: Arc<ParamBox>) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "bandwidth {h} must be positive"
            )));
        }
        if h >= bx.min_width() {
            return Err(Error::BandwidthTooLarge {
                h,
                min_width: bx.min_width(),
            });
        }
        let inv_volume = h.powi(-(bx.dim() as i32));
        Ok(ReflectedKernel {
            family,
            h,
            inv_volume,
            bx,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn param_box(&self) -> &ParamBox {
        &self.bx
    }

    /// `zeta_h(v) = h^-m zeta(v / h)`.
    pub fn eval_scaled(&self, v: &[f64]) -> f64 {
        let mut prod = 1.0;
        for &vi in v {
            prod *= self.family.profile(vi / self.h);
        }
        prod * self.inv_volume
    }

    /// The reflected kernel `sum over reflected centers y' of zeta_h(x - y')`.
    ///
    /// Centers are enumerated in the order original, reflection across the
    /// lower face, reflection across the upper face, with coordinate 0 varying
    /// fastest; candidates whose factor vanishes are skipped.
    pub fn eval_reflected(&self, x: &[f64], y: &[f64]) -> f64 {
        let m = x.len();
        let mut factors = [[0.0f64; 3]; MAX_INLINE_DIM];
        let mut counts = [0usize; MAX_INLINE_DIM];
        if m > MAX_INLINE_DIM {
            return self.eval_reflected_dense(x, y);
        }
        for i in 0..m {
            let lo = self.bx.lower()[i];
            let hi = self.bx.upper()[i];
            let centers = [y[i], 2.0 * lo - y[i], 2.0 * hi - y[i]];
            let mut c = 0;
            for center in centers {
                let f = self.family.profile((x[i] - center) / self.h);
                if f != 0.0 {
                    factors[i][c] = f;
                    c += 1;
                }
            }
            if c == 0 {
                return 0.0;
            }
            counts[i] = c;
        }
        let mut digits = [0usize; MAX_INLINE_DIM];
        let mut sum = 0.0;
        loop {
            let mut prod = 1.0;
            for i in 0..m {
                prod *= factors[i][digits[i]];
            }
            sum += prod * self.inv_volume;
            let mut i = 0;
            loop {
                if i == m {
                    return sum;
                }
                digits[i] += 1;
                if digits[i] < counts[i] {
                    break;
                }
                digits[i] = 0;
                i += 1;
            }
        }
    }

    /// Same value as [`eval_reflected`](Self::eval_reflected) by the factored
    /// form, used above the inline dimension limit.
    fn eval_reflected_dense(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut prod = self.inv_volume;
        for i in 0..x.len() {
            let lo = self.bx.lower()[i];
            let hi = self.bx.upper()[i];
            let s = self.family.profile((x[i] - y[i]) / self.h)
                + self.family.profile((x[i] - (2.0 * lo - y[i])) / self.h)
                + self.family.profile((x[i] - (2.0 * hi - y[i])) / self.h);
            prod *= s;
        }
        prod
    }

    /// Draws from `zeta_h(. ; y)` restricted to the box: kernel step, then fold
    /// each coordinate back across the face it crossed.
    pub fn sample_reflected<R: Rng + ?Sized>(&self, y: &[f64], rng: &mut R) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(i, &yi)| {
                let lo = self.bx.lower()[i];
                let hi = self.bx.upper()[i];
                let mut z = yi + self.h * self.family.sample(rng);
                if z < lo {
                    z = 2.0 * lo - z;
                } else if z > hi {
                    z = 2.0 * hi - z;
                }
                z.clamp(lo, hi)
            })
            .collect()
    }
}

const MAX_INLINE_DIM: usize = 16;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;
    use crate::rng::substream;

    fn kernel(family: KernelFamily, h: f64, lower: Vec<f64>, upper: Vec<f64>) -> ReflectedKernel {
        ReflectedKernel::new(family, h, Arc::new(ParamBox::new(lower, upper).unwrap())).unwrap()
    }

    /// 1024-interval composite Simpson on [-1, 1].
    fn simpson(f: impl Fn(f64) -> f64) -> f64 {
        let n = 1024;
        let dx = 2.0 / n as f64;
        let mut s = f(-1.0) + f(1.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(-1.0 + i as f64 * dx);
        }
        s * dx / 3.0
    }

    #[test]
    fn biweight_peak() {
        assert_eq!(KernelFamily::Biweight.profile(0.0), 0.9375);
        assert_eq!(KernelFamily::Biweight.eval_base(&[0.0]), 0.9375);
    }

    #[test]
    fn compact_support() {
        for fam in KernelFamily::ALL {
            assert_eq!(fam.eval_base(&[0.2, 1.0001]), 0.0);
            assert_eq!(fam.eval_base(&[-1.5]), 0.0);
            assert_eq!(fam.profile(1.0), 0.0);
        }
    }

    #[test]
    fn profiles_have_unit_mass() {
        for fam in KernelFamily::ALL {
            let mass = simpson(|u| fam.profile(u));
            assert!((mass - 1.0).abs() < 1e-10, "{fam:?}: {mass}");
        }
    }

    #[test]
    fn cdf_matches_integrated_profile() {
        for fam in KernelFamily::ALL {
            for &u in &[-0.9, -0.3, 0.0, 0.4, 0.77] {
                let (nodes, weights) = gauss_legendre(32);
                // integrate profile over [-1, u]; tricube has a kink at 0
                let pieces: Vec<(f64, f64)> = if u > 0.0 {
                    vec![(-1.0, 0.0), (0.0, u)]
                } else {
                    vec![(-1.0, u)]
                };
                let mut mass = 0.0;
                for (a, b) in pieces {
                    for (t, w) in nodes.iter().zip(&weights) {
                        let s = 0.5 * (b - a) * t + 0.5 * (a + b);
                        mass += 0.5 * (b - a) * w * fam.profile(s);
                    }
                }
                assert!((fam.cdf(u) - mass).abs() < 1e-13, "{fam:?} at {u}");
            }
        }
    }

    #[test]
    fn slope_matches_finite_differences() {
        for fam in KernelFamily::ALL {
            for &u in &[-0.8, -0.2, 0.1, 0.6] {
                let d = 1e-6;
                let fd = (fam.profile(u + d) - fam.profile(u - d)) / (2.0 * d);
                assert!((fd - fam.profile_slope(u)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn inverse_cdf_roundtrip() {
        for fam in KernelFamily::ALL {
            let table = InverseCdf::new(fam);
            for i in 1..200 {
                let p = i as f64 / 200.0;
                let u = table.invert(p);
                assert!(
                    (fam.cdf(u) - p).abs() < 1e-12,
                    "{fam:?} p={p} u={u} err={}",
                    fam.cdf(u) - p
                );
            }
        }
    }

    #[test]
    fn reflection_at_a_face_doubles_the_center() {
        let k = kernel(KernelFamily::Biweight, 0.5, vec![0.0], vec![1.0]);
        let plain = k.eval_scaled(&[0.0]);
        assert_eq!(k.eval_reflected(&[0.0], &[0.0]), 2.0 * plain);
    }

    #[test]
    fn interior_pairs_are_unaffected() {
        let k = kernel(KernelFamily::Triweight, 0.2, vec![0.0, 0.0], vec![1.0, 1.0]);
        let (x, y) = ([0.45, 0.5], [0.55, 0.42]);
        let v = [x[0] - y[0], x[1] - y[1]];
        assert_eq!(k.eval_reflected(&x, &y), k.eval_scaled(&v));
    }

    #[test]
    fn bandwidth_bound_is_enforced() {
        let bx = Arc::new(ParamBox::new(vec![0.0, 0.0], vec![1.0, 0.3]).unwrap());
        assert!(matches!(
            ReflectedKernel::new(KernelFamily::Biweight, 0.3, bx),
            Err(Error::BandwidthTooLarge { .. })
        ));
    }

    #[test]
    fn zero_beyond_sup_distance_h() {
        let k = kernel(KernelFamily::Tricube, 0.3, vec![0.0, 0.0], vec![1.0, 1.0]);
        assert_eq!(k.eval_reflected(&[0.0, 0.0], &[0.31, 0.0]), 0.0);
        assert!(k.eval_reflected(&[0.0, 0.0], &[0.29, 0.29]) > 0.0);
    }

    #[test]
    fn interior_samples_are_symmetric() {
        let k = kernel(KernelFamily::Biweight, 0.2, vec![0.0], vec![1.0]);
        let mut rng = substream(3, &[]);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| k.sample_reflected(&[0.5], &mut rng)[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 3.0 * (var / n as f64).sqrt());
        assert!(xs.iter().all(|x| (x - 0.5).abs() <= 0.2));
    }

    #[test]
    fn lipschitz_bounds_scale_with_bandwidth() {
        let (a1, b1) = KernelFamily::Biweight.lipschitz_bounds(1.0, 2);
        let (a2, b2) = KernelFamily::Biweight.lipschitz_bounds(0.5, 2);
        assert!((a2 / a1 - 8.0).abs() < 1e-9);
        assert!((b2 / b1 - 16.0).abs() < 1e-9);
        // 1-D biweight: max |slope| = 15/4 * max u(1-u^2) = 15/4 * 2/(3 sqrt 3)
        let (l, _) = KernelFamily::Biweight.lipschitz_bounds(1.0, 1);
        assert!((l - 15.0 / 4.0 * 2.0 / (3.0 * 3f64.sqrt())).abs() < 1e-6);
    }
}

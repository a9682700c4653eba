use nalgebra::DMatrix;
use rayon::prelude::*;

use super::ParamBox;
use crate::error::{Error, Result};

/// A black-box computer experiment `f: P -> R^n`.
///
/// Implementations must be deterministic. `eval` may be called from many
/// threads at once unless [`Model::is_reentrant`] returns `false`.
pub trait Model: Send + Sync {
    /// Parameter dimension `m`.
    fn dim_in(&self) -> usize;

    /// Output dimension `n >= m`.
    fn dim_out(&self) -> usize;

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// The `n x m` differential `Df(x)`, row-major with one row per output
    /// coordinate.
    fn differential(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Closed-form `J_m f(x)` when the model knows one.
    fn jacobian(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Closed-form `ln J_m f(x)`; override when `J_m f` can underflow.
    fn log_jacobian(&self, x: &[f64]) -> Option<f64> {
        self.jacobian(x).map(f64::ln)
    }

    /// Whether `eval` can run concurrently. Serial models are evaluated in order
    /// on the calling thread.
    fn is_reentrant(&self) -> bool {
        true
    }

    /// Evaluates a whole batch. Models backed by an external process override
    /// this to amortize process start-up.
    fn eval_batch(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if self.is_reentrant() {
            points.par_iter().map(|x| self.eval(x)).collect()
        } else {
            points.iter().map(|x| self.eval(x)).collect()
        }
    }
}

impl<M: Model + ?Sized> Model for std::sync::Arc<M> {
    fn dim_in(&self) -> usize {
        (**self).dim_in()
    }
    fn dim_out(&self) -> usize {
        (**self).dim_out()
    }
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).eval(x)
    }
    fn differential(&self, x: &[f64]) -> Option<Vec<f64>> {
        (**self).differential(x)
    }
    fn jacobian(&self, x: &[f64]) -> Option<f64> {
        (**self).jacobian(x)
    }
    fn log_jacobian(&self, x: &[f64]) -> Option<f64> {
        (**self).log_jacobian(x)
    }
    fn is_reentrant(&self) -> bool {
        (**self).is_reentrant()
    }
    fn eval_batch(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        (**self).eval_batch(points)
    }
}

/// Volume of the unit ball in `R^m`, `pi^(m/2) / Gamma(m/2 + 1)`.
pub fn unit_ball_volume(m: usize) -> f64 {
    assert!(m >= 1, "dimension must be positive");
    let half = m as f64 / 2.0;
    std::f64::consts::PI.powf(half) / statrs::function::gamma::gamma(half + 1.0)
}

/// How `J_m f` is obtained when the model has no closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JacobianFallback {
    /// Require a closed form or an analytic differential.
    #[default]
    Disabled,
    /// Central differences with step `eps^(1/3) * max(1, |x_i|)`.
    FiniteDifference,
}

/// `ln J_m f(x) = ln sqrt(det(Df^T Df))`; `-inf` where `Df` is rank deficient.
pub fn log_jacobian_m(
    model: &dyn Model,
    bx: &ParamBox,
    x: &[f64],
    fallback: JacobianFallback,
) -> Result<f64> {
    let value = if let Some(lj) = model.log_jacobian(x) {
        lj
    } else if let Some(df) = model.differential(x) {
        log_gram_sqrt_det(&df, model.dim_out(), model.dim_in())
    } else if fallback == JacobianFallback::FiniteDifference {
        let df = finite_difference_differential(model, bx, x)?;
        log_gram_sqrt_det(&df, model.dim_out(), model.dim_in())
    } else {
        return Err(Error::MissingDifferential);
    };
    if !value.is_nan() && value < f64::INFINITY {
        Ok(value)
    } else {
        Err(Error::NonFiniteJacobian {
            point: x.to_vec(),
            value: value.exp(),
        })
    }
}

/// `J_m f(x)`; fails where it is not finite.
pub fn jacobian_m(
    model: &dyn Model,
    bx: &ParamBox,
    x: &[f64],
    fallback: JacobianFallback,
) -> Result<f64> {
    let j = log_jacobian_m(model, bx, x, fallback)?.exp();
    if j.is_finite() {
        Ok(j)
    } else {
        Err(Error::NonFiniteJacobian {
            point: x.to_vec(),
            value: j,
        })
    }
}

/// `ln sqrt(det(Df^T Df))` for a row-major `n x m` matrix. Returns `-inf` when
/// the Gram matrix is singular.
pub fn log_gram_sqrt_det(df: &[f64], n: usize, m: usize) -> f64 {
    assert_eq!(df.len(), n * m, "differential must be n x m");
    let d = DMatrix::from_row_slice(n, m, df);
    let gram = d.transpose() * &d;
    match gram.clone().cholesky() {
        Some(ch) => ch.l().diagonal().iter().map(|v| v.ln()).sum(),
        None => {
            let det = gram.determinant();
            if det > 0.0 {
                0.5 * det.ln()
            } else {
                f64::NEG_INFINITY
            }
        }
    }
}

/// Numerical `Df(x)` by central differences, one-sided where the stencil
/// would leave the box. Row-major, `n x m`.
pub fn finite_difference_differential(
    model: &dyn Model,
    bx: &ParamBox,
    x: &[f64],
) -> Result<Vec<f64>> {
    let m = model.dim_in();
    let n = model.dim_out();
    let base_step = f64::EPSILON.cbrt();
    let mut df = vec![0.0; n * m];
    let mut probe = x.to_vec();
    for j in 0..m {
        let step = base_step * x[j].abs().max(1.0);
        let up = (x[j] + step).min(bx.upper()[j]);
        let down = (x[j] - step).max(bx.lower()[j]);
        let (fu, fd, span) = if up - x[j] < step {
            probe[j] = x[j] - step;
            let fd = model.eval(&probe)?;
            (model.eval(x)?, fd, step)
        } else if x[j] - down < step {
            probe[j] = x[j] + step;
            let fu = model.eval(&probe)?;
            (fu, model.eval(x)?, step)
        } else {
            probe[j] = x[j] + step;
            let fu = model.eval(&probe)?;
            probe[j] = x[j] - step;
            let fd = model.eval(&probe)?;
            (fu, fd, 2.0 * step)
        };
        probe[j] = x[j];
        for i in 0..n {
            df[i * m + j] = (fu[i] - fd[i]) / span;
        }
    }
    Ok(df)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Identity(usize);

    impl Model for Identity {
        fn dim_in(&self) -> usize {
            self.0
        }
        fn dim_out(&self) -> usize {
            self.0
        }
        fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
            Ok(x.to_vec())
        }
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-14);
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn unit_ball_recursion() {
        for m in 3..12 {
            let rec = unit_ball_volume(m - 2) * 2.0 * std::f64::consts::PI / m as f64;
            assert!((unit_ball_volume(m) - rec).abs() < 1e-12 * rec);
        }
    }

    #[test]
    fn unit_ball_volume_by_rejection_from_cube() {
        use rand::Rng;
        let mut rng = crate::rng::substream(11, &[]);
        let n = 400_000;
        let hits = (0..n)
            .filter(|_| {
                (0..3)
                    .map(|_| (2.0 * rng.random::<f64>() - 1.0).powi(2))
                    .sum::<f64>()
                    <= 1.0
            })
            .count();
        let est = 8.0 * hits as f64 / n as f64;
        let p = unit_ball_volume(3) / 8.0;
        let se = 8.0 * (p * (1.0 - p) / n as f64).sqrt();
        assert!((est - unit_ball_volume(3)).abs() < 4.0 * se);
    }

    #[test]
    fn identity_jacobian_is_one() {
        let bx = ParamBox::unit(2);
        let j = jacobian_m(
            &Identity(2),
            &bx,
            &[0.3, 0.9],
            JacobianFallback::FiniteDifference,
        )
        .unwrap();
        assert!((j - 1.0).abs() < 1e-9);
        // boundary: one-sided stencil
        let j = jacobian_m(
            &Identity(2),
            &bx,
            &[0.0, 1.0],
            JacobianFallback::FiniteDifference,
        )
        .unwrap();
        assert!((j - 1.0).abs() < 1e-9);
    }

    #[test]
    fn missing_differential_without_fallback() {
        let bx = ParamBox::unit(1);
        let err = jacobian_m(&Identity(1), &bx, &[0.5], JacobianFallback::Disabled).unwrap_err();
        assert_eq!(err, Error::MissingDifferential);
    }

    #[test]
    fn singular_differential_has_zero_jacobian() {
        struct Flat;
        impl Model for Flat {
            fn dim_in(&self) -> usize {
                2
            }
            fn dim_out(&self) -> usize {
                2
            }
            fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![x[0] + x[1], x[0] + x[1]])
            }
            fn differential(&self, _x: &[f64]) -> Option<Vec<f64>> {
                Some(vec![1.0, 1.0, 1.0, 1.0])
            }
        }
        let bx = ParamBox::unit(2);
        let j = jacobian_m(&Flat, &bx, &[0.5, 0.5], JacobianFallback::Disabled).unwrap();
        assert!(j < 1e-7, "{j}");
    }
}

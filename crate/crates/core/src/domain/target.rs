/// Unnormalized target density `mu` on the output space, with respect to
/// Hausdorff measure on the model manifold. Only ratios of values are used.
pub trait TargetDensity: Send + Sync {
    fn eval(&self, y: &[f64]) -> f64;

    fn log_eval(&self, y: &[f64]) -> f64 {
        self.eval(y).ln()
    }
}

/// `mu = 1`: uniform on the manifold.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformTarget;

impl TargetDensity for UniformTarget {
    fn eval(&self, _y: &[f64]) -> f64 {
        1.0
    }

    fn log_eval(&self, _y: &[f64]) -> f64 {
        0.0
    }
}

/// `mu(y) = 1 / |y - c|^2`, concentrating design effort near `c`.
#[derive(Debug, Clone)]
pub struct InverseSquaredDistance {
    pub center: Vec<f64>,
}

impl TargetDensity for InverseSquaredDistance {
    fn eval(&self, y: &[f64]) -> f64 {
        let d2: f64 = y
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        1.0 / d2
    }
}

/// Adapts a closure.
pub struct FnTarget<F>(pub F);

impl<F> TargetDensity for FnTarget<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn eval(&self, y: &[f64]) -> f64 {
        (self.0)(y)
    }
}

impl<T: TargetDensity + ?Sized> TargetDensity for std::sync::Arc<T> {
    fn eval(&self, y: &[f64]) -> f64 {
        (**self).eval(y)
    }
    fn log_eval(&self, y: &[f64]) -> f64 {
        (**self).log_eval(y)
    }
}

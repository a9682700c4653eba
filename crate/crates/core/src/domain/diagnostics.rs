use serde::Serialize;

/// One row per iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// W1 between this iteration's resampled images and the previous one's.
    pub w1_successive: Option<f64>,
    /// `1 / sum G_i^2` of the resampling weights.
    pub ess: f64,
    pub min_weight: f64,
    pub max_weight: f64,
    /// Cumulative model evaluations.
    pub f_evals: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Successive W1 fell below tolerance twice in a row.
    Converged,
    IterationLimit,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    pub records: Vec<IterationRecord>,
    pub termination: Option<Termination>,
    /// Mean pairwise image distance at iteration 0, the unit for `stop_tol`.
    pub scale: Option<f64>,
    /// Rate function `alpha(N)` for this run's `N` and `m`.
    pub alpha: f64,
    /// Lipschitz bounds of the scaled kernel and its gradient.
    pub kernel_lipschitz: (f64, f64),
}

impl Diagnostics {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn f_evals(&self) -> u64 {
        self.last().map_or(0, |r| r.f_evals)
    }
}

/// Effective sample size of normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

//! Wasserstein-1 distance between equal-size empirical measures.

use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{neumaier_sum, Point};
use crate::error::{Error, Result};

/// Largest `N` accepted by [`w1_exact`]; the cost matrix alone is `N^2` floats.
pub const EXACT_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundMetric {
    #[default]
    Euclidean,
    L1,
}

impl GroundMetric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            GroundMetric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            GroundMetric::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

impl FromStr for GroundMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(GroundMetric::Euclidean),
            "l1" | "manhattan" => Ok(GroundMetric::L1),
            other => Err(Error::InvalidConfig(format!(
                "unknown ground metric `{other}`"
            ))),
        }
    }
}

fn check_sizes(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::SizeMismatch { left: a, right: b });
    }
    Ok(())
}

/// Exact W1 by solving the `N x N` assignment problem.
pub fn w1_exact(a: &[Point], b: &[Point], metric: GroundMetric) -> Result<f64> {
    check_sizes(a.len(), b.len())?;
    let n = a.len();
    if n > EXACT_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: EXACT_LIMIT,
        });
    }
    if n == 0 {
        return Ok(0.0);
    }
    let cost = cost_matrix(a, b, metric);
    let assignment = solve_assignment(&cost, n);
    let total = neumaier_sum(assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]));
    Ok(total / n as f64)
}

/// Row-major `N x N` distances.
pub fn cost_matrix(a: &[Point], b: &[Point], metric: GroundMetric) -> Vec<f64> {
    let n = b.len();
    let mut cost = vec![0.0; a.len() * n];
    cost.par_chunks_mut(n.max(1))
        .zip(a.par_iter())
        .for_each(|(row, x)| {
            for (c, y) in row.iter_mut().zip(b) {
                *c = metric.distance(x, y);
            }
        });
    cost
}

/// W1 of two samples on the line by sorted matching.
pub fn w1_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    check_sizes(a.len(), b.len())?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(neumaier_sum(a.iter().zip(&b).map(|(x, y)| (x - y).abs())) / a.len() as f64)
}

/// Mean of [`w1_1d`] over random unit directions. A cheap stand-in for
/// [`w1_exact`] when `N` is large; it never exceeds the Euclidean W1.
pub fn w1_sliced<R: Rng + ?Sized>(
    a: &[Point],
    b: &[Point],
    projections: usize,
    rng: &mut R,
) -> Result<f64> {
    check_sizes(a.len(), b.len())?;
    if a.is_empty() || projections == 0 {
        return Ok(0.0);
    }
    let d = a[0].len();
    let mut total = 0.0;
    for _ in 0..projections {
        let mut dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        dir.iter_mut().for_each(|v| *v /= norm);
        let project = |p: &Point| p.iter().zip(&dir).map(|(x, u)| x * u).sum::<f64>();
        let pa: Vec<f64> = a.iter().map(project).collect();
        let pb: Vec<f64> = b.iter().map(project).collect();
        total += w1_1d(&pa, &pb)?;
    }
    Ok(total / projections as f64)
}

/// Mean distance over unordered pairs.
pub fn mean_pairwise_distance(points: &[Point], metric: GroundMetric) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let row_sums: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            neumaier_sum(
                points[i + 1..]
                    .iter()
                    .map(|q| metric.distance(&points[i], q)),
            )
        })
        .collect();
    neumaier_sum(row_sums) / (n * (n - 1) / 2) as f64
}

/// Minimum-cost perfect matching on a dense square matrix; returns the
/// column assigned to each row.
///
/// Duals start from row and column reductions and every tight edge whose
/// row and column are both free is matched greedily. Each row still free is
/// then inserted along a shortest augmenting path in reduced costs (Dijkstra
/// with row and column duals). Ties go to the lowest-index free column.
pub fn solve_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    let mut u: Vec<f64> = (0..n)
        .map(|i| {
            cost[i * n..(i + 1) * n]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut v = vec![f64::INFINITY; n];
    for i in 0..n {
        for (vj, c) in v.iter_mut().zip(&cost[i * n..(i + 1) * n]) {
            *vj = vj.min(c - u[i]);
        }
    }
    let mut row_of = vec![usize::MAX; n];
    let mut col_of = vec![usize::MAX; n];
    for i in 0..n {
        for j in 0..n {
            if row_of[j] == usize::MAX && cost[i * n + j] - u[i] - v[j] == 0.0 {
                row_of[j] = i;
                col_of[i] = j;
                break;
            }
        }
    }
    let mut path = vec![0usize; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut row_seen = vec![false; n];
    let mut col_seen = vec![false; n];
    let mut remaining: Vec<usize> = Vec::with_capacity(n);

    for start in 0..n {
        if col_of[start] != usize::MAX {
            continue;
        }
        dist.fill(f64::INFINITY);
        row_seen.fill(false);
        col_seen.fill(false);
        remaining.clear();
        remaining.extend((0..n).rev());

        let mut min_val = 0.0;
        let mut i = start;
        let sink = loop {
            row_seen[i] = true;
            let mut best = usize::MAX;
            let mut lowest = f64::INFINITY;
            let row = &cost[i * n..(i + 1) * n];
            for (slot, &j) in remaining.iter().enumerate() {
                let r = min_val + row[j] - u[i] - v[j];
                if r < dist[j] {
                    path[j] = i;
                    dist[j] = r;
                }
                if dist[j] < lowest || (dist[j] == lowest && row_of[j] == usize::MAX) {
                    lowest = dist[j];
                    best = slot;
                }
            }
            min_val = lowest;
            let j = remaining.swap_remove(best);
            col_seen[j] = true;
            if row_of[j] == usize::MAX {
                break j;
            }
            i = row_of[j];
        };

        u[start] += min_val;
        for r in 0..n {
            if row_seen[r] && r != start {
                u[r] += min_val - dist[col_of[r]];
            }
        }
        for c in 0..n {
            if col_seen[c] {
                v[c] -= min_val - dist[c];
            }
        }
        let mut j = sink;
        loop {
            let r = path[j];
            row_of[j] = r;
            let previous = std::mem::replace(&mut col_of[r], j);
            if r == start {
                break;
            }
            j = previous;
        }
    }
    col_of
}

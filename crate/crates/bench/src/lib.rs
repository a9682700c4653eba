//! Shared fixtures for the benchmarks.

use rand::Rng;
use spacefill::rng::substream;
use spacefill::Point;

/// `count` points uniform in `[0, 1]^dim`, fixed by `seed`.
pub fn uniform_points(count: usize, dim: usize, seed: u64) -> Vec<Point> {
    let mut rng = substream(seed, &[]);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect()
}

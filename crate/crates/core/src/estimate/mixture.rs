use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use rand::Rng;

use crate::domain::{ParamBox, Point};
use crate::kernel::ReflectedKernel;
use crate::quadrature::halton;

/// `d(x) = q / vol(P) + (1 - q) / N * sum_i zeta~_h(x; c_i)`, the smoothed and
/// regularized proposal built from the current centers.
#[derive(Debug)]
pub struct MixtureDensity {
    q: f64,
    floor: f64,
    kernel: ReflectedKernel,
    centers: Vec<Point>,
    index: Option<CellIndex>,
}

impl MixtureDensity {
    pub fn new(q: f64, kernel: ReflectedKernel, centers: Vec<Point>) -> Self {
        let bx = kernel.param_box();
        let floor = q / bx.volume();
        let index = CellIndex::build(bx, kernel.bandwidth(), &centers);
        MixtureDensity {
            q,
            floor,
            kernel,
            centers,
            index,
        }
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn kernel(&self) -> &ReflectedKernel {
        &self.kernel
    }

    pub fn param_box(&self) -> &ParamBox {
        self.kernel.param_box()
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    /// The uniform component's contribution, a lower bound for `eval`.
    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Untruncated density at `x`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let n = self.centers.len();
        if n == 0 {
            return 1.0 / self.param_box().volume();
        }
        let sum = match &self.index {
            Some(index) => index
                .candidates(x)
                .into_iter()
                .map(|i| self.kernel.eval_reflected(x, &self.centers[i]))
                .sum::<f64>(),
            None => self
                .centers
                .iter()
                .map(|c| self.kernel.eval_reflected(x, c))
                .sum(),
        };
        self.floor + (1.0 - self.q) * (sum / n as f64)
    }

    /// One draw: uniform on the box with probability `q`, otherwise a
    /// reflected-kernel step from a uniformly chosen center.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        if self.centers.is_empty() || rng.random::<f64>() < self.q {
            self.param_box().sample_uniform(rng)
        } else {
            let c = &self.centers[rng.random_range(0..self.centers.len())];
            self.kernel.sample_reflected(c, rng)
        }
    }
}

/// `min(b, d(x))` normalized over the box.
#[derive(Debug)]
pub struct TruncatedMixture {
    mixture: Arc<MixtureDensity>,
    level: f64,
    normalizer: OnceLock<f64>,
}

/// Quasi-uniform points used for the truncated normalizer.
pub const NORMALIZER_POINTS: u64 = 100_000;

impl TruncatedMixture {
    pub fn new(mixture: Arc<MixtureDensity>, level: f64) -> Self {
        TruncatedMixture {
            mixture,
            level,
            normalizer: OnceLock::new(),
        }
    }

    pub fn mixture(&self) -> &MixtureDensity {
        &self.mixture
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn unnormalized(&self, x: &[f64]) -> f64 {
        self.mixture.eval(x).min(self.level)
    }

    /// `int_P min(b, d)`, exactly 1 without truncation; otherwise a Halton
    /// estimate computed on first use.
    pub fn normalizer(&self) -> f64 {
        if self.level.is_infinite() {
            return 1.0;
        }
        *self.normalizer.get_or_init(|| {
            let bx = self.mixture.param_box();
            let m = bx.dim();
            let total: f64 = (1..=NORMALIZER_POINTS)
                .map(|i| self.unnormalized(&bx.from_unit(&halton(i, m))))
                .sum();
            bx.volume() * total / NORMALIZER_POINTS as f64
        })
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.unnormalized(x) / self.normalizer()
    }
}

/// Buckets centers on a grid of side `h`, so every center within sup-distance
/// `h` of a query sits in one of the `3^m` surrounding cells.
#[derive(Debug)]
struct CellIndex {
    lower: Vec<f64>,
    h: f64,
    dims: Vec<u64>,
    cells: HashMap<u64, Vec<usize>>,
}

impl CellIndex {
    fn build(bx: &ParamBox, h: f64, centers: &[Point]) -> Option<Self> {
        let m = bx.dim();
        if m > 6 || centers.len() < 64 {
            return None;
        }
        let dims: Vec<u64> = (0..m)
            .map(|i| (bx.width(i) / h).floor() as u64 + 1)
            .collect();
        dims.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d))?;
        let mut index = CellIndex {
            lower: bx.lower().to_vec(),
            h,
            dims,
            cells: HashMap::new(),
        };
        for (i, c) in centers.iter().enumerate() {
            let key = index.key(&index.cell_of(c));
            index.cells.entry(key).or_default().push(i);
        }
        Some(index)
    }

    fn cell_of(&self, x: &[f64]) -> Vec<i64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| {
                let c = ((v - self.lower[i]) / self.h).floor() as i64;
                c.clamp(0, self.dims[i] as i64 - 1)
            })
            .collect()
    }

    fn key(&self, cell: &[i64]) -> u64 {
        cell.iter()
            .zip(&self.dims)
            .fold(0u64, |acc, (&c, &d)| acc * d + c as u64)
    }

    /// Indices of all centers in neighbouring cells, ascending, so sums run in
    /// the same order as a full scan.
    fn candidates(&self, x: &[f64]) -> Vec<usize> {
        let home = self.cell_of(x);
        let m = home.len();
        let mut out = Vec::new();
        let mut offset = vec![-1i64; m];
        'outer: loop {
            let cell: Option<Vec<i64>> = home
                .iter()
                .zip(&offset)
                .zip(&self.dims)
                .map(|((&c, &o), &d)| {
                    let v = c + o;
                    (v >= 0 && v < d as i64).then_some(v)
                })
                .collect();
            if let Some(cell) = cell {
                if let Some(list) = self.cells.get(&self.key(&cell)) {
                    out.extend_from_slice(list);
                }
            }
            for o in offset.iter_mut() {
                *o += 1;
                if *o <= 1 {
                    continue 'outer;
                }
                *o = -1;
            }
            break;
        }
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelFamily;
    use crate::quadrature::gauss_legendre;
    use crate::rng::substream;

    fn mixture(q: f64, h: f64, bx: ParamBox, centers: Vec<Point>) -> MixtureDensity {
        let k = ReflectedKernel::new(KernelFamily::Biweight, h, Arc::new(bx)).unwrap();
        MixtureDensity::new(q, k, centers)
    }

    #[test]
    fn pure_uniform_when_q_is_one() {
        let bx = ParamBox::cube(2, 0.0, 2.0).unwrap();
        let d = mixture(1.0, 0.3, bx, vec![vec![1.0, 1.0], vec![0.1, 0.2]]);
        assert_eq!(d.eval(&[1.0, 1.0]), 0.25);
        assert_eq!(d.eval(&[0.0, 2.0]), 0.25);
    }

    #[test]
    fn outside_kernel_support_only_uniform_part() {
        let bx = ParamBox::unit(2);
        let d = mixture(0.1, 0.2, bx, vec![vec![0.5, 0.5]]);
        assert_eq!(d.eval(&[0.5, 0.75]), 0.1);
    }

    #[test]
    fn integrates_to_one() {
        let mut rng = substream(5, &[]);
        for _ in 0..3 {
            let bx = ParamBox::unit(2);
            let centers: Vec<Point> = (0..5).map(|_| bx.sample_uniform(&mut rng)).collect();
            let d = mixture(0.3, 0.25, bx, centers);
            // Piecewise-polynomial integrand: many Gauss nodes on a fine split.
            let (t, w) = gauss_legendre(8);
            let pieces = 40;
            let mut total = 0.0;
            for a in 0..pieces {
                for b in 0..pieces {
                    for (ti, wi) in t.iter().zip(&w) {
                        for (tj, wj) in t.iter().zip(&w) {
                            let x = (a as f64 + 0.5 + 0.5 * ti) / pieces as f64;
                            let y = (b as f64 + 0.5 + 0.5 * tj) / pieces as f64;
                            total += wi * wj * d.eval(&[x, y]);
                        }
                    }
                }
            }
            total /= (2.0 * pieces as f64).powi(2);
            assert!((total - 1.0).abs() < 1e-4, "{total}");
        }
    }

    #[test]
    fn never_below_uniform_floor() {
        let mut rng = substream(9, &[]);
        let bx = ParamBox::new(vec![0.0, -1.0], vec![2.0, 3.0]).unwrap();
        let centers: Vec<Point> = (0..300).map(|_| bx.sample_uniform(&mut rng)).collect();
        let d = mixture(0.2, 0.4, bx.clone(), centers);
        for _ in 0..10_000 {
            let x = bx.sample_uniform(&mut rng);
            assert!(d.eval(&x) >= d.floor() - 1e-14);
        }
    }

    #[test]
    fn cell_index_matches_full_scan_exactly() {
        let mut rng = substream(13, &[]);
        let bx = ParamBox::new(vec![0.0, 0.0], vec![3.0, 1.0]).unwrap();
        let centers: Vec<Point> = (0..500).map(|_| bx.sample_uniform(&mut rng)).collect();
        let d = mixture(0.1, 0.15, bx.clone(), centers.clone());
        assert!(d.index.is_some());
        for _ in 0..2000 {
            let x = bx.sample_uniform(&mut rng);
            let scan: f64 = centers.iter().map(|c| d.kernel.eval_reflected(&x, c)).sum();
            let expect = d.floor + (1.0 - d.q) * (scan / centers.len() as f64);
            assert_eq!(d.eval(&x), expect);
        }
    }

    #[test]
    fn untruncated_normalizer_is_one() {
        let bx = ParamBox::unit(1);
        let d = Arc::new(mixture(0.2, 0.1, bx, vec![vec![0.5]]));
        let t = TruncatedMixture::new(d.clone(), f64::INFINITY);
        assert_eq!(t.normalizer(), 1.0);
        assert_eq!(t.density(&[0.5]), d.eval(&[0.5]));
    }

    #[test]
    fn truncated_normalizer_matches_quadrature() {
        let bx = ParamBox::unit(1);
        let d = Arc::new(mixture(0.2, 0.1, bx, vec![vec![0.5]]));
        let t = TruncatedMixture::new(d, 1.0);
        let exact = crate::quadrature::integrate_1d(
            |x| t.unnormalized(&[x]),
            0.0,
            1.0,
            &[0.4, 0.5, 0.6],
            64,
        );
        assert!(
            (t.normalizer() - exact).abs() < 1e-3,
            "{} vs {exact}",
            t.normalizer()
        );
    }
}

//! Gauss–Legendre rules and Halton points.

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { p0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Integrates `f` over `[a, b]`, splitting at `breaks` so that piecewise
/// polynomial integrands are handled exactly by an `n`-point rule per piece.
pub fn integrate_1d(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], n: usize) -> f64 {
    let mut cuts: Vec<f64> = std::iter::once(a)
        .chain(breaks.iter().copied().filter(|&c| c > a && c < b))
        .chain(std::iter::once(b))
        .collect();
    cuts.sort_by(f64::total_cmp);
    let (nodes, weights) = gauss_legendre(n);
    cuts.windows(2)
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            nodes
                .iter()
                .zip(&weights)
                .map(|(t, wt)| half * wt * f(mid + half * t))
                .sum::<f64>()
        })
        .sum()
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// The `index`-th point of the Halton sequence in `[0, 1)^dim`.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(
        dim <= PRIMES.len(),
        "Halton points limited to {} dimensions",
        PRIMES.len()
    );
    PRIMES[..dim]
        .iter()
        .map(|&base| {
            let mut f = 1.0;
            let mut r = 0.0;
            let mut i = index;
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // degree 15 is exact for 8 nodes
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let (_, w64) = gauss_legendre(64);
        assert!((w64.iter().sum::<f64>() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn piecewise_integration() {
        let v = integrate_1d(|x| x.abs(), -1.0, 2.0, &[0.0], 4);
        assert!((v - 2.5).abs() < 1e-14);
    }

    #[test]
    fn halton_first_points() {
        assert_eq!(halton(1, 2), vec![0.5, 1.0 / 3.0]);
        assert_eq!(halton(2, 2), vec![0.25, 2.0 / 3.0]);
    }
}

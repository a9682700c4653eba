use rayon::prelude::*;

use crate::domain::{unit_ball_volume, Point};
use crate::error::{Error, Result};

/// Above this many points the radii come from a k-d tree instead of a scan.
pub const BRUTE_FORCE_LIMIT: usize = 2048;

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Distance from each image to its `k`-th nearest image, counting itself as
/// the first neighbour.
pub fn knn_radii(images: &[Point], k: usize) -> Vec<f64> {
    if images.len() <= BRUTE_FORCE_LIMIT {
        knn_radii_scan(images, k)
    } else {
        knn_radii_tree(images, k)
    }
}

/// Exhaustive search.
pub fn knn_radii_scan(images: &[Point], k: usize) -> Vec<f64> {
    assert!(k >= 1 && k <= images.len(), "k must lie in [1, N]");
    images
        .par_iter()
        .map_init(Vec::new, |dists, y| {
            dists.clear();
            dists.extend(images.iter().map(|z| euclidean(y, z)));
            *dists.select_nth_unstable_by(k - 1, f64::total_cmp).1
        })
        .collect()
}

/// Exact search on a k-d tree; returns the same values as the scan.
pub fn knn_radii_tree(images: &[Point], k: usize) -> Vec<f64> {
    assert!(k >= 1 && k <= images.len(), "k must lie in [1, N]");
    let tree = KdTree::build(images);
    images.par_iter().map(|y| tree.kth_distance(y, k)).collect()
}

/// `p(y_i) = (k / N) / (Gamma_m r_i^m)` with `m` the manifold dimension.
pub fn knn_density(images: &[Point], k: usize, m: usize) -> Result<Vec<f64>> {
    let radii = knn_radii(images, k);
    let zeros = radii.iter().filter(|r| **r == 0.0).count();
    if zeros > 0 {
        return Err(Error::DuplicateImages { count: zeros });
    }
    let scale = k as f64 / images.len() as f64 / unit_ball_volume(m);
    Ok(radii.iter().map(|r| scale / r.powi(m as i32)).collect())
}

const LEAF_SIZE: usize = 16;

struct KdTree<'a> {
    points: &'a [Point],
    order: Vec<usize>,
    nodes: Vec<Node>,
}

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

impl<'a> KdTree<'a> {
    fn build(points: &'a [Point]) -> Self {
        let mut tree = KdTree {
            points,
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        tree.build_node(0, points.len());
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return self.nodes.len() - 1;
        }
        let dim = self.points[0].len();
        let axis = (0..dim)
            .max_by(|&a, &b| {
                self.spread(start, end, a)
                    .total_cmp(&self.spread(start, end, b))
            })
            .unwrap_or(0);
        let mid = (start + end) / 2;
        let pts = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
            pts[i][axis].total_cmp(&pts[j][axis]).then(i.cmp(&j))
        });
        let value = pts[self.order[mid]][axis];
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[slot] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        slot
    }

    fn spread(&self, start: usize, end: usize, axis: usize) -> f64 {
        let (lo, hi) = self.order[start..end]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(self.points[i][axis]), hi.max(self.points[i][axis]))
            });
        hi - lo
    }

    fn kth_distance(&self, query: &[f64], k: usize) -> f64 {
        let mut best: Vec<f64> = Vec::with_capacity(k + 1);
        self.search(0, query, k, &mut best);
        best[k - 1]
    }

    /// `best` holds the `k` smallest distances seen, sorted ascending.
    fn search(&self, node: usize, query: &[f64], k: usize, best: &mut Vec<f64>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = euclidean(query, &self.points[i]);
                    if best.len() < k || d < best[k - 1] {
                        let pos = best.partition_point(|&b| b <= d);
                        best.insert(pos, d);
                        best.truncate(k);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, query, k, best);
                // The slack keeps rounding in the plane distance from pruning a
                // point whose computed distance ties the current k-th.
                if best.len() < k || diff.abs() <= best[k - 1] * (1.0 + 1e-12) {
                    self.search(far, query, k, best);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn line_points_hand_case() {
        let pts = vec![vec![0.0], vec![1.0], vec![3.0]];
        assert_eq!(knn_radii(&pts, 2), vec![1.0, 1.0, 2.0]);
        assert_eq!(knn_radii(&pts, 1), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn duplicates_are_an_error() {
        let pts = vec![vec![0.0], vec![0.0], vec![3.0]];
        assert!(matches!(
            knn_density(&pts, 2, 1),
            Err(Error::DuplicateImages { count: 2 })
        ));
    }

    #[test]
    fn tree_matches_scan_bit_for_bit() {
        let mut rng = substream(21, &[]);
        for &(n, dim, k) in &[(3000, 3, 40), (2500, 2, 1), (2100, 1, 7), (3000, 3, 3000)] {
            let mut pts: Vec<Point> = (0..n)
                .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
                .collect();
            // a few exact duplicates and a lattice to force ties
            for i in 0..20 {
                pts[i + 100] = pts[i].clone();
                pts[i + 200] = (0..dim).map(|d| ((i + d) % 4) as f64 * 0.25).collect();
            }
            assert_eq!(knn_radii_scan(&pts, k), knn_radii_tree(&pts, k));
        }
    }

    #[test]
    fn density_of_uniform_square_embedded_in_3d() {
        let mut rng = substream(8, &[]);
        let pts: Vec<Point> = (0..1000)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>(), 0.0])
            .collect();
        let radii = knn_radii(&pts, 32);
        // interior points only: radii near the edge see half a disc
        let interior: Vec<f64> = pts
            .iter()
            .zip(&radii)
            .filter(|(p, _)| p[..2].iter().all(|c| (0.2..0.8).contains(c)))
            .map(|(_, r)| unit_ball_volume(2) * r * r / (32.0 / 1000.0))
            .collect();
        let mean = interior.iter().sum::<f64>() / interior.len() as f64;
        assert!((0.9..=1.1).contains(&mean), "{mean}");
    }

    #[test]
    fn density_of_uniform_interval() {
        let mut rng = substream(4, &[]);
        let pts: Vec<Point> = (0..1000).map(|_| vec![rng.random::<f64>()]).collect();
        let mut p = knn_density(&pts, 31, 1).unwrap();
        p.sort_by(f64::total_cmp);
        let median = p[500];
        assert!((0.9..=1.1).contains(&median), "{median}");
    }

    #[test]
    fn scaling_images_scales_density() {
        let mut rng = substream(6, &[]);
        let pts: Vec<Point> = (0..200)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let scaled: Vec<Point> = pts
            .iter()
            .map(|p| p.iter().map(|v| 3.0 * v).collect())
            .collect();
        let a = knn_density(&pts, 5, 2).unwrap();
        let b = knn_density(&scaled, 5, 2).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((y / x - 1.0 / 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn full_neighbourhood_equal_radii_give_constant_density() {
        let pts = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let p = knn_density(&pts, 2, 2).unwrap();
        assert_eq!(p[0], p[1]);
    }

    proptest! {
        #[test]
        fn radii_are_permutation_equivariant(
            pts in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 2), 2..60),
            k_frac in 0.0f64..1.0,
            seed in any::<u64>(),
        ) {
            let n = pts.len();
            let k = 1 + ((n - 1) as f64 * k_frac) as usize;
            let mut perm: Vec<usize> = (0..n).collect();
            let mut rng = substream(seed, &[]);
            for i in (1..n).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let shuffled: Vec<Point> = perm.iter().map(|&i| pts[i].clone()).collect();
            let r = knn_radii(&pts, k);
            let rs = knn_radii(&shuffled, k);
            for (pos, &i) in perm.iter().enumerate() {
                prop_assert_eq!(rs[pos], r[i]);
            }
        }
    }
}

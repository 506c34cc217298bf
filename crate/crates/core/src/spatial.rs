//! Nearest-neighbour queries over a fixed point set. Distances are recomputed
//! from the stored points, so they are bit-identical to an exhaustive scan.

use nalgebra::Vector3;
use rayon::prelude::*;
use rstar::primitives::GeomWithData;
use rstar::RTree;

/// Extra candidates examined per query so rounding differences between the
/// tree's metric and ours cannot change the reported minimum.
const SLACK: usize = 3;

type Entry = GeomWithData<[f64; 3], usize>;

pub struct PointIndex {
    tree: RTree<Entry>,
    points: Vec<Vector3<f64>>,
}

impl PointIndex {
    /// Builds an index; `points` must be nonempty.
    pub fn new(points: &[Vector3<f64>]) -> Self {
        assert!(!points.is_empty(), "index needs at least one point");
        let entries: Vec<Entry> = points
            .iter()
            .enumerate()
            .map(|(i, p)| Entry::new([p.x, p.y, p.z], i))
            .collect();
        PointIndex {
            tree: RTree::bulk_load(entries),
            points: points.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    /// The `k` nearest points as `(index, distance)`, closest first, ties by index.
    pub fn knn(&self, p: &Vector3<f64>, k: usize) -> Vec<(usize, f64)> {
        let want = (k + SLACK).min(self.points.len());
        let mut found: Vec<(usize, f64)> = self
            .tree
            .nearest_neighbor_iter(&[p.x, p.y, p.z])
            .take(want)
            .map(|e| {
                let i = e.data;
                (i, (self.points[i] - p).norm_squared())
            })
            .collect();
        found.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        found.truncate(k);
        found.into_iter().map(|(i, d)| (i, d.sqrt())).collect()
    }

    /// Indices of all points within distance `r` of `p`, ascending.
    pub fn within(&self, p: &Vector3<f64>, r: f64) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .tree
            .locate_within_distance([p.x, p.y, p.z], r * r * (1.0 + 1e-12))
            .map(|e| e.data)
            .filter(|&i| (self.points[i] - p).norm() <= r)
            .collect();
        out.sort_unstable();
        out
    }

    /// Distance to the nearest stored point.
    pub fn nearest_distance(&self, p: &Vector3<f64>) -> f64 {
        self.knn(p, 1)[0].1
    }

    /// Nearest distances for many queries, in query order.
    pub fn nearest_distances(&self, queries: &[Vector3<f64>]) -> Vec<f64> {
        queries
            .par_iter()
            .map(|q| self.nearest_distance(q))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{brute_nearest, brute_sorted_distances};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Vector3<f64>> = (0..500)
            .map(|_| Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let index = PointIndex::new(&pts);
        for _ in 0..200 {
            let q = Vector3::from_fn(|_, _| rng.gen_range(-1.2..1.2));
            assert_eq!(index.nearest_distance(&q), brute_nearest(&pts, &q));
            let k: Vec<f64> = index.knn(&q, 10).into_iter().map(|x| x.1).collect();
            assert_eq!(k, brute_sorted_distances(&pts, &q)[..10].to_vec());
        }
    }

    #[test]
    fn handles_duplicates() {
        let pts = vec![Vector3::new(0.5, 0.5, 0.5); 100];
        let index = PointIndex::new(&pts);
        let k = index.knn(&Vector3::new(0.5, 0.5, 0.5), 51);
        assert_eq!(k.len(), 51);
        assert!(k.iter().all(|x| x.1 == 0.0));
        let mut grid = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                for l in 0..20 {
                    grid.push(Vector3::new(i as f64, j as f64, l as f64));
                }
            }
        }
        let index = PointIndex::new(&grid);
        let k = index.knn(&Vector3::new(5.0, 5.0, 5.0), 7);
        assert_eq!(k[0].1, 0.0);
        assert!(k[1..].iter().all(|x| x.1 == 1.0));
    }
}

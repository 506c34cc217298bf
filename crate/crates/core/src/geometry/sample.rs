//! Surface sampling and the k-nearest-neighbour Dirichlet diagnostic.

use std::collections::BTreeSet;

use nalgebra::Vector3;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GeometryError, TriangleMesh};
use crate::nets::LipNet;
use crate::sh::Vec9;
use crate::spatial::PointIndex;

/// `n` area-weighted uniform samples on the mesh surface.
pub fn sample_mesh(
    mesh: &TriangleMesh,
    n: usize,
    seed: u64,
) -> Result<Vec<Vector3<f64>>, GeometryError> {
    if mesh.faces.is_empty() {
        return Err(GeometryError::Empty);
    }
    let areas: Vec<f64> = mesh.faces.iter().map(|f| mesh.triangle_area(f)).collect();
    let pick = WeightedIndex::new(&areas).map_err(|_| GeometryError::ZeroArea)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let [a, b, c] = mesh.corners(&mesh.faces[pick.sample(&mut rng)]);
            let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
            let s = r1.sqrt();
            a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2)
        })
        .collect())
}

/// Undirected edges `(i, j)`, `i < j`, joining each point to its `k`
/// nearest other points.
pub fn knn_edges(points: &[Vector3<f64>], k: usize) -> Result<Vec<(usize, usize)>, GeometryError> {
    if points.len() <= k {
        return Err(GeometryError::TooSmall {
            needed: k + 1,
            found: points.len(),
        });
    }
    let index = PointIndex::new(points);
    let mut edges = BTreeSet::new();
    for (i, p) in points.iter().enumerate() {
        for (j, _) in index
            .knn(p, k + 1)
            .into_iter()
            .filter(|&(j, _)| j != i)
            .take(k)
        {
            edges.insert((i.min(j), i.max(j)));
        }
    }
    Ok(edges.into_iter().collect())
}

/// `Σ ‖v_i − v_j‖²` over the given edges.
pub fn dirichlet_energy(values: &[Vec9], edges: &[(usize, usize)]) -> f64 {
    edges
        .iter()
        .map(|&(i, j)| (values[i] - values[j]).norm_squared())
        .sum()
}

/// Unweighted Dirichlet energy of the field network's output on the
/// k-nearest-neighbour graph of `points`.
pub fn dirichlet_knn(u: &LipNet, points: &[Vector3<f64>], k: usize) -> Result<f64, GeometryError> {
    let edges = knn_edges(points, k)?;
    Ok(dirichlet_energy(&u.eval_many(points), &edges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{lipnet_init, Dense};
    use ndarray::{Array1, Array2};

    fn two_triangles() -> TriangleMesh {
        // Areas 1 and 3.
        TriangleMesh {
            vertices: vec![
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(2.0, 0.0, 0.0),
                Vector3::new(0.0, 1.0, 0.0),
                Vector3::new(0.0, 0.0, 5.0),
                Vector3::new(3.0, 0.0, 5.0),
                Vector3::new(0.0, 2.0, 5.0),
            ],
            faces: vec![[0, 1, 2], [3, 4, 5]],
        }
    }

    #[test]
    fn samples_inside_triangle() {
        let mesh = two_triangles();
        let single = TriangleMesh {
            vertices: mesh.vertices[..3].to_vec(),
            faces: vec![[0, 1, 2]],
        };
        for p in sample_mesh(&single, 2000, 4).unwrap() {
            assert!(p.z == 0.0 && p.x >= 0.0 && p.y >= 0.0);
            assert!(p.x / 2.0 + p.y <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn area_ratio_within_three_sigma() {
        let n = 20000;
        let pts = sample_mesh(&two_triangles(), n, 9).unwrap();
        let small = pts.iter().filter(|p| p.z < 2.5).count() as f64;
        let (mean, sd) = (n as f64 * 0.25, (n as f64 * 0.25 * 0.75).sqrt());
        assert!((small - mean).abs() < 3.0 * sd, "{small}");
    }

    #[test]
    fn sampling_is_seeded() {
        let m = two_triangles();
        assert_eq!(
            sample_mesh(&m, 100, 1).unwrap(),
            sample_mesh(&m, 100, 1).unwrap()
        );
        assert_ne!(
            sample_mesh(&m, 100, 1).unwrap(),
            sample_mesh(&m, 100, 2).unwrap()
        );
        let flat = TriangleMesh {
            vertices: vec![Vector3::zeros(); 3],
            faces: vec![[0, 1, 2]],
        };
        assert!(matches!(
            sample_mesh(&flat, 10, 0),
            Err(GeometryError::ZeroArea)
        ));
    }

    fn grid_points() -> Vec<Vector3<f64>> {
        let mut pts = Vec::new();
        for i in 0..4 {
            for j in 0..3 {
                pts.push(Vector3::new(
                    0.1 * i as f64,
                    0.13 * j as f64,
                    0.01 * (i * j) as f64,
                ));
            }
        }
        pts
    }

    #[test]
    fn linear_field_matches_direct_formula() {
        let w = Array2::from_shape_fn((9, 3), |(r, c)| ((r * 3 + c) as f64 * 0.37).sin());
        let u = LipNet::from_layers(vec![Dense {
            w: w.clone(),
            b: Array1::zeros(9),
        }])
        .unwrap();
        let pts = grid_points();
        let edges = knn_edges(&pts, 3).unwrap();
        let direct: f64 = edges
            .iter()
            .map(|&(i, j)| {
                let d = pts[i] - pts[j];
                (0..9)
                    .map(|r| {
                        let v: f64 = (0..3).map(|c| w[[r, c]] * d[c]).sum();
                        v * v
                    })
                    .sum::<f64>()
            })
            .sum();
        let got = dirichlet_knn(&u, &pts, 3).unwrap();
        assert!(
            (got - direct).abs() < 1e-12 * direct.max(1.0),
            "{got} {direct}"
        );
    }

    #[test]
    fn constant_field_is_zero_and_energy_nonnegative() {
        let u = LipNet::from_layers(vec![Dense::zeros(3, 9)]).unwrap();
        let pts = grid_points();
        assert_eq!(dirichlet_knn(&u, &pts, 4).unwrap(), 0.0);
        let r = lipnet_init(2, 16, 5);
        assert!(dirichlet_knn(&r, &pts, 4).unwrap() >= 0.0);
        assert!(matches!(
            dirichlet_knn(&r, &pts[..3], 3),
            Err(GeometryError::TooSmall { .. })
        ));
    }
}

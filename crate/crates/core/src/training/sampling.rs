use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::geometry::GeometryError;
use crate::spatial::PointIndex;

/// Lower bound on per-point sampling radii.
pub const SIGMA_FLOOR: f64 = 1e-8;

/// Distance from each point to its `k`-th nearest point, counting the point
/// itself as the first. Radii are clamped below at [`SIGMA_FLOOR`].
pub fn knn_sigma(points: &[Vector3<f64>], k: usize) -> Result<Vec<f64>, GeometryError> {
    if k == 0 || points.len() < k {
        return Err(GeometryError::TooSmall {
            needed: k.max(1),
            found: points.len(),
        });
    }
    let index = PointIndex::new(points);
    Ok(points
        .par_iter()
        .map(|p| index.knn(p, k)[k - 1].1.max(SIGMA_FLOOR))
        .collect())
}

/// `n` points, each a uniformly chosen cloud point plus an isotropic
/// Gaussian offset with that point's radius.
pub fn sample_close<R: Rng>(
    points: &[Vector3<f64>],
    sigmas: &[f64],
    n: usize,
    rng: &mut R,
) -> Vec<Vector3<f64>> {
    assert_eq!(points.len(), sigmas.len(), "one radius per point");
    (0..n)
        .map(|_| {
            let i = rng.gen_range(0..points.len());
            let noise = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            points[i] + noise * sigmas[i]
        })
        .collect()
}

/// `n` points uniform in the normalized cube `[-1, 1]³`.
pub fn sample_off<R: Rng>(n: usize, rng: &mut R) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0)))
        .collect()
}

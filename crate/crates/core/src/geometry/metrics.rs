//! Symmetric nearest-neighbour distances between point sets.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{bbox_diagonal, GeometryError};
use crate::spatial::PointIndex;

/// F-score threshold as a fraction of the reference bounding-box diagonal.
pub const FSCORE_FRACTION: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChamferKind {
    /// Mean of unsquared nearest distances.
    #[default]
    Distance,
    /// Mean of squared nearest distances.
    Squared,
}

/// Nearest distances from every point of `from` into `to`, in `from` order.
fn directed(from: &[Vector3<f64>], to: &[Vector3<f64>]) -> Result<Vec<f64>, GeometryError> {
    if from.is_empty() || to.is_empty() {
        return Err(GeometryError::Empty);
    }
    Ok(PointIndex::new(to).nearest_distances(from))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

fn chamfer_from(da: &[f64], db: &[f64], kind: ChamferKind) -> f64 {
    match kind {
        ChamferKind::Distance => 0.5 * (mean(da) + mean(db)),
        ChamferKind::Squared => {
            let sq = |v: &[f64]| v.iter().map(|d| d * d).sum::<f64>() / v.len() as f64;
            0.5 * (sq(da) + sq(db))
        }
    }
}

fn fscore_from(da: &[f64], db: &[f64], tau: f64) -> f64 {
    let precision = da.iter().filter(|d| **d <= tau).count() as f64 / da.len() as f64;
    let recall = db.iter().filter(|d| **d <= tau).count() as f64 / db.len() as f64;
    if precision + recall > 0.0 {
        100.0 * 2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

pub fn chamfer(
    a: &[Vector3<f64>],
    b: &[Vector3<f64>],
    kind: ChamferKind,
) -> Result<f64, GeometryError> {
    Ok(chamfer_from(&directed(a, b)?, &directed(b, a)?, kind))
}

pub fn hausdorff(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> Result<f64, GeometryError> {
    Ok(max(&directed(a, b)?).max(max(&directed(b, a)?)))
}

/// Point-to-point F-score in percent: precision counts points of `a`
/// within `tau` of `b`, recall the reverse.
pub fn fscore(a: &[Vector3<f64>], b: &[Vector3<f64>], tau: f64) -> Result<f64, GeometryError> {
    Ok(fscore_from(&directed(a, b)?, &directed(b, a)?, tau))
}

/// Scaled metric summary; `a` is the reconstruction, `b` the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub chamfer_x1e3: f64,
    pub hausdorff_x1e2: f64,
    pub fscore_pct: f64,
    pub tau: f64,
    pub n_samples: usize,
}

/// All three metrics from one pair of nearest-neighbour passes. `tau`
/// defaults to [`FSCORE_FRACTION`] of `b`'s bounding-box diagonal.
pub fn evaluate_metrics(
    a: &[Vector3<f64>],
    b: &[Vector3<f64>],
    tau: Option<f64>,
    kind: ChamferKind,
) -> Result<MetricReport, GeometryError> {
    let da = directed(a, b)?;
    let db = directed(b, a)?;
    let tau = tau.unwrap_or_else(|| FSCORE_FRACTION * bbox_diagonal(b));
    Ok(MetricReport {
        chamfer_x1e3: 1e3 * chamfer_from(&da, &db, kind),
        hausdorff_x1e2: 1e2 * max(&da).max(max(&db)),
        fscore_pct: fscore_from(&da, &db, tau),
        tau,
        n_samples: a.len().min(b.len()),
    })
}

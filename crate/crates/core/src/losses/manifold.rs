//! Loss manifolds over sphere directions: the similarity between the
//! canonical frame and its projection onto frames aligned with `d`.

use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::oracle::fibonacci_sphere;
use crate::sh::{canonical_coeffs, project_normal_with_tangents, Rotation3, RotationVec};
use crate::spatial::PointIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    L1,
    L2,
    Cosine,
}

impl Similarity {
    pub fn name(self) -> &'static str {
        match self {
            Similarity::L1 => "l1",
            Similarity::L2 => "l2",
            Similarity::Cosine => "cosine",
        }
    }
}

impl FromStr for Similarity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Similarity::L1),
            "l2" => Ok(Similarity::L2),
            "cosine" => Ok(Similarity::Cosine),
            other => Err(format!(
                "unknown similarity '{other}' (expected l1, l2 or cosine)"
            )),
        }
    }
}

/// `φ(q₀, Π(q₀, d))` for a unit direction `d`. L2 is the unsquared norm.
pub fn manifold_value(sim: Similarity, d: &Vector3<f64>) -> f64 {
    let q0 = canonical_coeffs().0;
    let p = project_normal_with_tangents(&canonical_coeffs(), &d.normalize())
        .value
        .0;
    match sim {
        Similarity::L1 => (q0 - p).abs().sum(),
        Similarity::L2 => (q0 - p).norm(),
        Similarity::Cosine => 1.0 - q0.dot(&p),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldRow {
    pub direction: Vector3<f64>,
    pub value: f64,
}

/// The manifold sampled on `n` quasi-uniform directions.
pub fn manifold_table(sim: Similarity, n: usize) -> Vec<ManifoldRow> {
    fibonacci_sphere(n)
        .into_iter()
        .map(|d| ManifoldRow {
            direction: d,
            value: manifold_value(sim, &d),
        })
        .collect()
}

/// Rows whose value is the smallest among all samples within angular
/// distance `radius` (ties broken by index): the discrete local minima at
/// that scale. A neighbourhood of fixed angular size, rather than a fixed
/// neighbour count, keeps samples on the floor of a sharp valley from
/// reading as minima.
pub fn local_minima(rows: &[ManifoldRow], radius: f64) -> Vec<usize> {
    let dirs: Vec<Vector3<f64>> = rows.iter().map(|r| r.direction).collect();
    let index = PointIndex::new(&dirs);
    let chord = 2.0 * (0.5 * radius).sin();
    (0..rows.len())
        .filter(|&i| {
            index
                .within(&dirs[i], chord)
                .into_iter()
                .filter(|&j| j != i)
                .all(|j| {
                    let (a, b) = (rows[i].value, rows[j].value);
                    a < b || (a == b && i < j)
                })
        })
        .collect()
}

/// Angular neighbourhood used when counting manifold minima (5°).
pub const MINIMA_RADIUS: f64 = 5.0 * std::f64::consts::PI / 180.0;

/// Mean finite-difference slope `(φ(d') − φ(d))/δ` over eight tilts of `d`
/// by angle `delta`.
pub fn manifold_slope(sim: Similarity, d: &Vector3<f64>, delta: f64) -> f64 {
    let d = d.normalize();
    let base = manifold_value(sim, &d);
    let helper = if d.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let t1 = d.cross(&helper).normalize();
    let t2 = d.cross(&t1);
    let tilts: f64 = (0..8)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / 8.0;
            let axis = t1 * a.cos() + t2 * a.sin();
            let r: Rotation3 = RotationVec(axis * delta).to_rotation();
            (manifold_value(sim, &r.apply(&d)) - base) / delta
        })
        .sum();
    tilts / 8.0
}

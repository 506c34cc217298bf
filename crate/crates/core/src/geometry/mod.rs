//! Point clouds, isosurface extraction, distance metrics and mesh I/O.

mod io;
mod mc;
mod mc_tables;
mod metrics;
mod sample;

use nalgebra::Vector3;
use thiserror::Error;

pub use io::{read_mesh, read_points, write_glyphs_ply, write_obj, write_ply, Glyph, MeshOrCloud};
pub use mc::{extract_surface, marching_cubes, GridSpec};
pub use metrics::{
    chamfer, evaluate_metrics, fscore, hausdorff, ChamferKind, MetricReport, FSCORE_FRACTION,
};
pub use sample::{dirichlet_energy, dirichlet_knn, knn_edges, sample_mesh};

/// Fraction of the half-width left empty on each side of the normalized cube.
pub const NORMALIZE_MARGIN: f64 = 0.05;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("empty point set")]
    Empty,
    #[error("need at least {needed} points, found {found}")]
    TooSmall { needed: usize, found: usize },
    #[error("mesh has zero total area")]
    ZeroArea,
    #[error("grid resolution must be at least 8, got {0}")]
    Resolution(usize),
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Points in normalized coordinates with the map back to original units:
/// `original = center + normalized / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub center: Vector3<f64>,
    pub scale: f64,
}

fn bounding_box(points: &[Vector3<f64>]) -> (Vector3<f64>, Vector3<f64>) {
    points.iter().fold(
        (
            Vector3::repeat(f64::INFINITY),
            Vector3::repeat(f64::NEG_INFINITY),
        ),
        |(lo, hi), p| (lo.inf(p), hi.sup(p)),
    )
}

/// Length of the bounding-box diagonal.
pub fn bbox_diagonal(points: &[Vector3<f64>]) -> f64 {
    let (lo, hi) = bounding_box(points);
    (hi - lo).norm()
}

impl PointCloud {
    /// Centers the bounding box at the origin and maps its longest edge to
    /// `2·(1 − margin)`.
    pub fn normalize(points: &[Vector3<f64>]) -> Result<PointCloud, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::Empty);
        }
        let (lo, hi) = bounding_box(points);
        let center = (lo + hi) * 0.5;
        let extent = (hi - lo).max();
        let scale = if extent > 0.0 {
            2.0 * (1.0 - NORMALIZE_MARGIN) / extent
        } else {
            1.0
        };
        Ok(PointCloud {
            points: points.iter().map(|p| (p - center) * scale).collect(),
            center,
            scale,
        })
    }

    /// Wraps points that are already normalized.
    pub fn identity(points: Vec<Vector3<f64>>) -> PointCloud {
        PointCloud {
            points,
            center: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_original(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.center + p / self.scale
    }

    pub fn to_normalized(&self, p: &Vector3<f64>) -> Vector3<f64> {
        (p - self.center) * self.scale
    }

    pub fn denormalize(&self) -> Vec<Vector3<f64>> {
        self.points.iter().map(|p| self.to_original(p)).collect()
    }
}

/// Indexed triangle mesh.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn corners(&self, f: &[u32; 3]) -> [Vector3<f64>; 3] {
        f.map(|i| self.vertices[i as usize])
    }

    pub fn triangle_area(&self, f: &[u32; 3]) -> f64 {
        let [a, b, c] = self.corners(f);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn area(&self) -> f64 {
        self.faces.iter().map(|f| self.triangle_area(f)).sum()
    }

    /// Signed enclosed volume; positive when faces wind counter-clockwise
    /// seen from outside.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = self.corners(f);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// `V − E + F` over the undirected edge set.
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = std::collections::HashSet::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        self.vertices.len() as i64 - edges.len() as i64 + self.faces.len() as i64
    }

    /// True when every edge is shared by exactly two faces.
    pub fn is_closed(&self) -> bool {
        let mut count = std::collections::HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_insert(0u32) += 1;
            }
        }
        count.values().all(|&c| c == 2)
    }

    pub fn map_vertices(&mut self, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) {
        self.vertices.iter_mut().for_each(|v| *v = f(v));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cube_corners_normalize_to_margin() {
        let mut corners = Vec::new();
        for i in 0..8 {
            corners.push(Vector3::new(
                if i & 1 == 0 { -1.0 } else { 1.0 },
                if i & 2 == 0 { -1.0 } else { 1.0 },
                if i & 4 == 0 { -1.0 } else { 1.0 },
            ));
        }
        let pc = PointCloud::normalize(&corners).unwrap();
        assert_eq!(pc.center, Vector3::zeros());
        assert!((pc.scale - 0.95).abs() < 1e-15);
        assert!(pc.points.iter().all(|p| p.amax() <= 0.95 + 1e-15));
        assert!(matches!(
            PointCloud::normalize(&[]),
            Err(GeometryError::Empty)
        ));
        let single = PointCloud::normalize(&[Vector3::new(3.0, 4.0, 5.0)]).unwrap();
        assert_eq!(single.points[0], Vector3::zeros());
    }

    proptest! {
        #[test]
        fn normalize_roundtrip_and_similarity(
            pts in prop::collection::vec(prop::array::uniform3(-50.0f64..50.0), 4..40),
            shift in prop::array::uniform3(-10.0f64..10.0),
            s in 0.1f64..20.0,
        ) {
            let pts: Vec<Vector3<f64>> = pts.iter().map(|p| Vector3::from(*p)).collect();
            let pc = PointCloud::normalize(&pts).unwrap();
            for (a, b) in pc.denormalize().iter().zip(&pts) {
                prop_assert!((a - b).norm() <= 1e-9 * (1.0 + b.norm()));
            }
            prop_assert!(pc.points.iter().all(|p| p.amax() <= 1.0));
            let moved: Vec<Vector3<f64>> = pts.iter().map(|p| p * s + Vector3::from(shift)).collect();
            let pm = PointCloud::normalize(&moved).unwrap();
            for (a, b) in pm.points.iter().zip(&pc.points) {
                prop_assert!((a - b).norm() < 1e-9);
            }
        }
    }
}

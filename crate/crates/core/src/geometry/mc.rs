//! Marching cubes over a regular grid on an axis-aligned box.

use std::collections::HashMap;

use nalgebra::Vector3;
use rayon::prelude::*;

use super::mc_tables::{EDGE_TABLE, TRI_TABLE};
use super::{GeometryError, TriangleMesh};

/// Triangles at or below this area are dropped.
const MIN_AREA: f64 = 1e-12;

/// Crossings closer than this distance to a sample snap onto it, so corner
/// triangles either collapse onto a shared vertex or have legs long enough to
/// clear [`MIN_AREA`]; dropping them instead would leave holes.
const SNAP: f64 = 2e-6;

const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// `resolution` cells per axis over `[lo, hi]³`; `(resolution+1)³` samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub resolution: usize,
    pub lo: f64,
    pub hi: f64,
}

impl GridSpec {
    /// The normalized cube `[-1, 1]³`.
    pub fn unit(resolution: usize) -> Result<GridSpec, GeometryError> {
        if resolution < 8 {
            return Err(GeometryError::Resolution(resolution));
        }
        Ok(GridSpec {
            resolution,
            lo: -1.0,
            hi: 1.0,
        })
    }

    pub fn voxel(&self) -> f64 {
        (self.hi - self.lo) / self.resolution as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        if i == self.resolution {
            self.hi
        } else {
            self.lo + self.voxel() * i as f64
        }
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> Vector3<f64> {
        Vector3::new(self.coord(i), self.coord(j), self.coord(k))
    }
}

/// Evaluates one z-slice of samples, indexed `i + j·(n+1)`.
fn eval_slice<F>(spec: &GridSpec, k: usize, field: &F) -> Vec<f64>
where
    F: Fn(&[Vector3<f64>]) -> Vec<f64> + Sync,
{
    let n1 = spec.resolution + 1;
    (0..n1)
        .into_par_iter()
        .flat_map_iter(|j| {
            let row: Vec<Vector3<f64>> = (0..n1).map(|i| spec.point(i, j, k)).collect();
            let vals = field(&row);
            assert_eq!(vals.len(), n1, "field returned wrong number of values");
            vals
        })
        .collect()
}

/// Triangulates `{x : field(x) = iso}` with outward (towards increasing
/// field) counter-clockwise winding. Samples with value `≤ iso` count as
/// inside. `field` maps a batch of points to values and must be
/// deterministic; slices are evaluated in parallel.
pub fn extract_surface<F>(
    spec: &GridSpec,
    iso: f64,
    field: F,
) -> Result<TriangleMesh, GeometryError>
where
    F: Fn(&[Vector3<f64>]) -> Vec<f64> + Sync,
{
    if spec.resolution < 8 {
        return Err(GeometryError::Resolution(spec.resolution));
    }
    let n = spec.resolution;
    let n1 = n + 1;
    let mut builder = Builder {
        spec,
        iso,
        mesh: TriangleMesh::default(),
        edge_vertex: HashMap::new(),
    };
    let mut below = eval_slice(spec, 0, &field);
    for k in 0..n {
        let above = eval_slice(spec, k + 1, &field);
        for j in 0..n {
            for i in 0..n {
                let mut vals = [0.0; 8];
                for (c, off) in CORNERS.iter().enumerate() {
                    let slice = if off[2] == 0 { &below } else { &above };
                    vals[c] = slice[(i + off[0]) + (j + off[1]) * n1];
                }
                builder.cell([i, j, k], &vals);
            }
        }
        below = above;
    }
    Ok(builder.mesh)
}

/// Triangulates a full sample grid stored as `values[i + j·(n+1) + k·(n+1)²]`.
pub fn marching_cubes(
    spec: &GridSpec,
    values: &[f64],
    iso: f64,
) -> Result<TriangleMesh, GeometryError> {
    let n1 = spec.resolution + 1;
    assert_eq!(values.len(), n1 * n1 * n1, "grid size mismatch");
    let slice = n1 * n1;
    // Rebuild the point index from row coordinates.
    extract_surface(spec, iso, |row: &[Vector3<f64>]| {
        let j = index_of(spec, row[0].y);
        let k = index_of(spec, row[0].z);
        values[j * n1 + k * slice..(j + 1) * n1 + k * slice].to_vec()
    })
}

fn index_of(spec: &GridSpec, c: f64) -> usize {
    ((c - spec.lo) / spec.voxel()).round() as usize
}

/// Crossings that land exactly on a sample share that sample's vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum VertexKey {
    Edge([usize; 3], usize),
    Sample([usize; 3]),
}

struct Builder<'a> {
    spec: &'a GridSpec,
    iso: f64,
    mesh: TriangleMesh,
    edge_vertex: HashMap<VertexKey, u32>,
}

impl Builder<'_> {
    fn cell(&mut self, base: [usize; 3], vals: &[f64; 8]) {
        let mut case = 0usize;
        for (c, v) in vals.iter().enumerate() {
            if *v <= self.iso {
                case |= 1 << c;
            }
        }
        if EDGE_TABLE[case] == 0 {
            return;
        }
        let mut ids = [u32::MAX; 12];
        for (e, [a, b]) in EDGES.iter().enumerate() {
            if EDGE_TABLE[case] & (1 << e) != 0 {
                ids[e] = self.edge(base, *a, *b, vals);
            }
        }
        for tri in TRI_TABLE[case].chunks(3) {
            if tri[0] < 0 {
                break;
            }
            // The table winds clockwise seen from the inside-to-outside
            // direction of the field, so the last two corners are swapped.
            let f = [
                ids[tri[0] as usize],
                ids[tri[2] as usize],
                ids[tri[1] as usize],
            ];
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                continue;
            }
            if self.mesh.triangle_area(&f) <= MIN_AREA {
                continue;
            }
            self.mesh.faces.push(f);
        }
    }

    fn edge(&mut self, base: [usize; 3], a: usize, b: usize, vals: &[f64; 8]) -> u32 {
        let (ca, cb) = (CORNERS[a], CORNERS[b]);
        let axis = (0..3)
            .find(|&d| ca[d] != cb[d])
            .expect("edge spans one axis");
        // Interpolate from the lower endpoint so both neighbouring cells agree.
        let (lo_c, hi_c, vlo, vhi) = if ca[axis] < cb[axis] {
            (ca, cb, vals[a], vals[b])
        } else {
            (cb, ca, vals[b], vals[a])
        };
        let lo = [base[0] + lo_c[0], base[1] + lo_c[1], base[2] + lo_c[2]];
        let hi = [base[0] + hi_c[0], base[1] + hi_c[1], base[2] + hi_c[2]];
        let denom = vhi - vlo;
        let t = if denom != 0.0 {
            ((self.iso - vlo) / denom).clamp(0.0, 1.0)
        } else {
            0.5
        };
        let h = self.spec.voxel();
        let t = if t * h < SNAP {
            0.0
        } else if (1.0 - t) * h < SNAP {
            1.0
        } else {
            t
        };
        let key = if t == 0.0 {
            VertexKey::Sample(lo)
        } else if t == 1.0 {
            VertexKey::Sample(hi)
        } else {
            VertexKey::Edge(lo, axis)
        };
        if let Some(&id) = self.edge_vertex.get(&key) {
            return id;
        }
        let pa = self.spec.point(lo[0], lo[1], lo[2]);
        let pb = self.spec.point(hi[0], hi[1], hi[2]);
        let id = self.mesh.vertices.len() as u32;
        self.mesh.vertices.push(match key {
            VertexKey::Sample(_) if t == 0.0 => pa,
            VertexKey::Sample(_) => pb,
            VertexKey::Edge(..) => pa + (pb - pa) * t,
        });
        self.edge_vertex.insert(key, id);
        id
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(r: f64) -> impl Fn(&[Vector3<f64>]) -> Vec<f64> + Sync {
        move |xs| xs.iter().map(|x| x.norm() - r).collect()
    }

    #[test]
    fn sphere_vertices_within_one_voxel_diagonal() {
        let spec = GridSpec::unit(64).unwrap();
        let mesh = extract_surface(&spec, 0.0, sphere(0.5)).unwrap();
        let diag = spec.voxel() * 3f64.sqrt();
        assert!(mesh.faces.len() > 1000);
        for v in &mesh.vertices {
            assert!((v.norm() - 0.5).abs() < diag);
        }
        // |f| < max|∇f|·voxel with |∇f| = 1.
        assert!(mesh
            .vertices
            .iter()
            .all(|v| (v.norm() - 0.5).abs() < spec.voxel()));
        assert!(mesh.is_closed());
        assert_eq!(mesh.euler_characteristic(), 2);
        let vol = mesh.signed_volume();
        let exact = 4.0 / 3.0 * std::f64::consts::PI * 0.125;
        assert!(vol > 0.0 && (vol - exact).abs() < 0.02 * exact, "{vol}");
    }

    #[test]
    fn normals_point_along_increasing_field() {
        let spec = GridSpec::unit(16).unwrap();
        let mesh = extract_surface(&spec, 0.0, sphere(0.6)).unwrap();
        for f in &mesh.faces {
            let [a, b, c] = mesh.corners(f);
            let n = (b - a).cross(&(c - a));
            assert!(n.dot(&((a + b + c) / 3.0)) > 0.0);
        }
    }

    #[test]
    fn plane_is_flat() {
        let spec = GridSpec::unit(9).unwrap();
        let mesh = extract_surface(&spec, 0.0, |xs: &[Vector3<f64>]| {
            xs.iter().map(|x| x.z - 0.03).collect()
        })
        .unwrap();
        assert!(!mesh.is_empty());
        assert!(mesh.vertices.iter().all(|v| (v.z - 0.03).abs() < 1e-12));
        let area = mesh.area();
        assert!((area - 4.0).abs() < 1e-9, "{area}");
        for f in &mesh.faces {
            let [a, b, c] = mesh.corners(f);
            assert!((b - a).cross(&(c - a)).z > 0.0);
        }
    }

    #[test]
    fn sign_flip_reverses_orientation() {
        let spec = GridSpec::unit(20).unwrap();
        let f = |xs: &[Vector3<f64>]| -> Vec<f64> {
            xs.iter()
                .map(|x| (x - Vector3::new(0.1, -0.05, 0.02)).norm() - 0.47)
                .collect()
        };
        let a = extract_surface(&spec, 0.0, f).unwrap();
        let b = extract_surface(&spec, 0.0, |xs: &[Vector3<f64>]| {
            f(xs).into_iter().map(|v| -v).collect()
        })
        .unwrap();
        assert_eq!(a.vertices, b.vertices);
        assert!(a.signed_volume() > 0.0);
        assert!((a.signed_volume() + b.signed_volume()).abs() < 1e-9);
        assert!((a.area() - b.area()).abs() < 1e-9);
    }

    #[test]
    fn empty_and_resolution_errors() {
        let spec = GridSpec::unit(8).unwrap();
        let mesh = extract_surface(&spec, 0.0, |xs: &[Vector3<f64>]| vec![1.0; xs.len()]).unwrap();
        assert!(mesh.is_empty());
        assert!(matches!(
            GridSpec::unit(7),
            Err(GeometryError::Resolution(7))
        ));
    }

    #[test]
    fn full_grid_matches_streaming() {
        let spec = GridSpec::unit(12).unwrap();
        let n1 = 13;
        let mut values = Vec::with_capacity(n1 * n1 * n1);
        for k in 0..n1 {
            for j in 0..n1 {
                for i in 0..n1 {
                    values.push(spec.point(i, j, k).norm() - 0.55);
                }
            }
        }
        let a = marching_cubes(&spec, &values, 0.0).unwrap();
        let b = extract_surface(&spec, 0.0, sphere(0.55)).unwrap();
        assert_eq!(a, b);
    }
}

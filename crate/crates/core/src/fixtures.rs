//! Synthetic point clouds with known geometry, and measurements against it.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geometry::{chamfer, sample_mesh, ChamferKind, GeometryError, TriangleMesh};
use crate::nets::SineNet;

/// Uniform samples on a sphere about the origin.
pub fn sphere_cloud(n: usize, radius: f64, seed: u64) -> Vec<Vector3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let v: Vector3<f64> = Vector3::from_fn(|_, _| rng.sample(StandardNormal));
            v.normalize() * radius
        })
        .collect()
}

/// Closed triangular prism whose apex edge is the y axis. The two legs of
/// length `length` leave the apex along `(±sin(θ/2), 0, −cos(θ/2))`, so the
/// apex crease has dihedral angle `angle` (radians); the prism spans
/// `|y| ≤ length/2` and is capped at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crease {
    pub angle: f64,
    pub length: f64,
}

impl Crease {
    pub fn new(angle: f64) -> Crease {
        Crease { angle, length: 1.0 }
    }

    /// In-plane directions of the two legs, orthogonal to the crease line.
    pub fn directions(&self) -> [Vector3<f64>; 2] {
        let (s, c) = (0.5 * self.angle).sin_cos();
        [Vector3::new(s, 0.0, -c), Vector3::new(-s, 0.0, -c)]
    }

    /// Outward unit normals of the two legs.
    pub fn normals(&self) -> [Vector3<f64>; 2] {
        let (s, c) = (0.5 * self.angle).sin_cos();
        [Vector3::new(c, 0.0, s), Vector3::new(-c, 0.0, s)]
    }

    /// Point at distance `s` from the crease on leg `face`, height `y`.
    pub fn point(&self, face: usize, s: f64, y: f64) -> Vector3<f64> {
        self.directions()[face] * s + Vector3::y() * y
    }

    /// The prism as a closed mesh with outward orientation.
    pub fn mesh(&self) -> TriangleMesh {
        let h = 0.5 * self.length;
        let mut vertices = Vec::with_capacity(6);
        for y in [-h, h] {
            vertices.push(Vector3::new(0.0, y, 0.0));
            vertices.push(self.point(0, self.length, y));
            vertices.push(self.point(1, self.length, y));
        }
        let quads = [[0u32, 1, 4, 3], [0, 3, 5, 2], [1, 2, 5, 4]];
        let mut faces: Vec<[u32; 3]> = vec![[0, 2, 1], [3, 4, 5]];
        for [a, b, c, d] in quads {
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
        let mut mesh = TriangleMesh { vertices, faces };
        if mesh.signed_volume() < 0.0 {
            mesh.faces.iter_mut().for_each(|f| f.swap(1, 2));
        }
        mesh
    }

    /// `n` area-uniform samples over the prism with isotropic Gaussian noise
    /// of standard deviation `noise·length`.
    pub fn sample(&self, n: usize, noise: f64, seed: u64) -> Vec<Vector3<f64>> {
        let clean = sample_mesh(&self.mesh(), n, seed).expect("prism has positive area");
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        clean
            .into_iter()
            .map(|p| {
                let e: Vector3<f64> = Vector3::from_fn(|_, _| rng.sample(StandardNormal));
                p + e * (noise * self.length)
            })
            .collect()
    }

    /// Noise-free samples within distance `reach` of the crease line and
    /// `|y| ≤ half_height`, on a regular grid of spacing `step`.
    pub fn crease_band(&self, reach: f64, half_height: f64, step: f64) -> Vec<Vector3<f64>> {
        let ns = (reach / step).round() as usize;
        let ny = (half_height / step).round() as i64;
        let mut out = Vec::new();
        for face in 0..2 {
            for i in 0..=ns {
                for j in -ny..=ny {
                    if face == 1 && i == 0 {
                        continue;
                    }
                    out.push(self.point(face, i as f64 * step, j as f64 * step));
                }
            }
        }
        out
    }

    /// Distance from `p` to the crease line (the y axis).
    pub fn line_distance(p: &Vector3<f64>) -> f64 {
        (p.x * p.x + p.z * p.z).sqrt()
    }
}

/// Dihedral angle of a fitted field: mean field normals over the middle of
/// each face give the face directions `ŷ × n`, and the angle between those
/// is returned. `to_field` maps original coordinates into the field's frame.
pub fn measured_dihedral(
    crease: &Crease,
    field: &SineNet,
    to_field: impl Fn(&Vector3<f64>) -> Vector3<f64>,
) -> f64 {
    let dirs = crease.directions();
    let mut measured = [Vector3::zeros(); 2];
    for face in 0..2 {
        let mut acc = Vector3::zeros();
        let reference = crease.normals()[face];
        for i in 0..8 {
            for j in 0..8 {
                let s = crease.length * (0.35 + 0.3 * i as f64 / 7.0);
                let y = crease.length * (-0.2 + 0.4 * j as f64 / 7.0);
                let g = field.eval_f(&to_field(&crease.point(face, s, y))).1;
                if g.norm() > 0.0 {
                    let n = g.normalize();
                    acc += if n.dot(&reference) >= 0.0 { n } else { -n };
                }
            }
        }
        let d = Vector3::y().cross(&acc).normalize();
        measured[face] = if d.dot(&dirs[face]) >= 0.0 { d } else { -d };
    }
    measured[0].dot(&measured[1]).clamp(-1.0, 1.0).acos()
}

/// Chamfer distance between the part of `samples` within the crease band
/// and the noise-free band.
pub fn crease_chamfer(
    crease: &Crease,
    samples: &[Vector3<f64>],
    reach: f64,
    half_height: f64,
) -> Result<f64, GeometryError> {
    let truth = crease.crease_band(reach, half_height, reach / 40.0);
    let near: Vec<Vector3<f64>> = samples
        .iter()
        .filter(|p| Crease::line_distance(p) <= reach && p.y.abs() <= half_height)
        .copied()
        .collect();
    chamfer(&near, &truth, ChamferKind::Distance)
}

/// Mesh faces whose centroid lies within `reach` of the crease line and
/// `|y| ≤ half_height`.
pub fn crop_to_crease(mesh: &TriangleMesh, reach: f64, half_height: f64) -> TriangleMesh {
    let faces = mesh
        .faces
        .iter()
        .filter(|f| {
            let [a, b, c] = mesh.corners(f);
            let m = (a + b + c) / 3.0;
            Crease::line_distance(&m) <= reach && m.y.abs() <= half_height
        })
        .copied()
        .collect();
    TriangleMesh {
        vertices: mesh.vertices.clone(),
        faces,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crease_geometry() {
        for deg in [30.0f64, 90.0, 120.0] {
            let c = Crease::new(deg.to_radians());
            let [a, b] = c.directions();
            assert!((a.dot(&b).acos().to_degrees() - deg).abs() < 1e-12);
            let [na, nb] = c.normals();
            for (n, d) in [(na, a), (nb, b)] {
                assert!(n.dot(&d).abs() < 1e-15 && n.y.abs() < 1e-15);
                // Outward: the opposite leg lies behind each leg's plane.
                assert!(n.dot(&(a + b)) < 0.0);
            }
            let mesh = c.mesh();
            assert!(mesh.is_closed());
            assert_eq!(mesh.euler_characteristic(), 2);
            let volume = 0.5 * deg.to_radians().sin();
            assert!((mesh.signed_volume() - volume).abs() < 1e-12);
            let pts = c.sample(2000, 0.0, 1);
            let on_leg = pts
                .iter()
                .filter(|p| c.normals().iter().any(|n| n.dot(p).abs() < 1e-12))
                .count();
            assert!(pts.iter().all(|p| p.y.abs() <= 0.5 + 1e-12));
            assert!(on_leg > 500 && on_leg < 2000);
        }
        assert_eq!(
            Crease::new(1.0).sample(50, 0.02, 3),
            Crease::new(1.0).sample(50, 0.02, 3)
        );
    }

    #[test]
    fn sphere_samples_on_sphere() {
        let pts = sphere_cloud(500, 2.0, 4);
        assert!(pts.iter().all(|p| (p.norm() - 2.0).abs() < 1e-12));
        let mean = pts.iter().sum::<Vector3<f64>>() / 500.0;
        assert!(mean.norm() < 0.3);
    }

    #[test]
    fn dihedral_of_flat_field() {
        // f = z is exact for the 180° crease, whose faces both lie in z = 0.
        use crate::nets::{Activation, Dense};
        let c = Crease::new(std::f64::consts::PI);
        let mut l0 = Dense::zeros(3, 3);
        for i in 0..3 {
            l0.w[[i, i]] = 1.0;
        }
        let mut l1 = Dense::zeros(3, 1);
        l1.w[[0, 2]] = 1.0;
        let net = SineNet::from_layers(vec![l0, l1], vec![1.0], Activation::Identity).unwrap();
        let a = measured_dihedral(&c, &net, |p| *p);
        assert!((a.to_degrees() - 180.0).abs() < 1e-6, "{}", a.to_degrees());
    }
}

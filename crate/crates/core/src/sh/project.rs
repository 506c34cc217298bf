use nalgebra::{Matrix3, Vector3};

use super::{
    skew, so9_generators, wigner_from_rotation, OctaCoeffs, Rotation3, ShError, Vec9, WignerD4, C4,
    C8,
};

const TWIST_EPS: f64 = 1e-12;
const UNIT_TOL: f64 = 1e-6;

/// Minimal rotation taking `e_z` to `n`; the antipode `n = -e_z` maps to a
/// half turn about `e_x`.
pub fn rotation_z_to_n(n: &Vector3<f64>) -> Rotation3 {
    let n = n.normalize();
    if n.z < -1.0 + 1e-9 {
        return Rotation3::about_x(std::f64::consts::PI);
    }
    // I + K + K²/(1 + c) with K = [e_z × n]×, valid for c > -1.
    let k = skew(&Vector3::new(-n.y, n.x, 0.0));
    Rotation3::from_matrix_unchecked(Matrix3::identity() + k + k * k / (1.0 + n.z))
}

/// Closest z-aligned frame: keeps the `Y₄⁰` weight at `√(7/12)` and rescales
/// the twist pair `(q[0], q[8])` onto the circle of radius `√(5/12)`.
///
/// When both twist coefficients vanish every twist is equally close; the error
/// carries the `θ = 0` frame as a deterministic fallback.
pub fn project_z(q: &OctaCoeffs) -> Result<OctaCoeffs, ShError> {
    let r = q[0].hypot(q[8]);
    if r < TWIST_EPS {
        return Err(ShError::AmbiguousTwist {
            fallback: OctaCoeffs::new([C8, 0.0, 0.0, 0.0, C4, 0.0, 0.0, 0.0, 0.0]),
        });
    }
    Ok(OctaCoeffs::new([
        C8 * q[0] / r,
        0.0,
        0.0,
        0.0,
        C4,
        0.0,
        0.0,
        0.0,
        C8 * q[8] / r,
    ]))
}

fn check_unit(n: &Vector3<f64>) -> Result<(), ShError> {
    let norm = n.norm();
    if !((norm - 1.0).abs() <= UNIT_TOL) {
        return Err(ShError::NotUnit { norm });
    }
    Ok(())
}

/// Closest frame having one axis along `n`: `D Π_z(Dᵀ q)` with `D` the
/// Wigner matrix of [`rotation_z_to_n`]. The result does not depend on which
/// z-to-n rotation is used, since twists about `e_z` preserve the z-aligned set.
pub fn project_normal(q: &OctaCoeffs, n: &Vector3<f64>) -> Result<OctaCoeffs, ShError> {
    check_unit(n)?;
    let d = wigner_from_rotation(&rotation_z_to_n(n));
    match project_z(&d.apply_transpose(q)) {
        Ok(p) => Ok(d.apply(&p)),
        Err(ShError::AmbiguousTwist { fallback }) => Err(ShError::AmbiguousTwist {
            fallback: d.apply(&fallback),
        }),
        Err(e) => Err(e),
    }
}

/// A normal-aligned projection together with its sensitivity to rotating the
/// normal: `tangents[k] = ∂Π/∂ε_k` for `n → exp([ε]×) n`.
#[derive(Debug, Clone, Copy)]
pub struct NormalProjection {
    pub value: OctaCoeffs,
    pub tangents: [Vec9; 3],
    pub ambiguous: bool,
}

impl NormalProjection {
    /// Pulls a cotangent on the projected coefficients back to a cotangent on
    /// the (unit) normal; the result is orthogonal to `n`.
    pub fn normal_cotangent(&self, n: &Vector3<f64>, adjoint: &Vec9) -> Vector3<f64> {
        let m = Vector3::new(
            adjoint.dot(&self.tangents[0]),
            adjoint.dot(&self.tangents[1]),
            adjoint.dot(&self.tangents[2]),
        );
        m.cross(n)
    }
}

/// [`project_normal`] plus derivatives with respect to the normal direction.
/// Ambiguous twists return the fallback frame with zero tangents.
pub fn project_normal_with_tangents(q: &OctaCoeffs, n: &Vector3<f64>) -> NormalProjection {
    let d = wigner_from_rotation(&rotation_z_to_n(n));
    project_with_wigner(q, &d)
}

pub(crate) fn project_with_wigner(q: &OctaCoeffs, d: &WignerD4) -> NormalProjection {
    let w = d.apply_transpose(q);
    let pz = match project_z(&w) {
        Ok(p) => p,
        Err(e) => {
            return NormalProjection {
                value: d.apply(&e.fallback().expect("project_z only fails with a fallback")),
                tangents: [Vec9::zeros(); 3],
                ambiguous: true,
            }
        }
    };
    let value = d.apply(&pz);
    let r = w[0].hypot(w[8]);
    let r3 = r * r * r;
    let gens = so9_generators();
    let tangents = std::array::from_fn(|k| {
        let dw = -(d.0.tr_mul(&(gens[k] * q.0)));
        let mut jz = Vec9::zeros();
        jz[0] = C8 * (w[8] * w[8] * dw[0] - w[0] * w[8] * dw[8]) / r3;
        jz[8] = C8 * (w[0] * w[0] * dw[8] - w[0] * w[8] * dw[0]) / r3;
        gens[k] * value.0 + d.0 * jz
    });
    NormalProjection {
        value,
        tangents,
        ambiguous: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sh::random::*;
    use crate::sh::{canonical_coeffs, wigner_z};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    fn z_aligned(theta: f64) -> OctaCoeffs {
        wigner_z(theta).apply(&canonical_coeffs())
    }

    #[test]
    fn rotation_z_to_n_examples() {
        let ez = Vector3::z();
        assert!(
            (rotation_z_to_n(&ez).matrix() - Matrix3::identity())
                .abs()
                .max()
                < 1e-15
        );
        let ex = Vector3::x();
        assert!((rotation_z_to_n(&ex).apply(&ez) - ex).norm() < 1e-15);
        let flipped = rotation_z_to_n(&-ez);
        assert_eq!(flipped, Rotation3::about_x(PI));
        assert!((flipped.apply(&ez) + ez).norm() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let n = random_unit(&mut rng);
            let r = rotation_z_to_n(&n);
            assert!((r.apply(&ez) - n).norm() < 1e-12);
            assert!(Rotation3::from_matrix(*r.matrix()).is_ok());
        }
    }

    #[test]
    fn project_z_examples() {
        let q0 = canonical_coeffs();
        assert!((project_z(&q0).unwrap().0 - q0.0).abs().max() < 1e-15);
        for i in 0..16 {
            let q = z_aligned(i as f64 * 0.37);
            assert!((project_z(&q).unwrap().0 - q.0).abs().max() < 1e-14);
        }
        let q = OctaCoeffs::new([0.1, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.1]);
        let p = project_z(&q).unwrap();
        let c = (5.0f64 / 12.0).sqrt() / 2f64.sqrt();
        let expect = OctaCoeffs::new([c, 0.0, 0.0, 0.0, (7.0f64 / 12.0).sqrt(), 0.0, 0.0, 0.0, c]);
        assert!((p.0 - expect.0).abs().max() < 1e-15);
        // brute-force twist grid
        let best = (0..100_000)
            .map(|i| z_aligned(TAU * i as f64 / 100_000.0))
            .map(|c| (c.0 - q.0).norm())
            .fold(f64::INFINITY, f64::min);
        assert!((p.0 - q.0).norm() <= best + 1e-12);
    }

    #[test]
    fn degenerate_twist_is_signalled() {
        let q = OctaCoeffs::new([0.0, 0.3, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0]);
        let err = project_z(&q).unwrap_err();
        let fb = err.fallback().unwrap();
        assert_eq!(fb[0], C8);
        assert_eq!(fb[8], 0.0);
        assert!((fb.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn project_normal_examples() {
        let q0 = canonical_coeffs();
        for n in [Vector3::z(), Vector3::x(), Vector3::y(), -Vector3::x()] {
            let p = project_normal(&q0, &n).unwrap();
            assert!((p.0 - q0.0).abs().max() < 1e-12, "{n:?}");
        }
        assert!(matches!(
            project_normal(&q0, &Vector3::new(0.0, 0.0, 2.0)),
            Err(ShError::NotUnit { .. })
        ));
    }

    #[test]
    fn project_normal_idempotent_and_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let q = random_coeffs(&mut rng);
            let n = random_unit(&mut rng);
            let p = project_normal(&q, &n).unwrap();
            assert!((p.norm() - 1.0).abs() < 1e-12);
            let pp = project_normal(&p, &n).unwrap();
            assert!((pp.0 - p.0).abs().max() < 1e-10);
            let d = wigner_from_rotation(&rotation_z_to_n(&n));
            let best = (0..10_000)
                .map(|i| d.apply(&z_aligned(TAU * i as f64 / 10_000.0)))
                .map(|c| (c.0 - q.0).norm())
                .fold(f64::INFINITY, f64::min);
            assert!((p.0 - q.0).norm() <= best + 1e-9);
        }
    }

    #[test]
    fn tangents_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h = 1e-6;
        for _ in 0..20 {
            let q = random_coeffs(&mut rng);
            let n = random_unit(&mut rng);
            let np = project_normal_with_tangents(&q, &n);
            assert!((np.value.0 - project_normal(&q, &n).unwrap().0).norm() < 1e-14);
            for k in 0..3 {
                let mut e = Vector3::zeros();
                e[k] = h;
                let plus = crate::sh::RotationVec(e).to_rotation().apply(&n);
                let minus = crate::sh::RotationVec(-e).to_rotation().apply(&n);
                let fd = (project_normal(&q, &plus).unwrap().0
                    - project_normal(&q, &minus).unwrap().0)
                    / (2.0 * h);
                assert!((fd - np.tangents[k]).norm() < 1e-6 * (1.0 + fd.norm()));
            }
            // twisting about n leaves the projection unchanged
            let twist = np.tangents[0] * n.x + np.tangents[1] * n.y + np.tangents[2] * n.z;
            assert!(twist.norm() < 1e-9);
        }
    }
}

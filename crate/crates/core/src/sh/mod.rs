//! Octahedral frames in the band-4 spherical-harmonic representation.
//!
//! A frame `{±v₁, ±v₂, ±v₃}` is encoded by the band-4 coefficients of its
//! descriptor polynomial `F(s) = Σᵢ (vᵢ·s)⁴`, scaled so the coefficient vector
//! has unit norm. Rotating a frame by `R` multiplies its coefficients by the
//! 9×9 Wigner matrix `D(R)`; the set `{D(R)·q₀}` is the octahedral variety.
//!
//! Coefficient ordering is `m = -4..=4`; index 4 is `Y₄⁰` and index 8 is `Y₄⁴`.

mod axes;
pub mod basis;
mod project;
mod wigner;

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use thiserror::Error;

pub use axes::{
    coeffs_from_axes, descriptor_gradient, evaluate_descriptor, project_to_variety, recover_axes,
    variety_residual, VarietyProjection,
};
pub use project::{
    project_normal, project_normal_with_tangents, project_z, rotation_z_to_n, NormalProjection,
};
pub use wigner::{
    exp_so9, so9_generators, wigner_from_rotation, wigner_from_rotation_with, wigner_z, zyz_angles,
    RX_HALF_PI,
};

pub type Vec9 = SVector<f64, 9>;
pub type Mat9 = SMatrix<f64, 9, 9>;

/// `√(7/12)`, the `Y₄⁰` weight of the canonical frame.
pub const C4: f64 = 0.763_762_615_825_973_4;
/// `√(5/12)`, the `Y₄⁴` weight of the canonical frame.
pub const C8: f64 = 0.645_497_224_367_902_8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShError {
    #[error("matrix is not a rotation (orthogonality residual {residual:.3e}, det {det:.6})")]
    NotRotation { residual: f64, det: f64 },
    #[error("direction is not unit length (norm {norm})")]
    NotUnit { norm: f64 },
    #[error("twist is ambiguous: coefficients 0 and 8 vanish after alignment")]
    AmbiguousTwist { fallback: OctaCoeffs },
    #[error("power iteration did not converge")]
    NotConverged { best: Rotation3 },
    #[error("axes are not orthonormal (worst deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },
}

impl ShError {
    /// The deterministic substitute result carried by recoverable errors.
    pub fn fallback(&self) -> Option<OctaCoeffs> {
        match self {
            ShError::AmbiguousTwist { fallback } => Some(*fallback),
            _ => None,
        }
    }
}

/// Band-4 SH coefficients of an octahedral frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OctaCoeffs(pub Vec9);

impl OctaCoeffs {
    pub fn new(c: [f64; 9]) -> Self {
        OctaCoeffs(Vec9::from(c))
    }

    pub fn zeros() -> Self {
        OctaCoeffs(Vec9::zeros())
    }

    pub fn to_array(&self) -> [f64; 9] {
        self.0.into()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn normalized(&self) -> Self {
        OctaCoeffs(self.0 / self.0.norm())
    }

    pub fn dot(&self, other: &OctaCoeffs) -> f64 {
        self.0.dot(&other.0)
    }
}

impl std::ops::Index<usize> for OctaCoeffs {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Coefficients of the axis-aligned frame `{±e_x, ±e_y, ±e_z}`.
pub fn canonical_coeffs() -> OctaCoeffs {
    OctaCoeffs::new([0.0, 0.0, 0.0, 0.0, C4, 0.0, 0.0, 0.0, C8])
}

/// `‖qa − qb‖²`, which equals the L² distance between the two descriptor
/// functions over the sphere because the SH basis is orthonormal.
pub fn functional_difference(qa: &OctaCoeffs, qb: &OctaCoeffs) -> f64 {
    (qa.0 - qb.0).norm_squared()
}

/// A proper rotation; its columns are the frame's representation vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3(Matrix3<f64>);

impl Rotation3 {
    pub const ORTHO_TOL: f64 = 1e-6;

    pub fn identity() -> Self {
        Rotation3(Matrix3::identity())
    }

    /// Validates `RᵀR = I` and `det R = +1` to within [`Self::ORTHO_TOL`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, ShError> {
        let residual = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if !(residual <= Self::ORTHO_TOL) || !((det - 1.0).abs() <= Self::ORTHO_TOL) {
            return Err(ShError::NotRotation { residual, det });
        }
        Ok(Rotation3(m))
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation3(m)
    }

    pub fn from_columns(
        v1: &Vector3<f64>,
        v2: &Vector3<f64>,
        v3: &Vector3<f64>,
    ) -> Result<Self, ShError> {
        Self::from_matrix(Matrix3::from_columns(&[*v1, *v2, *v3]))
    }

    pub fn about_x(t: f64) -> Self {
        let (s, c) = t.sin_cos();
        Rotation3(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn about_y(t: f64) -> Self {
        let (s, c) = t.sin_cos();
        Rotation3(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn about_z(t: f64) -> Self {
        let (s, c) = t.sin_cos();
        Rotation3(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn axis(&self, i: usize) -> Vector3<f64> {
        self.0.column(i).into_owned()
    }

    pub fn transpose(&self) -> Self {
        Rotation3(self.0.transpose())
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }
}

impl std::ops::Mul for Rotation3 {
    type Output = Rotation3;
    fn mul(self, rhs: Rotation3) -> Rotation3 {
        Rotation3(self.0 * rhs.0)
    }
}

/// Rotation vector `θ·e` (axis times angle, radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationVec(pub Vector3<f64>);

impl RotationVec {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        RotationVec(Vector3::new(x, y, z))
    }

    /// `exp([v]×)` by the Rodrigues formula.
    pub fn to_rotation(&self) -> Rotation3 {
        let v = self.0;
        let theta = v.norm();
        let k = skew(&v);
        let (a, b) = if theta < 1e-8 {
            (1.0 - theta * theta / 6.0, 0.5 - theta * theta / 24.0)
        } else {
            (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
        };
        Rotation3(Matrix3::identity() + k * a + k * k * b)
    }
}

pub(crate) fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Band-4 Wigner matrix: maps the coefficients of `g(s)` to those of `g(Rᵀs)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WignerD4(pub Mat9);

impl WignerD4 {
    pub fn identity() -> Self {
        WignerD4(Mat9::identity())
    }

    pub fn apply(&self, q: &OctaCoeffs) -> OctaCoeffs {
        OctaCoeffs(self.0 * q.0)
    }

    pub fn apply_transpose(&self, q: &OctaCoeffs) -> OctaCoeffs {
        OctaCoeffs(self.0.tr_mul(&q.0))
    }

    pub fn transpose(&self) -> Self {
        WignerD4(self.0.transpose())
    }

    pub fn matrix(&self) -> &Mat9 {
        &self.0
    }
}

impl std::ops::Mul for WignerD4 {
    type Output = WignerD4;
    fn mul(self, rhs: WignerD4) -> WignerD4 {
        WignerD4(self.0 * rhs.0)
    }
}

/// Random rotations, directions and coefficient vectors for tests and the
/// self test.
pub mod random {
    use super::*;
    use nalgebra::{Quaternion, UnitQuaternion};
    use rand::Rng;
    use rand_distr::StandardNormal;

    pub fn random_rotation<R: Rng>(rng: &mut R) -> Rotation3 {
        let q = Quaternion::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let m = UnitQuaternion::from_quaternion(q)
            .to_rotation_matrix()
            .into_inner();
        Rotation3::from_matrix(m).unwrap()
    }

    pub fn random_unit<R: Rng>(rng: &mut R) -> Vector3<f64> {
        let v = Vector3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        v.normalize()
    }

    pub fn random_coeffs<R: Rng>(rng: &mut R) -> OctaCoeffs {
        OctaCoeffs(Vec9::from_fn(|_, _| rng.sample(StandardNormal)))
    }
}

#[cfg(test)]
mod tests {
    use super::random::*;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn canonical_values_and_norm() {
        let q = canonical_coeffs();
        assert_eq!(q[4], (7.0f64 / 12.0).sqrt());
        assert_eq!(q[8], (5.0f64 / 12.0).sqrt());
        assert!((q.norm() - 1.0).abs() < 1e-15);
        assert!((q[4] * q[4] + q[8] * q[8] - 1.0).abs() < 1e-15);
        assert!((q[4] - 0.763762).abs() < 1e-6 && (q[8] - 0.645497).abs() < 1e-6);
    }

    #[test]
    fn rejects_non_rotation() {
        let m = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            Rotation3::from_matrix(m),
            Err(ShError::NotRotation { .. })
        ));
        let reflect = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(Rotation3::from_matrix(reflect).is_err());
    }

    #[test]
    fn rodrigues_matches_axis_rotations() {
        let r = RotationVec::new(0.0, 0.0, 0.7).to_rotation();
        assert!((r.matrix() - Rotation3::about_z(0.7).matrix()).abs().max() < 1e-15);
        let r = RotationVec::new(-0.3, 0.0, 0.0).to_rotation();
        assert!((r.matrix() - Rotation3::about_x(-0.3).matrix()).abs().max() < 1e-15);
    }

    #[test]
    fn functional_difference_examples() {
        let q0 = canonical_coeffs();
        assert_eq!(functional_difference(&q0, &q0), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let d = wigner_from_rotation(&random_rotation(&mut rng));
            let (a, b) = (random_coeffs(&mut rng), random_coeffs(&mut rng));
            let lhs = functional_difference(&d.apply(&a), &d.apply(&b));
            assert!((lhs - functional_difference(&a, &b)).abs() < 1e-9);
        }
    }
}

use std::sync::OnceLock;

use nalgebra::Matrix3;

use super::{Mat9, Rotation3, RotationVec, WignerD4};

const S2: f64 = std::f64::consts::SQRT_2;
// sqrt(5), sqrt(7), sqrt(14), sqrt(35)
const S5: f64 = 2.236_067_977_499_79;
const S7: f64 = 2.645_751_311_064_590_7;
const S14: f64 = 3.741_657_386_773_941_3;
const S35: f64 = 5.916_079_783_099_616;

/// Band-4 Wigner matrix of the rotation by `π/2` about `e_x`, entries exact
/// up to rounding of the square roots.
#[rustfmt::skip]
pub const RX_HALF_PI: [[f64; 9]; 9] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, S14 / 4.0, 0.0, -S2 / 4.0, 0.0],
    [0.0, -0.75, 0.0, S7 / 4.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, S2 / 4.0, 0.0, S14 / 4.0, 0.0],
    [0.0, S7 / 4.0, 0.0, 0.75, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.375, 0.0, S5 / 4.0, 0.0, S35 / 8.0],
    [-S14 / 4.0, 0.0, -S2 / 4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, S5 / 4.0, 0.0, 0.5, 0.0, -S7 / 4.0],
    [S2 / 4.0, 0.0, -S14 / 4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, S35 / 8.0, 0.0, -S7 / 4.0, 0.0, 0.125],
];

fn rx_half_pi() -> &'static Mat9 {
    static M: OnceLock<Mat9> = OnceLock::new();
    M.get_or_init(|| Mat9::from_fn(|i, j| RX_HALF_PI[i][j]))
}

/// Wigner matrix of a rotation by `theta` about `e_z`. Each order pair
/// `(-m, m)` rotates as a 2×2 block by angle `mθ`.
pub fn wigner_z(theta: f64) -> WignerD4 {
    let mut d = Mat9::zeros();
    d[(4, 4)] = 1.0;
    for m in 1..=4usize {
        let (s, c) = (m as f64 * theta).sin_cos();
        let (lo, hi) = (4 - m, 4 + m);
        d[(lo, lo)] = c;
        d[(lo, hi)] = s;
        d[(hi, lo)] = -s;
        d[(hi, hi)] = c;
    }
    WignerD4(d)
}

/// Euler angles with `R = R_z(α)·R_y(β)·R_z(γ)`.
///
/// `γ` is solved from the residual `R_y(β)ᵀ R_z(α)ᵀ R`, so errors in `α` near
/// gimbal lock are absorbed rather than amplified.
pub fn zyz_angles(r: &Matrix3<f64>) -> (f64, f64, f64) {
    let alpha = r[(1, 2)].atan2(r[(0, 2)]);
    let beta = r[(0, 2)].hypot(r[(1, 2)]).atan2(r[(2, 2)]);
    let m = Rotation3::about_y(beta).matrix().transpose()
        * Rotation3::about_z(alpha).matrix().transpose()
        * r;
    let gamma = m[(1, 0)].atan2(m[(0, 0)]);
    (alpha, beta, gamma)
}

/// Wigner matrix of `r` via the ZYZ decomposition, with the y-rotation
/// conjugated from a z-rotation through the constant `R̃_x(π/2)`.
pub fn wigner_from_rotation(r: &Rotation3) -> WignerD4 {
    wigner_from_rotation_with(r, rx_half_pi())
}

/// [`wigner_from_rotation`] with a caller-supplied `R̃_x(π/2)`; lets the self
/// test run its negative control against a corrupted constant.
pub fn wigner_from_rotation_with(r: &Rotation3, rx: &Mat9) -> WignerD4 {
    let (alpha, beta, gamma) = zyz_angles(r.matrix());
    let dy = rx.transpose() * wigner_z(beta).0 * rx;
    WignerD4(wigner_z(alpha).0 * dy * wigner_z(gamma).0)
}

/// Generators `[L̃_x, L̃_y, L̃_z]` of the band-4 representation of so(3),
/// i.e. `d/dt D(exp(t[e_k]×))` at `t = 0`.
pub fn so9_generators() -> &'static [Mat9; 3] {
    static G: OnceLock<[Mat9; 3]> = OnceLock::new();
    G.get_or_init(|| {
        let mut lz = Mat9::zeros();
        for m in 1..=4usize {
            lz[(4 - m, 4 + m)] = m as f64;
            lz[(4 + m, 4 - m)] = -(m as f64);
        }
        let rx = rx_half_pi();
        // R_y(t) = R_x(π/2)ᵀ R_z(t) R_x(π/2);  R_x(t) = R_y(π/2) R_z(t) R_y(π/2)ᵀ
        let ly = rx.transpose() * lz * rx;
        let ry = rx.transpose() * wigner_z(std::f64::consts::FRAC_PI_2).0 * rx;
        let lx = ry * lz * ry.transpose();
        [lx, ly, lz]
    })
}

/// `exp(v·L̃)`: the Wigner matrix of the rotation vector `v`, computed by a
/// Padé scaling-and-squaring matrix exponential in so(9).
pub fn exp_so9(v: &RotationVec) -> WignerD4 {
    let [lx, ly, lz] = so9_generators();
    let a = lx * v.0.x + ly * v.0.y + lz * v.0.z;
    WignerD4(a.exp())
}

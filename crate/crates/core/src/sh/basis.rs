//! Real spherical-harmonic polynomials for bands 2 and 4.
//!
//! Each basis function is stored in homogeneous Cartesian form (the `r²`
//! factors expanded), so the same table serves evaluation on the unit sphere
//! and gradient evaluation in R³. Ordering is `m = -l..=l` ascending with no
//! Condon-Shortley phase: `Y_l^{-m}` carries `sin(mφ)`, `Y_l^{m}` carries `cos(mφ)`.

use nalgebra::Vector3;

/// `Y_0^0`, constant over the sphere.
pub const Y00: f64 = 0.28209479177387814;

pub(crate) struct Harmonic {
    scale: f64,
    terms: &'static [(f64, [i32; 3])],
}

impl Harmonic {
    pub(crate) fn eval(&self, p: &Vector3<f64>) -> f64 {
        let mut acc = 0.0;
        for &(c, [a, b, e]) in self.terms {
            acc += c * p.x.powi(a) * p.y.powi(b) * p.z.powi(e);
        }
        self.scale * acc
    }

    pub(crate) fn grad(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let (x, y, z) = (p.x, p.y, p.z);
        let mut g = Vector3::zeros();
        for &(c, [a, b, e]) in self.terms {
            if a > 0 {
                g.x += c * f64::from(a) * x.powi(a - 1) * y.powi(b) * z.powi(e);
            }
            if b > 0 {
                g.y += c * f64::from(b) * x.powi(a) * y.powi(b - 1) * z.powi(e);
            }
            if e > 0 {
                g.z += c * f64::from(e) * x.powi(a) * y.powi(b) * z.powi(e - 1);
            }
        }
        g * self.scale
    }
}

/// Band-4 basis values at `p` (homogeneous degree 4).
pub fn band4(p: &Vector3<f64>) -> [f64; 9] {
    std::array::from_fn(|i| BAND4[i].eval(p))
}

/// Band-2 basis values at `p` (homogeneous degree 2).
pub fn band2(p: &Vector3<f64>) -> [f64; 5] {
    std::array::from_fn(|i| BAND2[i].eval(p))
}

/// Gradients of the homogeneous band-4 basis at `p`.
pub fn band4_grad(p: &Vector3<f64>) -> [Vector3<f64>; 9] {
    std::array::from_fn(|i| BAND4[i].grad(p))
}

pub(crate) const BAND2: [Harmonic; 5] = [
    Harmonic {
        scale: 2.1850968611841584,
        terms: &[(0.5, [1, 1, 0])],
    },
    Harmonic {
        scale: 2.1850968611841584,
        terms: &[(0.5, [0, 1, 1])],
    },
    Harmonic {
        scale: 1.26156626101008,
        terms: &[(-0.25, [2, 0, 0]), (-0.25, [0, 2, 0]), (0.5, [0, 0, 2])],
    },
    Harmonic {
        scale: 2.1850968611841584,
        terms: &[(0.5, [1, 0, 1])],
    },
    Harmonic {
        scale: 2.1850968611841584,
        terms: &[(0.25, [2, 0, 0]), (-0.25, [0, 2, 0])],
    },
];

pub(crate) const BAND4: [Harmonic; 9] = [
    Harmonic {
        scale: 3.3377905890622728,
        terms: &[(0.75, [3, 1, 0]), (-0.75, [1, 3, 0])],
    },
    Harmonic {
        scale: 4.720348719413148,
        terms: &[(1.125, [2, 1, 1]), (-0.375, [0, 3, 1])],
    },
    Harmonic {
        scale: 1.26156626101008,
        terms: &[(-0.75, [3, 1, 0]), (-0.75, [1, 3, 0]), (4.5, [1, 1, 2])],
    },
    Harmonic {
        scale: 1.7841241161527712,
        terms: &[(-1.125, [2, 1, 1]), (-1.125, [0, 3, 1]), (1.5, [0, 1, 3])],
    },
    Harmonic {
        scale: 0.5641895835477563,
        terms: &[
            (0.5625, [4, 0, 0]),
            (1.125, [2, 2, 0]),
            (-4.5, [2, 0, 2]),
            (0.5625, [0, 4, 0]),
            (-4.5, [0, 2, 2]),
            (1.5, [0, 0, 4]),
        ],
    },
    Harmonic {
        scale: 1.7841241161527712,
        terms: &[(-1.125, [3, 0, 1]), (-1.125, [1, 2, 1]), (1.5, [1, 0, 3])],
    },
    Harmonic {
        scale: 1.26156626101008,
        terms: &[
            (-0.375, [4, 0, 0]),
            (2.25, [2, 0, 2]),
            (0.375, [0, 4, 0]),
            (-2.25, [0, 2, 2]),
        ],
    },
    Harmonic {
        scale: 4.720348719413148,
        terms: &[(0.375, [3, 0, 1]), (-1.125, [1, 2, 1])],
    },
    Harmonic {
        scale: 3.3377905890622728,
        terms: &[
            (0.1875, [4, 0, 0]),
            (-1.125, [2, 2, 0]),
            (0.1875, [0, 4, 0]),
        ],
    },
];

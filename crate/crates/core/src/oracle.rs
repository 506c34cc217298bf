//! Independent reference computations used by tests and the self test:
//! exact spherical quadrature, least-squares band-4 projection, brute-force
//! nearest neighbours and the cubic symmetry group.

use nalgebra::{Matrix3, Vector3};

use crate::sh::basis::band4;
use crate::sh::{OctaCoeffs, Rotation3, Vec9};

/// Product quadrature on the unit sphere: Gauss-Legendre in `cos θ` times a
/// uniform grid in `φ`. Exact for polynomials of degree `< min(2·n_theta, n_phi)`.
pub struct SphereQuadrature {
    pub points: Vec<Vector3<f64>>,
    pub weights: Vec<f64>,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

impl SphereQuadrature {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        let (nodes, gw) = gauss_legendre(n_theta);
        let mut points = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        let dphi = std::f64::consts::TAU / n_phi as f64;
        for (z, w) in nodes.iter().zip(&gw) {
            let rho = (1.0 - z * z).sqrt();
            for j in 0..n_phi {
                let phi = j as f64 * dphi;
                points.push(Vector3::new(rho * phi.cos(), rho * phi.sin(), *z));
                weights.push(w * dphi);
            }
        }
        SphereQuadrature { points, weights }
    }

    /// A grid exact through degree 19, enough for products of band-4 terms
    /// with quartic polynomials.
    pub fn default_exact() -> Self {
        Self::new(10, 20)
    }

    pub fn integrate(&self, f: impl Fn(&Vector3<f64>) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    /// Band-4 coefficients `∫ g·Y₄ᵐ` of a function on the sphere.
    pub fn project_band4(&self, g: impl Fn(&Vector3<f64>) -> f64) -> Vec9 {
        let mut c = Vec9::zeros();
        for (p, w) in self.points.iter().zip(&self.weights) {
            let gv = g(p) * w;
            for (ci, yi) in c.iter_mut().zip(band4(p)) {
                *ci += gv * yi;
            }
        }
        c
    }
}

/// Frame coefficients of the rotated axes computed by quadrature projection of
/// `Σᵢ (vᵢ·s)⁴`, rescaled to unit norm.
pub fn quadrature_frame_coeffs(quad: &SphereQuadrature, r: &Rotation3) -> OctaCoeffs {
    let c = quad.project_band4(|s| (0..3).map(|i| r.axis(i).dot(s).powi(4)).sum());
    OctaCoeffs(c / c.norm())
}

/// The 24 proper rotations mapping the coordinate axes onto themselves.
pub fn cubic_group() -> Vec<Rotation3> {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut out = Vec::with_capacity(24);
    for perm in PERMS {
        for signs in 0..8u32 {
            let mut m = Matrix3::zeros();
            for (row, &col) in perm.iter().enumerate() {
                m[(row, col)] = if signs >> row & 1 == 1 { -1.0 } else { 1.0 };
            }
            if m.determinant() > 0.0 {
                out.push(Rotation3::from_matrix(m).expect("signed permutation"));
            }
        }
    }
    out
}

/// Distance from `p` to its nearest neighbour in `set` by exhaustive scan.
pub fn brute_nearest(set: &[Vector3<f64>], p: &Vector3<f64>) -> f64 {
    set.iter()
        .map(|q| (q - p).norm_squared())
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Sorted distances from `p` to every point of `set`, self included.
pub fn brute_sorted_distances(set: &[Vector3<f64>], p: &Vector3<f64>) -> Vec<f64> {
    let mut d: Vec<f64> = set.iter().map(|q| (q - p).norm_squared()).collect();
    d.sort_by(f64::total_cmp);
    d.into_iter().map(f64::sqrt).collect()
}

/// Brute-force symmetric Chamfer, Hausdorff and F-score at threshold `tau`.
pub fn brute_metrics(a: &[Vector3<f64>], b: &[Vector3<f64>], tau: f64) -> (f64, f64, f64) {
    let da: Vec<f64> = a.iter().map(|p| brute_nearest(b, p)).collect();
    let db: Vec<f64> = b.iter().map(|p| brute_nearest(a, p)).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let chamfer = 0.5 * (mean(&da) + mean(&db));
    let hausdorff = max(&da).max(max(&db));
    let precision = da.iter().filter(|d| **d <= tau).count() as f64 / da.len() as f64;
    let recall = db.iter().filter(|d| **d <= tau).count() as f64 / db.len() as f64;
    let fscore = if precision + recall > 0.0 {
        100.0 * 2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (chamfer, hausdorff, fscore)
}

/// Quasi-uniform directions on the sphere (golden-angle spiral).
pub fn fibonacci_sphere(n: usize) -> Vec<Vector3<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vector3::new(rho * phi.cos(), rho * phi.sin(), z)
        })
        .collect()
}

/// Central finite difference of a scalar function of a parameter slot.
pub fn central_difference(h: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    (f(h) - f(-h)) / (2.0 * h)
}

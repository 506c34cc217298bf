use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::basis::{band2, band4, band4_grad};
use super::{
    canonical_coeffs, so9_generators, wigner_from_rotation, OctaCoeffs, Rotation3, RotationVec,
    ShError, Vec9,
};

/// `8√π / (5√21)`: descriptor = `3/5 + DESCRIPTOR_SCALE · qᵀ y₄(s)` on the sphere.
const DESCRIPTOR_SCALE: f64 = 0.618_849_823_816_419_1;
const BAND0_WEIGHT: f64 = 0.6;

const POWER_STARTS: usize = 8;
const POWER_ITERS: usize = 50;
const POWER_TOL: f64 = 1e-12;
const AXES_SEED: u64 = 0x0c7a_f1e1d;

const PROJECTION_STARTS: usize = 64;
const PROJECTION_ITERS: usize = 100;

/// Descriptor polynomial `F(s) = Σᵢ (vᵢ·s)⁴` rebuilt from band-4 coefficients
/// with the band-0 constant restored. Evaluated in homogeneous form, so it is
/// exact for unit `s` and quartic off the sphere.
pub fn evaluate_descriptor(q: &OctaCoeffs, s: &Vector3<f64>) -> f64 {
    let y = band4(s);
    let r2 = s.norm_squared();
    BAND0_WEIGHT * r2 * r2
        + DESCRIPTOR_SCALE * y.iter().zip(q.0.iter()).map(|(a, b)| a * b).sum::<f64>()
}

/// Gradient of the homogeneous descriptor polynomial.
pub fn descriptor_gradient(q: &OctaCoeffs, v: &Vector3<f64>) -> Vector3<f64> {
    let grads = band4_grad(v);
    let mut g = v * (4.0 * BAND0_WEIGHT * v.norm_squared());
    for (gi, qi) in grads.iter().zip(q.0.iter()) {
        g += gi * (DESCRIPTOR_SCALE * qi);
    }
    g
}

struct PowerResult {
    v: Vector3<f64>,
    value: f64,
    converged: bool,
}

fn power_iterate(
    q: &OctaCoeffs,
    start: Vector3<f64>,
    exclude: Option<&Vector3<f64>>,
) -> PowerResult {
    let restrict = |mut x: Vector3<f64>| {
        if let Some(c) = exclude {
            x -= c * c.dot(&x);
        }
        x
    };
    let mut v = restrict(start).normalize();
    let mut converged = false;
    for _ in 0..POWER_ITERS {
        let g = restrict(descriptor_gradient(q, &v));
        let norm = g.norm();
        if !(norm > 1e-300) {
            break;
        }
        let next = g / norm;
        let step = (next - v).norm();
        v = next;
        if step < POWER_TOL {
            converged = true;
            break;
        }
    }
    PowerResult {
        value: evaluate_descriptor(q, &v),
        v,
        converged,
    }
}

fn best_axis(
    q: &OctaCoeffs,
    starts: &[Vector3<f64>],
    exclude: Option<&Vector3<f64>>,
) -> (Vector3<f64>, bool) {
    let runs: Vec<PowerResult> = starts
        .iter()
        .map(|s| power_iterate(q, *s, exclude))
        .filter(|r| r.v.iter().all(|x| x.is_finite()))
        .collect();
    let pick = |pool: &mut dyn Iterator<Item = &PowerResult>| {
        pool.max_by(|a, b| a.value.total_cmp(&b.value)).map(|r| r.v)
    };
    if let Some(v) = pick(&mut runs.iter().filter(|r| r.converged)) {
        return (v, true);
    }
    (pick(&mut runs.iter()).unwrap_or_else(Vector3::x), false)
}

/// Representation vectors of a frame by the tensor power method
/// `v ← ∇F(v)/‖∇F(v)‖`: the first axis is the best of several seeded starts,
/// the second is searched in the orthogonal complement of the first, and the
/// third completes a right-handed basis.
pub fn recover_axes(q: &OctaCoeffs) -> Result<Rotation3, ShError> {
    let mut rng = ChaCha8Rng::seed_from_u64(AXES_SEED);
    let starts: Vec<Vector3<f64>> = (0..POWER_STARTS)
        .map(|_| {
            Vector3::new(
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            )
        })
        .collect();
    let (v1, ok1) = best_axis(q, &starts, None);
    let starts2: Vec<Vector3<f64>> = starts
        .iter()
        .map(|s| s - v1 * v1.dot(s))
        .filter(|s| s.norm() > 1e-6)
        .collect();
    let (v2, ok2) = best_axis(q, &starts2, Some(&v1));
    let v2 = (v2 - v1 * v1.dot(&v2)).normalize();
    let v3 = v1.cross(&v2);
    let r = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[v1, v2, v3]));
    if ok1 && ok2 {
        Ok(r)
    } else {
        Err(ShError::NotConverged { best: r })
    }
}

/// Orthonormality check shared by the zonal construction.
fn orthonormal_deviation(v: &[Vector3<f64>; 3]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        worst = worst.max((v[i].norm() - 1.0).abs());
        for j in i + 1..3 {
            worst = worst.max(v[i].dot(&v[j]).abs());
        }
    }
    worst
}

// z₄⁰·(2√π/3) with z₄⁰ = 16√π/105, and the band-4 rescale 5√21/(8√π).
const ZONAL_BAND4: f64 = 32.0 * std::f64::consts::PI / 315.0;
const ZONAL_TO_UNIT: f64 = 1.615_900_920_570_753_3;
// z₂⁰·√(4π/5) with z₂⁰ = (16√π/105)(3√5/2).
const ZONAL_BAND2: f64 = 16.0 * std::f64::consts::PI / 35.0;

/// Band-2 part of `Σᵢ (vᵢ·s)⁴`; vanishes exactly for orthonormal axes.
pub(crate) fn zonal_band2(v: &[Vector3<f64>; 3]) -> [f64; 5] {
    let mut c = [0.0; 5];
    for axis in v {
        for (ci, yi) in c.iter_mut().zip(band2(axis)) {
            *ci += ZONAL_BAND2 * yi;
        }
    }
    c
}

/// Frame coefficients summed from the zonal harmonics of each axis
/// `(vᵢ·s)⁴`, rescaled so `(e_x, e_y, e_z)` gives `q₀` exactly.
pub fn coeffs_from_axes(
    v1: &Vector3<f64>,
    v2: &Vector3<f64>,
    v3: &Vector3<f64>,
) -> Result<OctaCoeffs, ShError> {
    let axes = [*v1, *v2, *v3];
    let deviation = orthonormal_deviation(&axes);
    if !(deviation <= 1e-6) {
        return Err(ShError::NotOrthonormal { deviation });
    }
    let band2_norm = zonal_band2(&axes).iter().map(|c| c * c).sum::<f64>().sqrt();
    if band2_norm > 1e-5 {
        return Err(ShError::NotOrthonormal {
            deviation: band2_norm,
        });
    }
    let mut c = Vec9::zeros();
    for axis in &axes {
        for (ci, yi) in c.iter_mut().zip(band4(axis)) {
            *ci += ZONAL_BAND4 * yi;
        }
    }
    Ok(OctaCoeffs(c * ZONAL_TO_UNIT))
}

/// Nearest point on the octahedral variety found by damped Gauss-Newton over
/// rotations from many starts.
#[derive(Debug, Clone, Copy)]
pub struct VarietyProjection {
    pub rotation: Rotation3,
    pub coeffs: OctaCoeffs,
    pub residual: f64,
}

fn descend(q: &OctaCoeffs, start: Rotation3) -> VarietyProjection {
    let q0 = canonical_coeffs();
    let gens = so9_generators();
    let mut r = start;
    let mut p = wigner_from_rotation(&r).apply(&q0);
    let mut err = (q.0 - p.0).norm_squared();
    let mut damping = 1e-9;
    for _ in 0..PROJECTION_ITERS {
        let cols: [Vec9; 3] = std::array::from_fn(|k| gens[k] * p.0);
        let resid = q.0 - p.0;
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for a in 0..3 {
            jtr[a] = cols[a].dot(&resid);
            for b in 0..3 {
                jtj[(a, b)] = cols[a].dot(&cols[b]);
            }
        }
        let mut accepted = false;
        for _ in 0..30 {
            let lhs = jtj + Matrix3::identity() * damping;
            let Some(step) = lhs.lu().solve(&jtr) else {
                damping *= 10.0;
                continue;
            };
            let cand = Rotation3::from_matrix_unchecked(
                *RotationVec(step).to_rotation().matrix() * r.matrix(),
            );
            let cp = wigner_from_rotation(&cand).apply(&q0);
            let cerr = (q.0 - cp.0).norm_squared();
            if cerr <= err {
                let small = step.norm() < 1e-14;
                r = cand;
                p = cp;
                err = cerr;
                damping = (damping * 0.1).max(1e-12);
                accepted = !small;
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    VarietyProjection {
        rotation: r,
        coeffs: p,
        residual: err.sqrt(),
    }
}

/// Multi-start projection onto the octahedral variety. The warm start comes
/// from [`recover_axes`]; the search stops early once the residual meets the
/// lower bound `|‖q‖ − 1|` every unit vector satisfies.
pub fn project_to_variety(q: &OctaCoeffs) -> VarietyProjection {
    let lower = (q.norm() - 1.0).abs();
    let warm = match recover_axes(&if q.norm() > 0.0 { q.normalized() } else { *q }) {
        Ok(r) => r,
        Err(ShError::NotConverged { best }) => best,
        Err(_) => Rotation3::identity(),
    };
    let mut best = descend(q, warm);
    if best.residual <= lower + 1e-12 {
        return best;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(AXES_SEED ^ 0x5eed);
    for _ in 0..PROJECTION_STARTS {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let angle = rng.gen_range(0.0..std::f64::consts::PI);
        let start = RotationVec(v.normalize() * angle).to_rotation();
        let cand = descend(q, start);
        if cand.residual < best.residual {
            best = cand;
        }
        if best.residual <= lower + 1e-12 {
            break;
        }
    }
    best
}

/// Distance from `q` to the octahedral variety.
pub fn variety_residual(q: &OctaCoeffs) -> f64 {
    project_to_variety(q).residual
}

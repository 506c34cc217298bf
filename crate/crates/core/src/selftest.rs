//! Embedded oracle suite: each check compares a library routine against an
//! independent computation and reports the worst deviation.

use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{chamfer, fscore, hausdorff, ChamferKind};
use crate::losses::{LossWeights, Term, TermMask};
use crate::nets::{LipNet, SineNet};
use crate::oracle::{brute_metrics, cubic_group, quadrature_frame_coeffs, SphereQuadrature};
use crate::sh::basis::band4;
use crate::sh::random::{random_rotation, random_unit};
use crate::sh::{
    canonical_coeffs, coeffs_from_axes, exp_so9, wigner_from_rotation_with, Mat9, Rotation3,
    RotationVec, RX_HALF_PI,
};
use crate::training::{compute_gradients, Batch};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// Worst observed deviation.
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &'static str, error: f64, tolerance: f64) -> Check {
        Check {
            name,
            error,
            tolerance,
            passed: error <= tolerance,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect()
    }

    /// Fixed-width table, one row per check.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<32} {:>12} {:>10}  result\n",
            "check", "error", "tolerance"
        );
        for c in &self.checks {
            out.push_str(&format!(
                "{:<32} {:>12.3e} {:>10.1e}  {}\n",
                c.name,
                c.error,
                c.tolerance,
                if c.passed { "pass" } else { "FAIL" }
            ));
        }
        out
    }
}

/// Runs every check with the shipped `R_x(π/2)` matrix.
pub fn run(seed: u64) -> Summary {
    run_with(seed, &Mat9::from_fn(|i, j| RX_HALF_PI[i][j]))
}

/// Runs every check with `rx` substituted for the `R_x(π/2)` matrix used to
/// build Wigner matrices.
pub fn run_with(seed: u64, rx: &Mat9) -> Summary {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quad = SphereQuadrature::default_exact();
    let wigner = |r: &Rotation3| wigner_from_rotation_with(r, rx);
    let q0 = canonical_coeffs();
    let mut checks = Vec::new();

    let mut dev: f64 = 0.0;
    for i in 0..9 {
        let c = quad.project_band4(|s| band4(s)[i]);
        for j in 0..9 {
            dev = dev.max((c[j] - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    checks.push(Check::new("basis orthonormality", dev, 1e-10));

    let q = quadrature_frame_coeffs(&quad, &Rotation3::identity());
    checks.push(Check::new(
        "canonical frame",
        (q.0 - q0.0).abs().max(),
        1e-10,
    ));

    let rotations: Vec<Rotation3> = (0..50).map(|_| random_rotation(&mut rng)).collect();
    let mut homo: f64 = 0.0;
    let mut ortho: f64 = 0.0;
    for pair in rotations.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let ab = Rotation3::from_matrix(a.matrix() * b.matrix()).expect("product of rotations");
        let d = wigner(&ab).0 - wigner(a).0 * wigner(b).0;
        homo = homo.max(d.abs().max());
        let da = wigner(a).0;
        ortho = ortho.max((da.transpose() * da - Mat9::identity()).abs().max());
    }
    checks.push(Check::new("wigner homomorphism", homo, 1e-8));
    checks.push(Check::new("wigner orthogonality", ortho, 1e-8));

    let mut proj: f64 = 0.0;
    let mut zonal: f64 = 0.0;
    for r in rotations.iter().take(20) {
        let expect = quadrature_frame_coeffs(&quad, r);
        let got = wigner(r).apply(&q0);
        proj = proj.max((got.0 - expect.0).abs().max());
        let z = coeffs_from_axes(&r.axis(0), &r.axis(1), &r.axis(2)).expect("rotation axes");
        zonal = zonal.max((z.0 - got.0).abs().max());
    }
    checks.push(Check::new("wigner vs quadrature", proj, 1e-8));
    checks.push(Check::new("zonal vs wigner", zonal, 1e-8));

    let mut fix: f64 = 0.0;
    for g in cubic_group() {
        fix = fix.max((wigner(&g).apply(&q0).0 - q0.0).abs().max());
    }
    checks.push(Check::new("cubic group fixpoints", fix, 1e-8));

    let mut expd: f64 = 0.0;
    for _ in 0..20 {
        let v = random_unit(&mut rng) * rng.gen_range(0.0..3.0);
        let rv = RotationVec(v);
        expd = expd.max((exp_so9(&rv).0 - wigner(&rv.to_rotation()).0).abs().max());
    }
    checks.push(Check::new("exp_so9 vs zyz", expd, 1e-8));

    let (grad, hess) = input_derivative_errors(&mut rng);
    checks.push(Check::new("sine net input gradient", grad, 1e-4));
    checks.push(Check::new("sine net input hessian", hess, 1e-3));
    checks.push(Check::new(
        "loss parameter gradients",
        loss_gradient_error(&mut rng),
        1e-2,
    ));

    let (metric, lip) = metric_and_lipschitz(&mut rng);
    checks.push(Check::new("metrics vs brute force", metric, 0.0));
    checks.push(Check::new("lipschitz bound violations", lip, 0.0));

    Summary {
        checks,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, half: f64) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| Vector3::from_fn(|_, _| rng.gen_range(-half..half)))
        .collect()
}

/// Worst relative error of `∇f` and `H(f)` against central differences.
fn input_derivative_errors(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let net = SineNet::init(2, 24, rng.gen(), 6.0, 1.0);
    let h = 1e-5;
    let (mut eg, mut eh): (f64, f64) = (0.0, 0.0);
    for x in random_points(rng, 10, 0.8) {
        let (_, g, hm) = net.eval_f(&x);
        let mut fd_g = Vector3::zeros();
        let mut fd_h = nalgebra::Matrix3::zeros();
        for i in 0..3 {
            let mut e = Vector3::zeros();
            e[i] = h;
            fd_g[i] = (net.value(&(x + e)) - net.value(&(x - e))) / (2.0 * h);
            let col = (net.eval_f(&(x + e)).1 - net.eval_f(&(x - e)).1) / (2.0 * h);
            fd_h.set_column(i, &col);
        }
        eg = eg.max((g - fd_g).norm() / g.norm().max(1.0));
        eh = eh.max((hm - fd_h).norm() / hm.norm().max(1.0));
    }
    (eg, eh)
}

/// Worst relative error of parameter gradients against central differences
/// of the terms that train each network: the geometry terms, NSH included,
/// for `f`, and align plus lip for `u`. The full mask is evaluated, so the
/// stop-gradients are part of what is checked.
fn loss_gradient_error(rng: &mut ChaCha8Rng) -> f64 {
    let mut sine = SineNet::init(2, 12, rng.gen(), 6.0, 1.0);
    let mut lip = LipNet::init(2, 12, rng.gen(), 1.0);
    // Initial bounds equal the largest row norm, a kink of the row
    // normalization; lowering them puts rows strictly in the shrunk regime.
    for c in lip.c.iter_mut() {
        *c -= 0.5;
    }
    let batch = Batch {
        surface: random_points(rng, 16, 0.8),
        close: random_points(rng, 16, 0.8),
        off: random_points(rng, 16, 1.0),
    };
    let w = LossWeights::default();
    let g = compute_gradients(&sine, &lip, &batch, &w, TermMask::all()).expect("finite batch");
    let sine_grads: Vec<Vec<f64>> = g.sine.tensors().iter().map(|t| t.to_vec()).collect();
    let lip_grads: Vec<Vec<f64>> = g.lip.tensors().iter().map(|t| t.to_vec()).collect();
    let geometry = TermMask::only(&[
        Term::Positional,
        Term::Eikonal,
        Term::Off,
        Term::Nsh,
        Term::Regularize,
    ]);
    let frame = TermMask::only(&[Term::Align, Term::Lip]);
    let total = |s: &SineNet, l: &LipNet, mask: TermMask| {
        compute_gradients(s, l, &batch, &w, mask)
            .expect("finite batch")
            .report
            .total
    };
    let h = 1e-6;
    let rel = |fd: f64, analytic: f64| (fd - analytic).abs() / fd.abs().max(1e-3);
    let mut worst: f64 = 0.0;
    for (t, grad) in sine_grads.iter().enumerate() {
        for k in [0, grad.len() / 2] {
            let orig = sine.tensors_mut()[t][k];
            sine.tensors_mut()[t][k] = orig + h;
            let up = total(&sine, &lip, geometry);
            sine.tensors_mut()[t][k] = orig - h;
            let down = total(&sine, &lip, geometry);
            sine.tensors_mut()[t][k] = orig;
            worst = worst.max(rel((up - down) / (2.0 * h), grad[k]));
        }
    }
    for (t, grad) in lip_grads.iter().enumerate() {
        for k in [0, grad.len() / 2] {
            let orig = lip.tensors_mut()[t][k];
            lip.tensors_mut()[t][k] = orig + h;
            let up = total(&sine, &lip, frame);
            lip.tensors_mut()[t][k] = orig - h;
            let down = total(&sine, &lip, frame);
            lip.tensors_mut()[t][k] = orig;
            worst = worst.max(rel((up - down) / (2.0 * h), grad[k]));
        }
    }
    worst
}

/// Largest metric deviation from brute force, and the count of sampled
/// pairs whose difference quotient exceeds the frame network's bound.
fn metric_and_lipschitz(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let a = random_points(rng, 100, 1.0);
    let b = random_points(rng, 100, 1.0);
    let tau = 0.2;
    let (c, h, f) = brute_metrics(&a, &b, tau);
    let dc = (chamfer(&a, &b, ChamferKind::Distance).expect("nonempty") - c).abs();
    let dh = (hausdorff(&a, &b).expect("nonempty") - h).abs();
    let df = (fscore(&a, &b, tau).expect("nonempty") - f).abs();
    let self_f = (fscore(&a, &a, tau).expect("nonempty") - 100.0).abs();

    let lip = LipNet::init(2, 16, rng.gen(), 1.0);
    let bound = lip.lipschitz_bound();
    let mut violations = 0usize;
    for _ in 0..2000 {
        let x0 = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let x1 = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let du = (lip.eval_u(&x0) - lip.eval_u(&x1)).amax();
        if du > bound * (x0 - x1).amax() * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    (dc.max(dh).max(df).max(self_f), violations as f64)
}

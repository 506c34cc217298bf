use super::*;
use crate::nets::SineNet;
use crate::oracle::central_difference;
use crate::sh::random::{random_coeffs, random_rotation, random_unit};
use crate::sh::{canonical_coeffs, project_normal, wigner_from_rotation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn positional_and_off_examples() {
    let zeros = [0.0; 5];
    assert_eq!(positional_loss(&zeros).0, 0.0);
    assert_eq!(off_surface_loss(&zeros, 100.0).0, 1.0);
    let v = [2f64.ln() / 100.0, -(2f64.ln()) / 100.0];
    assert!((off_surface_loss(&v, 100.0).0 - 0.5).abs() < 1e-15);
    assert!((positional_loss(&[0.5, -1.5]).0 - 1.0).abs() < 1e-15);
    // plane f = n·x on points with n·x = 0
    let n = Vector3::new(1.0, 2.0, 2.0) / 3.0;
    let pts = [Vector3::new(2.0, -1.0, 0.0), Vector3::new(0.0, 1.0, -1.0)];
    let vals: Vec<f64> = pts.iter().map(|p| n.dot(p)).collect();
    assert!(positional_loss(&vals).0 < 1e-15);
    let vals = [0.003, -0.01, 0.02];
    let (_, adj) = off_surface_loss(&vals, 100.0);
    for i in 0..3 {
        let fd = central_difference(1e-7, |t| {
            let mut v = vals;
            v[i] += t;
            off_surface_loss(&v, 100.0).0
        });
        assert!((fd - adj[i]).abs() < 1e-6);
    }
}

#[test]
fn eikonal_examples() {
    let n = Vector3::new(0.0, 0.6, 0.8);
    assert!(eikonal_loss(&[n, n]).0.abs() < 1e-15);
    assert_eq!(eikonal_loss(&[Vector3::new(2.0, 0.0, 0.0)]).0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let grads: Vec<Vector3<f64>> = (0..50)
        .map(|_| {
            let x = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            x / x.norm()
        })
        .collect();
    assert!(eikonal_loss(&grads).0 < 1e-9);
    let (v, _, skipped) = eikonal_loss(&[Vector3::zeros(), Vector3::new(3.0, 0.0, 0.0)]);
    assert_eq!((v, skipped), (2.0, 1));
}

#[test]
fn cofactor_is_determinant_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    let c = cofactor(&h);
    for i in 0..3 {
        for j in 0..3 {
            let fd = central_difference(1e-6, |t| {
                let mut m = h;
                m[(i, j)] += t;
                m.determinant()
            });
            assert!((fd - c[(i, j)]).abs() < 1e-9);
        }
    }
    assert_eq!(cofactor(&Matrix3::zeros()), Matrix3::zeros());
}

#[test]
fn nsh_examples() {
    assert_eq!(nsh_loss(&[Matrix3::zeros()]).0, 0.0);
    assert_eq!(nsh_loss(&[Matrix3::identity()]).0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 0..5 {
        let net = SineNet::init(2, 16, seed, 30.0, 1.0);
        let x = Vector3::from_fn(|_, _| rng.gen_range(-0.5..0.5));
        let (_, _, h) = net.eval_f(&x);
        let fd = Matrix3::from_fn(|i, j| {
            let e = Vector3::from_fn(|k, _| if k == j { 1.0 } else { 0.0 });
            central_difference(1e-5, |t| net.eval_f(&(x + e * t)).1[i])
        });
        let (a, b) = (nsh_loss(&[h]).0, fd.determinant().abs());
        assert!((a - b).abs() / b.max(1e-3) < 1e-3, "{a} vs {b}");
    }
}

#[test]
fn lip_examples() {
    let one = softplus_inv_for_test(1.0);
    assert!((lip_loss(&[one, one, one]).0 - 1.0).abs() < 1e-12);
    let two = softplus_inv_for_test(2.0);
    let three = softplus_inv_for_test(3.0);
    assert!((lip_loss(&[two, three]).0 - 6.0).abs() < 1e-12);
    let c = [0.3, -1.2, 2.0];
    let (_, adj) = lip_loss(&c);
    for i in 0..3 {
        let fd = central_difference(1e-6, |t| {
            let mut v = c;
            v[i] += t;
            lip_loss(&v).0
        });
        assert!((fd - adj[i]).abs() < 1e-6);
    }
}

fn softplus_inv_for_test(y: f64) -> f64 {
    crate::nets::softplus_inv(y)
}

#[test]
fn align_examples() {
    let q0 = canonical_coeffs().0;
    let (v, _, _) = align_loss(&[q0], &[0.0], &[Vector3::z()], 100.0).unwrap();
    assert!(v.abs() < 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u = random_coeffs(&mut rng).normalized().0;
    let n = random_unit(&mut rng);
    let target = project_normal(&OctaCoeffs(u), &n).unwrap().0;
    let (v, _, _) = align_loss(&[target], &[0.0], &[n * 3.0], 100.0).unwrap();
    assert!(v.abs() < 1e-12);
    let base = align_loss(&[u], &[0.0], &[n], 100.0).unwrap().0;
    let damped = align_loss(&[u], &[0.01], &[n], 100.0).unwrap().0;
    assert!((damped / base - (-1f64).exp()).abs() < 1e-12);
    assert!((damped / base - 0.3679).abs() < 1e-4);
    let scaled = align_loss(&[u * 7.5], &[0.0], &[n], 100.0).unwrap().0;
    assert!((scaled - base).abs() < 1e-12 && (0.0..=2.0).contains(&base));
    assert_eq!(
        align_loss(&[u], &[0.0], &[Vector3::zeros()], 100.0),
        Err(LossError::AllDegenerate)
    );
}

#[test]
fn align_adjoint_matches_fd() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let us: Vec<Vec9> = (0..4).map(|_| random_coeffs(&mut rng).0).collect();
    let fs = [0.001, -0.002, 0.0, 0.004];
    let gs: Vec<Vector3<f64>> = (0..4).map(|_| random_unit(&mut rng) * 0.8).collect();
    let (_, adj, _) = align_loss(&us, &fs, &gs, 100.0).unwrap();
    for p in 0..4 {
        for k in 0..9 {
            let fd = central_difference(1e-6, |t| {
                let mut u = us.clone();
                u[p][k] += t;
                align_loss(&u, &fs, &gs, 100.0).unwrap().0
            });
            assert!((fd - adj[p][k]).abs() < 1e-7, "{fd} vs {}", adj[p][k]);
        }
    }
}

#[test]
fn align_decreases_toward_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = Vector3::z();
    for _ in 0..10 {
        let u0 = random_coeffs(&mut rng).normalized().0;
        let target = project_normal(&OctaCoeffs(u0), &n).unwrap().0;
        let mut prev = f64::INFINITY;
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            let u = (u0 * (1.0 - t) + target * t).normalize();
            let v = align_loss(&[u], &[0.0], &[n], 100.0).unwrap().0;
            assert!(v <= prev + 1e-12);
            prev = v;
        }
        assert!(prev.abs() < 1e-12);
    }
}

#[test]
fn regularize_examples() {
    let q0 = canonical_coeffs().0;
    let (v, _, _) = regularize_loss(&[q0], &[Vector3::z()]).unwrap();
    assert!(v < 1e-14);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let r = random_rotation(&mut rng);
        let u = wigner_from_rotation(&r).apply(&canonical_coeffs()).0 * 2.5;
        let axis = r.axis(rng.gen_range(0..3)) * 0.7;
        assert!(regularize_loss(&[u], &[axis]).unwrap().0 < 1e-9);
        let g = random_unit(&mut rng);
        let a = regularize_loss(&[u], &[g]).unwrap().0;
        let b = regularize_loss(&[u], &[-g]).unwrap().0;
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn regularize_adjoint_matches_fd() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let us: Vec<Vec9> = (0..5).map(|_| random_coeffs(&mut rng).0).collect();
    let gs: Vec<Vector3<f64>> = (0..5)
        .map(|_| random_unit(&mut rng) * rng.gen_range(0.5..2.0))
        .collect();
    let (_, adj, _) = regularize_loss(&us, &gs).unwrap();
    for p in 0..5 {
        for k in 0..3 {
            let fd = central_difference(1e-7, |t| {
                let mut g = gs.clone();
                g[p][k] += t;
                regularize_loss(&us, &g).unwrap().0
            });
            assert!((fd - adj[p][k]).abs() < 1e-5, "{fd} vs {}", adj[p][k]);
        }
    }
}

fn sample_inputs(seed: u64) -> LossInputs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = |n: usize, hess: bool| FieldSamples {
        values: (0..n).map(|_| rng.gen_range(-0.02..0.02)).collect(),
        grads: (0..n)
            .map(|_| random_unit(&mut rng) * rng.gen_range(0.5..1.5))
            .collect(),
        hessians: if hess {
            (0..n)
                .map(|_| Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0)))
                .collect()
        } else {
            Vec::new()
        },
    };
    let surface = field(6, false);
    let off = field(5, false);
    let close = field(4, true);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    LossInputs {
        surface,
        frames: (0..6).map(|_| random_coeffs(&mut rng).0).collect(),
        off,
        close,
        lip_c: vec![0.5, 1.0, -0.3],
    }
}

#[test]
fn total_matches_weighted_terms() {
    let inputs = sample_inputs(10);
    let w = LossWeights::default();
    let (report, _) = evaluate(&inputs, &w, TermMask::all()).unwrap();
    assert!((report.total - report.recompute_total()).abs() < 1e-12);
    let manual: f64 = Term::ALL
        .iter()
        .map(|&t| w.weight(t) * report.term(t))
        .sum();
    assert!((report.total - manual).abs() < 1e-12 * manual.abs().max(1.0));
    let (only, _) = evaluate(&inputs, &w, TermMask::only(&[Term::Positional])).unwrap();
    assert_eq!(
        only.total,
        w.positional * positional_loss(&inputs.surface.values).0
    );
    for t in Term::ALL {
        if t != Term::Positional {
            assert_eq!(only.term(t), 0.0);
            assert!(!only.active[t.index()]);
        }
    }
}

#[test]
fn stop_gradients_route_adjoints() {
    let inputs = sample_inputs(11);
    let w = LossWeights::default();
    let (_, align) = evaluate(&inputs, &w, TermMask::only(&[Term::Align])).unwrap();
    assert!(align.surface.values.iter().all(|v| *v == 0.0));
    assert!(align.surface.grads.iter().all(|g| *g == Vector3::zeros()));
    assert!(align.frames.iter().any(|f| f.norm() > 0.0));
    let (_, reg) = evaluate(&inputs, &w, TermMask::only(&[Term::Regularize])).unwrap();
    assert!(reg.frames.iter().all(|f| *f == Vec9::zeros()));
    assert!(reg.surface.grads.iter().any(|g| g.norm() > 0.0));
}

#[test]
fn evaluate_adjoints_match_fd() {
    let inputs = sample_inputs(12);
    let w = LossWeights {
        positional: 3.0,
        ..LossWeights::default()
    };
    let mask = TermMask::all();
    let total = |i: &LossInputs| evaluate(i, &w, mask).unwrap().0.total;
    let (_, adj) = evaluate(&inputs, &w, mask).unwrap();
    let h = 1e-7;
    let check = |fd: f64, a: f64| assert!((fd - a).abs() <= 1e-4 * (1.0 + a.abs()), "{fd} vs {a}");
    for p in 0..inputs.off.values.len() {
        let fd = central_difference(h, |t| {
            let mut i = inputs.clone();
            i.off.values[p] += t;
            total(&i)
        });
        check(fd, adj.off.values[p]);
        for k in 0..3 {
            let fd = central_difference(h, |t| {
                let mut i = inputs.clone();
                i.off.grads[p][k] += t;
                total(&i)
            });
            check(fd, adj.off.grads[p][k]);
        }
    }
    for p in 0..inputs.close.hessians.len() {
        for (r, c) in [(0, 0), (1, 2), (2, 1)] {
            let fd = central_difference(h, |t| {
                let mut i = inputs.clone();
                i.close.hessians[p][(r, c)] += t;
                total(&i)
            });
            check(fd, adj.close.hessians[p][(r, c)]);
        }
    }
    for k in 0..3 {
        let fd = central_difference(h, |t| {
            let mut i = inputs.clone();
            i.lip_c[k] += t;
            total(&i)
        });
        check(fd, adj.lip_c[k]);
    }
}

fn ring_minimum(sim: Similarity, d: &Vector3<f64>, radius: f64) -> f64 {
    let helper = if d.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let t1 = d.cross(&helper).normalize();
    let t2 = d.cross(&t1);
    (0..360)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / 360.0;
            let axis = t1 * a.cos() + t2 * a.sin();
            let r = crate::sh::RotationVec(axis * radius).to_rotation();
            manifold_value(sim, &r.apply(d))
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn smooth_manifolds_have_six_axis_minima() {
    for sim in [Similarity::L2, Similarity::Cosine] {
        let rows = manifold_table(sim, 100_000);
        let minima = local_minima(&rows, MINIMA_RADIUS);
        assert_eq!(minima.len(), 6, "{sim:?}: {minima:?}");
        for i in minima {
            assert!(rows[i].direction.amax() > 0.999);
        }
        if sim == Similarity::Cosine {
            assert!(rows.iter().all(|r| (0.0..=2.0).contains(&r.value)));
        }
    }
}

#[test]
fn l1_manifold_minima() {
    let rows = manifold_table(Similarity::L1, 100_000);
    let minima = local_minima(&rows, MINIMA_RADIUS);
    let at_axes = minima
        .iter()
        .filter(|&&i| rows[i].direction.amax() > 0.999)
        .count();
    assert_eq!(at_axes, 6);
    for axis in [Vector3::x(), Vector3::y(), Vector3::z()] {
        for d in [axis, -axis] {
            assert!(manifold_value(Similarity::L1, &d) < 1e-12);
            assert!(ring_minimum(Similarity::L1, &d, 1e-3) > 1e-4);
        }
    }
    // sparse differences at the edge midpoints are strict local minima of L1
    for d in [
        Vector3::new(1.0, 1.0, 0.0),
        Vector3::new(1.0, 0.0, 1.0),
        Vector3::new(0.0, 1.0, -1.0),
    ] {
        let d = d.normalize();
        let v = manifold_value(Similarity::L1, &d);
        for r in [1e-4, 1e-3, 1e-2] {
            assert!(ring_minimum(Similarity::L1, &d, r) > v);
        }
        assert!(ring_minimum(Similarity::L2, &d, 1e-3) < manifold_value(Similarity::L2, &d));
    }
    let l1 = manifold_slope(Similarity::L1, &Vector3::x(), 1e-3);
    let cos = manifold_slope(Similarity::Cosine, &Vector3::x(), 1e-3);
    assert!(l1 / cos > 1.0, "{l1} vs {cos}");
    let d = Vector3::new(1.0, 1.0, 1.0).normalize();
    let direct = (canonical_coeffs().0
        - project_normal(&canonical_coeffs(), &d)
            .unwrap_or_else(|e| e.fallback().unwrap())
            .0)
        .abs()
        .sum();
    assert_eq!(manifold_value(Similarity::L1, &d), direct);
}

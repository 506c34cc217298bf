use nalgebra::{Matrix3, Vector3};
use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dense, NetError, ParamGradients};

/// Hessian channel order: xx, yy, zz, xy, xz, yz.
pub(crate) const HESS_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

pub const DEFAULT_OMEGA: f64 = 30.0;

/// Radius of the sphere the geometric initialization starts from.
pub const GEOMETRIC_RADIUS: f64 = 0.5;

/// How many derivative channels a forward pass carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value,
    Gradient,
    Hessian,
}

impl Order {
    pub fn channels(self) -> usize {
        match self {
            Order::Value => 1,
            Order::Gradient => 4,
            Order::Hessian => 10,
        }
    }
}

/// Hidden-layer nonlinearity; `Identity` exists so tests can build exactly
/// affine networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Sine,
    Identity,
}

/// Geometry network `f(x) = W_L a_{L-1} + b_L` with hidden layers
/// `a_l = sin(ω_l (W_l a_{l-1} + b_l))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SineNet {
    pub layers: Vec<Dense>,
    /// Frequency of each hidden layer; one fewer entry than `layers`.
    pub omegas: Vec<f64>,
    /// Input premultiplier already folded into the first weight matrix.
    pub input_scale: f64,
    pub activation: Activation,
}

/// Sine-network initialization with `hidden` sine layers of `width` units:
/// first layer `U(±1/fan_in)`, later layers `U(±√(6/fan_in)/ω)`.
pub fn siren_init(hidden: usize, width: usize, seed: u64) -> SineNet {
    SineNet::init(hidden, width, seed, DEFAULT_OMEGA, 1.0)
}

impl SineNet {
    pub fn init(hidden: usize, width: usize, seed: u64, omega: f64, input_scale: f64) -> SineNet {
        assert!(hidden >= 1 && width >= 1, "need at least one hidden layer");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(hidden + 1);
        for l in 0..=hidden {
            let fan_in = if l == 0 { 3 } else { width };
            let fan_out = if l == hidden { 1 } else { width };
            let bound = if l == 0 {
                1.0 / fan_in as f64
            } else {
                (6.0 / fan_in as f64).sqrt() / omega
            };
            let mut d = Dense::zeros(fan_in, fan_out);
            d.w.mapv_inplace(|_| rng.gen_range(-bound..bound));
            d.b.mapv_inplace(|_| rng.gen_range(-bound..bound));
            if l == 0 {
                d.w *= input_scale;
            }
            layers.push(d);
        }
        SineNet {
            layers,
            omegas: vec![omega; hidden],
            input_scale,
            activation: Activation::Sine,
        }
    }

    /// Geometric initialization: near-linear early layers and a last hidden
    /// layer biased to `sin(π/2 + ε) ≈ 1 − ε²/2`, so the output is a convex
    /// quadratic bowl `k‖x‖² + f₀`. The output layer is then rescaled so the
    /// field approximates `(‖x‖² − r²)/(2r)` with `r` = [`GEOMETRIC_RADIUS`]:
    /// zero on that sphere with unit gradient there. Needs `hidden ≥ 2`.
    pub fn geometric_init(
        hidden: usize,
        width: usize,
        seed: u64,
        omega: f64,
        input_scale: f64,
    ) -> SineNet {
        assert!(
            hidden >= 2 && width >= 1,
            "geometric init needs two hidden layers"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = |rng: &mut ChaCha8Rng| rng.sample::<f64, _>(StandardNormal);
        let mut layers = Vec::with_capacity(hidden + 1);
        let half_pi = std::f64::consts::FRAC_PI_2;
        for l in 0..=hidden {
            let fan_in = if l == 0 { 3 } else { width };
            let fan_out = if l == hidden { 1 } else { width };
            let mut d = Dense::zeros(fan_in, fan_out);
            if l == hidden {
                d.w.mapv_inplace(|_| -1.0 + 1e-5 * normal(&mut rng));
                d.b.fill(width as f64);
            } else if l == hidden - 1 {
                for ((i, j), w) in d.w.indexed_iter_mut() {
                    let diag = if i == j { half_pi } else { 0.0 };
                    *w = (diag + 1e-3 * normal(&mut rng)) / omega;
                }
                d.b.mapv_inplace(|_| (half_pi + 1e-3 * normal(&mut rng)) / omega);
            } else {
                let bound = (3.0 / fan_out as f64).sqrt() / omega;
                let bias = 1.0 / (fan_out as f64 * 1000.0);
                d.w.mapv_inplace(|_| rng.gen_range(-bound..bound));
                d.b.mapv_inplace(|_| rng.gen_range(-bias..bias));
            }
            if l == 0 {
                d.w *= input_scale;
            }
            layers.push(d);
        }
        let mut net = SineNet {
            layers,
            omegas: vec![omega; hidden],
            input_scale,
            activation: Activation::Sine,
        };
        let r = GEOMETRIC_RADIUS;
        let dirs = crate::oracle::fibonacci_sphere(64);
        let probe: Vec<Vector3<f64>> = dirs.iter().map(|d| d * r).collect();
        let f0 = net.value(&Vector3::zeros());
        let k = net.values(&probe).iter().map(|f| f - f0).sum::<f64>() / (64.0 * r * r);
        let s = 1.0 / (2.0 * r * k);
        let out = net.layers.last_mut().expect("output layer");
        let b = out.b[0];
        out.w *= s;
        out.b[0] = -0.5 * r - s * (f0 - b);
        net
    }

    /// Builds a network from explicit layers, checking that shapes chain.
    pub fn from_layers(
        layers: Vec<Dense>,
        omegas: Vec<f64>,
        activation: Activation,
    ) -> Result<SineNet, NetError> {
        validate_chain(&layers, 3, 1)?;
        if omegas.len() + 1 != layers.len() {
            return Err(NetError::Checkpoint(format!(
                "{} layers need {} frequencies, found {}",
                layers.len(),
                layers.len() - 1,
                omegas.len()
            )));
        }
        Ok(SineNet {
            layers,
            omegas,
            input_scale: 1.0,
            activation,
        })
    }

    pub fn zero_grads(&self) -> ParamGradients {
        ParamGradients::zeros_like(&self.layers, 0)
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in self.layers.iter_mut() {
            out.push(l.w.as_slice_mut().expect("standard layout"));
            out.push(l.b.as_slice_mut().expect("standard layout"));
        }
        out
    }

    /// Value, input gradient and input Hessian at a single point.
    pub fn eval_f(&self, x: &Vector3<f64>) -> (f64, Vector3<f64>, Matrix3<f64>) {
        let tape = self.forward(std::slice::from_ref(x), Order::Hessian);
        (tape.value(0), tape.gradient(0), tape.hessian(0))
    }

    pub fn value(&self, x: &Vector3<f64>) -> f64 {
        self.forward(std::slice::from_ref(x), Order::Value).value(0)
    }

    /// Values at many points in one pass.
    pub fn values(&self, xs: &[Vector3<f64>]) -> Vec<f64> {
        let tape = self.forward(xs, Order::Value);
        (0..xs.len()).map(|i| tape.value(i)).collect()
    }

    /// Batched forward pass; the returned tape holds what the reverse pass needs.
    pub fn forward(&self, xs: &[Vector3<f64>], order: Order) -> SineTape {
        let n = xs.len();
        let ch = order.channels();
        let mut a = Array2::zeros((3, ch * n));
        for (p, x) in xs.iter().enumerate() {
            for r in 0..3 {
                a[(r, p)] = x[r];
                if ch > 1 {
                    a[(r, (1 + r) * n + p)] = 1.0;
                }
            }
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.w.dot(&a);
            z.slice_mut(s![.., 0..n])
                .axis_iter_mut(Axis(1))
                .for_each(|mut col| col += &layer.b);
            if l == last {
                inputs.push(a);
                return SineTape {
                    order,
                    n,
                    inputs,
                    pre,
                    out: z,
                };
            }
            z *= self.omegas[l];
            let next = match self.activation {
                Activation::Sine => sine_forward(&z, n, ch),
                Activation::Identity => z.clone(),
            };
            inputs.push(std::mem::replace(&mut a, next));
            pre.push(z);
        }
        unreachable!("network has an output layer")
    }

    /// Accumulates parameter gradients of a loss whose adjoint with respect to
    /// the tape's outputs is `adj`.
    pub fn backward(&self, tape: &SineTape, adj: &FieldAdjoint, grads: &mut ParamGradients) {
        let n = tape.n;
        let ch = tape.order.channels();
        let mut g = Array2::zeros((1, ch * n));
        for p in 0..n {
            g[(0, p)] = adj.values.get(p).copied().unwrap_or(0.0);
            if ch > 1 {
                if let Some(gr) = adj.grads.get(p) {
                    for j in 0..3 {
                        g[(0, (1 + j) * n + p)] = gr[j];
                    }
                }
            }
            if ch > 4 {
                if let Some(h) = adj.hessians.get(p) {
                    for (k, &(i, j)) in HESS_PAIRS.iter().enumerate() {
                        g[(0, (4 + k) * n + p)] = if i == j {
                            h[(i, i)]
                        } else {
                            h[(i, j)] + h[(j, i)]
                        };
                    }
                }
            }
        }
        let last = self.layers.len() - 1;
        for l in (0..=last).rev() {
            let a = &tape.inputs[l];
            let gl = &mut grads.layers[l];
            general_mat_mul(1.0, &g, &a.t(), 1.0, &mut gl.w);
            gl.b += &g.slice(s![.., 0..n]).sum_axis(Axis(1));
            if l == 0 {
                break;
            }
            let abar = self.layers[l].w.t().dot(&g);
            let z = &tape.pre[l - 1];
            let mut zbar = match self.activation {
                Activation::Sine => sine_backward(z, &abar, n, ch),
                Activation::Identity => abar,
            };
            zbar *= self.omegas[l - 1];
            g = zbar;
        }
    }
}

pub(crate) fn validate_chain(
    layers: &[Dense],
    input: usize,
    output: usize,
) -> Result<(), NetError> {
    let mut width = input;
    for (i, l) in layers.iter().enumerate() {
        if l.fan_in() != width || l.b.len() != l.fan_out() {
            return Err(NetError::Shape {
                layer: i,
                expected: width,
                found: l.fan_in(),
            });
        }
        width = l.fan_out();
    }
    if layers.is_empty() || width != output {
        return Err(NetError::Shape {
            layer: layers.len(),
            expected: output,
            found: width,
        });
    }
    Ok(())
}

fn sine_forward(z: &Array2<f64>, n: usize, ch: usize) -> Array2<f64> {
    let mut a = Array2::zeros(z.raw_dim());
    let cols = ch * n;
    if cols == 0 {
        return a;
    }
    let zs = z.as_slice().expect("standard layout");
    let out = a.as_slice_mut().expect("standard layout");
    for (zr, ar) in zs.chunks_exact(cols).zip(out.chunks_exact_mut(cols)) {
        for p in 0..n {
            let (s, c) = zr[p].sin_cos();
            ar[p] = s;
            if ch == 1 {
                continue;
            }
            let zj = [zr[n + p], zr[2 * n + p], zr[3 * n + p]];
            for j in 0..3 {
                ar[(1 + j) * n + p] = c * zj[j];
            }
            if ch == 4 {
                continue;
            }
            for (k, &(i, j)) in HESS_PAIRS.iter().enumerate() {
                let idx = (4 + k) * n + p;
                ar[idx] = c * zr[idx] - s * zj[i] * zj[j];
            }
        }
    }
    a
}

fn sine_backward(z: &Array2<f64>, abar: &Array2<f64>, n: usize, ch: usize) -> Array2<f64> {
    let mut zbar = Array2::zeros(z.raw_dim());
    let cols = ch * n;
    if cols == 0 {
        return zbar;
    }
    let zs = z.as_slice().expect("standard layout");
    let gs = abar.as_slice().expect("standard layout");
    let out = zbar.as_slice_mut().expect("standard layout");
    for ((zr, gr), or) in zs
        .chunks_exact(cols)
        .zip(gs.chunks_exact(cols))
        .zip(out.chunks_exact_mut(cols))
    {
        for p in 0..n {
            let (s, c) = zr[p].sin_cos();
            let mut z0 = gr[p] * c;
            if ch > 1 {
                let zj = [zr[n + p], zr[2 * n + p], zr[3 * n + p]];
                let mut zjbar = [0.0; 3];
                for j in 0..3 {
                    let g = gr[(1 + j) * n + p];
                    zjbar[j] = g * c;
                    z0 -= s * zj[j] * g;
                }
                if ch > 4 {
                    for (k, &(i, j)) in HESS_PAIRS.iter().enumerate() {
                        let idx = (4 + k) * n + p;
                        let g = gr[idx];
                        or[idx] = c * g;
                        z0 -= g * (s * zr[idx] + c * zj[i] * zj[j]);
                        zjbar[i] -= s * zj[j] * g;
                        zjbar[j] -= s * zj[i] * g;
                    }
                }
                for j in 0..3 {
                    or[(1 + j) * n + p] = zjbar[j];
                }
            }
            or[p] = z0;
        }
    }
    zbar
}

/// Activations recorded by [`SineNet::forward`]. Columns are grouped by
/// channel: block 0 holds values, blocks 1..4 the gradient, 4..10 the Hessian.
#[derive(Debug, Clone)]
pub struct SineTape {
    pub order: Order,
    pub n: usize,
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    out: Array2<f64>,
}

impl SineTape {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn value(&self, p: usize) -> f64 {
        self.out[(0, p)]
    }

    pub fn gradient(&self, p: usize) -> Vector3<f64> {
        assert!(
            self.order >= Order::Gradient,
            "tape has no gradient channels"
        );
        Vector3::from_fn(|j, _| self.out[(0, (1 + j) * self.n + p)])
    }

    pub fn hessian(&self, p: usize) -> Matrix3<f64> {
        assert!(self.order >= Order::Hessian, "tape has no Hessian channels");
        let mut h = Matrix3::zeros();
        for (k, &(i, j)) in HESS_PAIRS.iter().enumerate() {
            let v = self.out[(0, (4 + k) * self.n + p)];
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
        h
    }

    /// All channels the tape carries, unpacked per point.
    pub fn samples(&self) -> FieldSamples {
        let n = self.n;
        FieldSamples {
            values: (0..n).map(|p| self.value(p)).collect(),
            grads: if self.order >= Order::Gradient {
                (0..n).map(|p| self.gradient(p)).collect()
            } else {
                Vec::new()
            },
            hessians: if self.order >= Order::Hessian {
                (0..n).map(|p| self.hessian(p)).collect()
            } else {
                Vec::new()
            },
        }
    }
}

/// Field values with optional gradients and Hessians at a set of points.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FieldSamples {
    pub values: Vec<f64>,
    pub grads: Vec<Vector3<f64>>,
    pub hessians: Vec<Matrix3<f64>>,
}

/// Loss adjoint with respect to [`FieldSamples`]; empty vectors mean zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FieldAdjoint {
    pub values: Vec<f64>,
    pub grads: Vec<Vector3<f64>>,
    pub hessians: Vec<Matrix3<f64>>,
}

impl FieldAdjoint {
    pub fn zeros(n: usize, order: Order) -> Self {
        FieldAdjoint {
            values: vec![0.0; n],
            grads: if order >= Order::Gradient {
                vec![Vector3::zeros(); n]
            } else {
                Vec::new()
            },
            hessians: if order >= Order::Hessian {
                vec![Matrix3::zeros(); n]
            } else {
                Vec::new()
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::central_difference;
    use ndarray::{array, Array1};

    fn dense_from(w: Array2<f64>, b: Array1<f64>) -> Dense {
        Dense { w, b }
    }

    fn random_points(seed: u64, n: usize) -> Vec<Vector3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vector3::from_fn(|_, _| rng.gen_range(-0.9..0.9)))
            .collect()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
    }

    #[test]
    fn empty_batches() {
        let net = siren_init(2, 8, 1);
        let tape = net.forward(&[], Order::Hessian);
        assert!(tape.is_empty());
        let mut g = net.zero_grads();
        net.backward(&tape, &FieldAdjoint::zeros(0, Order::Hessian), &mut g);
        assert!(g.tensors().iter().all(|t| t.iter().all(|x| *x == 0.0)));
    }

    #[test]
    fn geometric_init_is_a_bowl() {
        let net = SineNet::geometric_init(3, 64, 4, DEFAULT_OMEGA, 1.0);
        let dir = Vector3::new(1.0, 0.3, -0.2).normalize();
        let at = |r: f64| net.value(&(dir * r));
        let (f0, f1, f2) = (at(0.0), at(0.5), at(1.0));
        // (‖x‖² − r²)/(2r) with r = 0.5: −0.25, 0, 0.75.
        assert!((f0 + 0.25).abs() < 0.02, "{f0}");
        assert!(f1.abs() < 0.05, "{f1}");
        assert!((f2 - 0.75).abs() < 0.15, "{f2}");
        let g = net.eval_f(&(dir * 0.5)).1;
        assert!((g.norm() - 1.0).abs() < 0.15, "{g}");
        assert_eq!(net, SineNet::geometric_init(3, 64, 4, DEFAULT_OMEGA, 1.0));
    }

    #[test]
    fn init_ranges_and_determinism() {
        let a = siren_init(4, 256, 7);
        assert_eq!(a, siren_init(4, 256, 7));
        assert_ne!(a, siren_init(4, 256, 8));
        assert!(a.layers[0].w.iter().all(|w| w.abs() <= 1.0 / 3.0));
        let max0 = a.layers[0].w.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        assert!(max0 > 0.3);
        let bound = (6.0f64 / 256.0).sqrt() / 30.0;
        for l in &a.layers[1..] {
            assert!(l.w.iter().all(|w| w.abs() <= bound));
        }
        let maxh = a.layers[2].w.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        assert!(maxh > 0.95 * bound);
        assert_eq!(a.layers.len(), 5);
    }

    #[test]
    fn input_scale_folds_into_first_layer() {
        let a = SineNet::init(2, 8, 3, 30.0, 1.0);
        let b = SineNet::init(2, 8, 3, 30.0, 100.0);
        assert_eq!(b.layers[0].w, &a.layers[0].w * 100.0);
        assert_eq!(b.layers[1], a.layers[1]);
    }

    #[test]
    fn affine_network_has_exact_derivatives() {
        let out = dense_from(array![[0.5, -2.0, 3.0]], array![0.25]);
        let net = SineNet::from_layers(vec![out], vec![], Activation::Sine).unwrap();
        let (v, g, h) = net.eval_f(&Vector3::new(1.0, 1.0, 1.0));
        assert_eq!(v, 1.75);
        assert_eq!(g, Vector3::new(0.5, -2.0, 3.0));
        assert_eq!(h, Matrix3::zeros());
        let mut lin = SineNet::init(2, 5, 1, 30.0, 1.0);
        lin.activation = Activation::Identity;
        let (_, _, h) = lin.eval_f(&Vector3::new(0.1, 0.2, 0.3));
        assert!(h.abs().max() < 1e-12);
    }

    #[test]
    fn batched_matches_single_point() {
        let net = SineNet::init(3, 16, 5, 30.0, 1.0);
        let pts = random_points(2, 7);
        let tape = net.forward(&pts, Order::Hessian);
        let grad_tape = net.forward(&pts, Order::Gradient);
        for (i, p) in pts.iter().enumerate() {
            let (v, g, h) = net.eval_f(p);
            assert_eq!(tape.value(i), v);
            assert_eq!(tape.gradient(i), g);
            assert_eq!(tape.hessian(i), h);
            assert_eq!(grad_tape.gradient(i), g);
            assert_eq!(net.value(p), v);
        }
    }

    #[test]
    fn input_derivatives_match_finite_differences() {
        for seed in 0..20 {
            let net = SineNet::init(3, 32, seed, 30.0, 1.0);
            let x = random_points(100 + seed, 1)[0];
            let (_, g, h) = net.eval_f(&x);
            assert!((h - h.transpose()).abs().max() < 1e-10);
            let step = 1e-4;
            for k in 0..3 {
                let e = Vector3::from_fn(|i, _| if i == k { 1.0 } else { 0.0 });
                let fd = central_difference(step, |t| net.value(&(x + e * t)));
                assert!(
                    rel_err(fd, g[k]) < 1e-4,
                    "seed {seed} grad {k}: {fd} vs {}",
                    g[k]
                );
                for j in 0..3 {
                    let fdh = central_difference(1e-5, |t| net.eval_f(&(x + e * t)).1[j]);
                    let scale = h.abs().max().max(1.0);
                    assert!(
                        (fdh - h[(j, k)]).abs() / scale < 1e-3,
                        "seed {seed} H[{j},{k}]"
                    );
                }
            }
        }
    }

    fn param_fd_check(
        net: &SineNet,
        loss: impl Fn(&SineNet) -> f64,
        analytic: &ParamGradients,
        tol: f64,
    ) {
        let mut probe = net.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut worst: f64 = 0.0;
        for _ in 0..40 {
            let l = rng.gen_range(0..net.layers.len());
            let (r, c) = net.layers[l].w.dim();
            let (i, j) = (rng.gen_range(0..r), rng.gen_range(0..c));
            let base = net.layers[l].w[(i, j)];
            let h = 1e-6 * base.abs().max(1e-2);
            let fd = central_difference(h, |t| {
                probe.layers[l].w[(i, j)] = base + t;
                loss(&probe)
            });
            probe.layers[l].w[(i, j)] = base;
            let a = analytic.layers[l].w[(i, j)];
            let scale = analytic
                .layers
                .iter()
                .flat_map(|d| d.w.iter())
                .fold(0.0f64, |m, v| m.max(v.abs()));
            worst = worst.max((fd - a).abs() / scale.max(1e-12));
            let bi = rng.gen_range(0..net.layers[l].b.len());
            let bb = net.layers[l].b[bi];
            let fd = central_difference(1e-6, |t| {
                probe.layers[l].b[bi] = bb + t;
                loss(&probe)
            });
            probe.layers[l].b[bi] = bb;
            worst = worst.max((fd - analytic.layers[l].b[bi]).abs() / scale.max(1e-12));
        }
        assert!(worst < tol, "worst relative error {worst}");
    }

    #[test]
    fn value_loss_param_gradients() {
        let net = SineNet::init(2, 12, 11, 30.0, 1.0);
        let x = Vector3::new(0.2, -0.4, 0.1);
        let tape = net.forward(&[x], Order::Value);
        let v = tape.value(0);
        let mut grads = net.zero_grads();
        let adj = FieldAdjoint {
            values: vec![2.0 * v],
            ..Default::default()
        };
        net.backward(&tape, &adj, &mut grads);
        param_fd_check(&net, |n| n.value(&x).powi(2), &grads, 1e-4);
    }

    #[test]
    fn gradient_norm_loss_param_gradients() {
        let net = SineNet::init(2, 12, 12, 30.0, 1.0);
        let x = Vector3::new(-0.3, 0.5, 0.2);
        let tape = net.forward(&[x], Order::Gradient);
        let g = tape.gradient(0);
        let mut grads = net.zero_grads();
        let adj = FieldAdjoint {
            values: vec![0.0],
            grads: vec![2.0 * g],
            ..Default::default()
        };
        net.backward(&tape, &adj, &mut grads);
        param_fd_check(&net, |n| n.eval_f(&x).1.norm_squared(), &grads, 1e-3);
    }

    #[test]
    fn hessian_determinant_param_gradients() {
        for seed in 0..3 {
            let net = SineNet::init(2, 10, 20 + seed, 30.0, 1.0);
            let x = Vector3::new(0.1, 0.3, -0.2);
            let tape = net.forward(&[x], Order::Hessian);
            let h = tape.hessian(0);
            let det = h.determinant();
            // d|det H|/dH = sign(det)·cof(H)
            let cof = h.try_inverse().unwrap().transpose() * det;
            let mut grads = net.zero_grads();
            let adj = FieldAdjoint {
                values: vec![0.0],
                grads: vec![Vector3::zeros()],
                hessians: vec![cof * det.signum()],
            };
            net.backward(&tape, &adj, &mut grads);
            param_fd_check(&net, |n| n.eval_f(&x).2.determinant().abs(), &grads, 1e-2);
        }
    }
}

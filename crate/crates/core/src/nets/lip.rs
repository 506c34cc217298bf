use nalgebra::Vector3;
use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sine::validate_chain;
use super::{sigmoid, softplus, softplus_inv, Dense, NetError, ParamGradients};
use crate::sh::Vec9;

/// Rows whose absolute sum exceeds the bound by less than this relative slack
/// are left untouched, which keeps normalization bit-idempotent.
const ROW_SLACK: f64 = 1e-12;

pub const DEFAULT_LIP_INPUT_SCALE: f64 = 100.0;

/// Frame-field network `u: R³ → R⁹` with tanh hidden layers. Each weight
/// matrix is used through its row-normalized form, whose ∞-norm is at most
/// `softplus(cᵢ)`, so `∏ softplus(cᵢ)` bounds the network's ∞-norm Lipschitz
/// constant with respect to unscaled input coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LipNet {
    pub layers: Vec<Dense>,
    /// Raw Lipschitz parameters, one per layer.
    pub c: Vec<f64>,
    /// Input premultiplier already folded into the first weight matrix.
    pub input_scale: f64,
}

/// `hidden` tanh layers of `width` units, weights `U(±1/√fan_in)`, input
/// scale 100 folded into the first layer, and `softplus(cᵢ) = ‖Wᵢ‖_∞`.
pub fn lipnet_init(hidden: usize, width: usize, seed: u64) -> LipNet {
    LipNet::init(hidden, width, seed, DEFAULT_LIP_INPUT_SCALE)
}

fn inf_norm(w: &Array2<f64>) -> f64 {
    w.rows()
        .into_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl LipNet {
    pub fn init(hidden: usize, width: usize, seed: u64, input_scale: f64) -> LipNet {
        assert!(hidden >= 1 && width >= 1, "need at least one hidden layer");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(hidden + 1);
        for l in 0..=hidden {
            let fan_in = if l == 0 { 3 } else { width };
            let fan_out = if l == hidden { 9 } else { width };
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut d = Dense::zeros(fan_in, fan_out);
            d.w.mapv_inplace(|_| rng.gen_range(-bound..bound));
            d.b.mapv_inplace(|_| rng.gen_range(-bound..bound));
            if l == 0 {
                d.w *= input_scale;
            }
            layers.push(d);
        }
        let mut net = LipNet {
            layers,
            c: Vec::new(),
            input_scale,
        };
        net.reset_bounds();
        net
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<LipNet, NetError> {
        validate_chain(&layers, 3, 9)?;
        let mut net = LipNet {
            layers,
            c: Vec::new(),
            input_scale: 1.0,
        };
        net.reset_bounds();
        Ok(net)
    }

    /// Sets every raw bound so `softplus(cᵢ) = ‖Wᵢ‖_∞`.
    pub fn reset_bounds(&mut self) {
        self.c = self
            .layers
            .iter()
            .map(|l| softplus_inv(inf_norm(&l.w)))
            .collect();
    }

    pub fn bounds(&self) -> Vec<f64> {
        self.c.iter().map(|&c| softplus(c)).collect()
    }

    /// `∏ softplus(cᵢ)`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.bounds().iter().product()
    }

    /// Row scale factors: `Some(softplus(c)/rᵢ)` for rows that are shrunk.
    fn row_scales(&self, l: usize) -> Vec<Option<f64>> {
        let bound = softplus(self.c[l]);
        self.layers[l]
            .w
            .rows()
            .into_iter()
            .map(|row| {
                let r: f64 = row.iter().map(|x| x.abs()).sum();
                (r > bound * (1.0 + ROW_SLACK)).then(|| bound / r)
            })
            .collect()
    }

    /// The weight matrix layer `l` actually applies.
    pub fn effective_weights(&self, l: usize) -> Array2<f64> {
        let mut w = self.layers[l].w.clone();
        for (mut row, s) in w.rows_mut().into_iter().zip(self.row_scales(l)) {
            if let Some(s) = s {
                row.mapv_inplace(|x| x * s);
            }
        }
        w
    }

    /// Replaces stored weights by their effective (normalized) form.
    pub fn normalized(&self) -> LipNet {
        let mut out = self.clone();
        for l in 0..self.layers.len() {
            out.layers[l].w = self.effective_weights(l);
        }
        out
    }

    pub fn zero_grads(&self) -> ParamGradients {
        ParamGradients::zeros_like(&self.layers, self.c.len())
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        super::layer_tensors_mut(&mut self.layers, &mut self.c)
    }

    pub fn eval_u(&self, x: &Vector3<f64>) -> Vec9 {
        self.forward(std::slice::from_ref(x)).output(0)
    }

    pub fn eval_many(&self, xs: &[Vector3<f64>]) -> Vec<Vec9> {
        let tape = self.forward(xs);
        (0..xs.len()).map(|i| tape.output(i)).collect()
    }

    pub fn forward(&self, xs: &[Vector3<f64>]) -> LipTape {
        let n = xs.len();
        let mut a = Array2::from_shape_fn((3, n), |(r, p)| xs[p][r]);
        let last = self.layers.len() - 1;
        let mut weights = Vec::with_capacity(self.layers.len());
        let mut inputs = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let w = self.effective_weights(l);
            let mut z = w.dot(&a);
            z.axis_iter_mut(Axis(1)).for_each(|mut col| col += &layer.b);
            if l != last {
                z.mapv_inplace(f64::tanh);
            }
            inputs.push(std::mem::replace(&mut a, z));
            weights.push(w);
        }
        LipTape {
            n,
            weights,
            inputs,
            out: a,
        }
    }

    /// Accumulates parameter gradients given per-point output adjoints.
    pub fn backward(&self, tape: &LipTape, adj: &[Vec9], grads: &mut ParamGradients) {
        let n = tape.n;
        let mut g = Array2::from_shape_fn((9, n), |(r, p)| adj[p][r]);
        for l in (0..self.layers.len()).rev() {
            let a = &tape.inputs[l];
            let mut gw = Array2::zeros(self.layers[l].w.raw_dim());
            general_mat_mul(1.0, &g, &a.t(), 0.0, &mut gw);
            grads.layers[l].b += &g.sum_axis(Axis(1));
            self.pull_back_normalization(l, &gw, grads);
            if l == 0 {
                break;
            }
            let mut abar = tape.weights[l].t().dot(&g);
            // the input to layer l is tanh output: d tanh = 1 − a²
            abar.zip_mut_with(a, |gb, &av| *gb *= 1.0 - av * av);
            g = abar;
        }
    }

    fn pull_back_normalization(&self, l: usize, gw: &Array2<f64>, grads: &mut ParamGradients) {
        let bound = softplus(self.c[l]);
        let dbound = sigmoid(self.c[l]);
        let w = &self.layers[l].w;
        let scales = self.row_scales(l);
        let out = &mut grads.layers[l].w;
        for (i, s) in scales.iter().enumerate() {
            let (grow, wrow) = (gw.row(i), w.row(i));
            match s {
                None => out.row_mut(i).zip_mut_with(&grow, |o, g| *o += g),
                Some(s) => {
                    let r = bound / s;
                    let dot: f64 = grow.iter().zip(wrow.iter()).map(|(g, w)| g * w).sum();
                    let coupling = bound / (r * r) * dot;
                    for k in 0..w.ncols() {
                        let sign = if wrow[k] > 0.0 {
                            1.0
                        } else if wrow[k] < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        out[(i, k)] += s * grow[k] - sign * coupling;
                    }
                    grads.c[l] += dbound / r * dot;
                }
            }
        }
    }
}

/// Activations recorded by [`LipNet::forward`].
#[derive(Debug, Clone)]
pub struct LipTape {
    pub n: usize,
    weights: Vec<Array2<f64>>,
    inputs: Vec<Array2<f64>>,
    out: Array2<f64>,
}

impl LipTape {
    pub fn output(&self, p: usize) -> Vec9 {
        Vec9::from_fn(|r, _| self.out[(r, p)])
    }
}

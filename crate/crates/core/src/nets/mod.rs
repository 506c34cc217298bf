//! Coordinate networks with analytic derivatives.
//!
//! [`SineNet`] is the geometry network `f: R³ → R`; a batched forward pass
//! carries value, input gradient and input Hessian channels through every
//! layer, and the reverse pass runs through all of them, so parameter
//! gradients of losses on `∇f` and `H(f)` are exact.
//!
//! [`LipNet`] is the frame-field network `u: R³ → R⁹` whose layers have their
//! rows rescaled so each weight matrix has ∞-norm at most `softplus(cᵢ)`.

mod checkpoint;
mod lip;
mod sine;

use ndarray::{Array1, Array2};
use thiserror::Error;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use lip::{lipnet_init, LipNet, LipTape};
pub use sine::{
    siren_init, Activation, FieldAdjoint, FieldSamples, Order, SineNet, SineTape, DEFAULT_OMEGA,
};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("layer {layer}: expected input width {expected}, found {found}")]
    Shape {
        layer: usize,
        expected: usize,
        found: usize,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One affine layer `x ↦ W x + b`; `w` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            w: Array2::zeros((output, input)),
            b: Array1::zeros(output),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.w.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.w.nrows()
    }
}

/// Parameter gradients laid out exactly like the owning network; `c` holds the
/// Lipschitz parameters and is empty for a [`SineNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradients {
    pub layers: Vec<Dense>,
    pub c: Vec<f64>,
}

impl ParamGradients {
    pub fn zeros_like(layers: &[Dense], n_c: usize) -> Self {
        ParamGradients {
            layers: layers
                .iter()
                .map(|l| Dense::zeros(l.fan_in(), l.fan_out()))
                .collect(),
            c: vec![0.0; n_c],
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            out.push(l.w.as_slice().expect("standard layout"));
            out.push(l.b.as_slice().expect("standard layout"));
        }
        if !self.c.is_empty() {
            out.push(&self.c);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.w *= s;
            l.b *= s;
        }
        self.c.iter_mut().for_each(|c| *c *= s);
    }

    pub fn add_assign(&mut self, other: &ParamGradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.w += &b.w;
            a.b += &b.b;
        }
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            *a += b;
        }
    }
}

pub(crate) fn layer_tensors_mut<'a>(
    layers: &'a mut [Dense],
    c: &'a mut Vec<f64>,
) -> Vec<&'a mut [f64]> {
    let mut out: Vec<&mut [f64]> = Vec::new();
    for l in layers.iter_mut() {
        out.push(l.w.as_slice_mut().expect("standard layout"));
        out.push(l.b.as_slice_mut().expect("standard layout"));
    }
    if !c.is_empty() {
        out.push(c.as_mut_slice());
    }
    out
}

/// `ln(1 + eˣ)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Lower clamp on raw Lipschitz parameters so zero-norm layers stay finite.
pub const SOFTPLUS_INV_FLOOR: f64 = -20.0;

/// Preimage of `softplus`, clamped below at [`SOFTPLUS_INV_FLOOR`].
pub fn softplus_inv(y: f64) -> f64 {
    if y <= 0.0 {
        return SOFTPLUS_INV_FLOOR;
    }
    let x = if y > 30.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    };
    x.max(SOFTPLUS_INV_FLOOR)
}

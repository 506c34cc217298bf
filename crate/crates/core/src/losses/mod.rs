//! Training losses. Each term takes field samples and returns its value
//! together with the adjoint the networks need for their reverse passes.
//! [`evaluate`] combines the terms under a schedule mask and applies the
//! stop-gradients: alignment only reaches the frame network and
//! regularization only reaches the geometry network.

mod manifold;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nets::{sigmoid, softplus, FieldAdjoint, FieldSamples, Order};
use crate::sh::{project_normal_with_tangents, OctaCoeffs, Vec9};

pub use manifold::{
    local_minima, manifold_slope, manifold_table, manifold_value, ManifoldRow, Similarity,
    MINIMA_RADIUS,
};

/// Gradients shorter than this are treated as undefined directions.
pub const DEGENERATE_GRAD: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("every sample has a degenerate gradient or frame")]
    AllDegenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Term {
    Positional,
    Eikonal,
    Off,
    Nsh,
    Align,
    Regularize,
    Lip,
}

impl Term {
    pub const ALL: [Term; 7] = [
        Term::Positional,
        Term::Eikonal,
        Term::Off,
        Term::Nsh,
        Term::Align,
        Term::Regularize,
        Term::Lip,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Term::Positional => "positional",
            Term::Eikonal => "eikonal",
            Term::Off => "off",
            Term::Nsh => "nsh",
            Term::Align => "align",
            Term::Regularize => "regularize",
            Term::Lip => "lip",
        }
    }
}

/// Balancing weights and the off-surface / alignment sharpness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub align: f64,
    pub regularize: f64,
    pub lip: f64,
    pub nsh: f64,
    pub eikonal: f64,
    pub positional: f64,
    pub off: f64,
    /// Sharpness of the off-surface term `exp(−α|f|)`.
    pub alpha: f64,
    /// Sharpness of the alignment weight `exp(−β|f|)`.
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            align: 100.0,
            regularize: 10.0,
            lip: 1e-6,
            nsh: 3.0,
            eikonal: 50.0,
            positional: 7000.0,
            off: 100.0,
            alpha: 100.0,
            beta: 100.0,
        }
    }
}

impl LossWeights {
    pub fn weight(&self, t: Term) -> f64 {
        match t {
            Term::Positional => self.positional,
            Term::Eikonal => self.eikonal,
            Term::Off => self.off,
            Term::Nsh => self.nsh,
            Term::Align => self.align,
            Term::Regularize => self.regularize,
            Term::Lip => self.lip,
        }
    }
}

/// Which terms take part in the current iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TermMask(pub [bool; 7]);

impl TermMask {
    pub fn all() -> Self {
        TermMask([true; 7])
    }

    pub fn only(terms: &[Term]) -> Self {
        let mut m = [false; 7];
        terms.iter().for_each(|t| m[t.index()] = true);
        TermMask(m)
    }

    pub fn is_active(&self, t: Term) -> bool {
        self.0[t.index()]
    }
}

/// Per-term values, the weights applied, and the weighted total.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossReport {
    pub iteration: usize,
    /// Unweighted term values; inactive terms are 0.
    pub terms: [f64; 7],
    /// Weights in effect; inactive terms carry weight 0.
    pub weights: [f64; 7],
    pub active: [bool; 7],
    pub total: f64,
    /// Samples dropped for degenerate gradients or frames.
    pub skipped: usize,
}

impl LossReport {
    pub fn term(&self, t: Term) -> f64 {
        self.terms[t.index()]
    }

    /// `Σ λᵢ·termᵢ` recomputed from the stored fields.
    pub fn recompute_total(&self) -> f64 {
        self.terms
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| t * w)
            .sum()
    }

    pub fn csv_header() -> String {
        let mut h = String::from("iteration");
        for t in Term::ALL {
            h.push(',');
            h.push_str(t.name());
        }
        h.push_str(",total,skipped");
        h
    }

    pub fn csv_row(&self) -> String {
        let mut row = self.iteration.to_string();
        for v in self.terms {
            row.push_str(&format!(",{v:e}"));
        }
        row.push_str(&format!(",{:e},{}", self.total, self.skipped));
        row
    }
}

fn mean_scale(n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        1.0 / n as f64
    }
}

/// Mean `|f(p)|` over on-surface samples.
pub fn positional_loss(values: &[f64]) -> (f64, Vec<f64>) {
    let k = mean_scale(values.len());
    let loss = values.iter().map(|v| v.abs()).sum::<f64>() * k;
    (loss, values.iter().map(|v| v.signum() * k).collect())
}

/// Mean `exp(−α|f|)` over off-surface samples.
pub fn off_surface_loss(values: &[f64], alpha: f64) -> (f64, Vec<f64>) {
    let k = mean_scale(values.len());
    let e: Vec<f64> = values.iter().map(|v| (-alpha * v.abs()).exp()).collect();
    let adj = values
        .iter()
        .zip(&e)
        .map(|(v, e)| -alpha * v.signum() * e * k)
        .collect();
    (e.iter().sum::<f64>() * k, adj)
}

/// Mean `|‖∇f‖ − 1|` over samples with a usable gradient; also returns the
/// number of skipped samples.
pub fn eikonal_loss(grads: &[Vector3<f64>]) -> (f64, Vec<Vector3<f64>>, usize) {
    let valid = grads.iter().filter(|g| g.norm() >= DEGENERATE_GRAD).count();
    let k = mean_scale(valid);
    let mut loss = 0.0;
    let adj = grads
        .iter()
        .map(|g| {
            let n = g.norm();
            if n < DEGENERATE_GRAD {
                return Vector3::zeros();
            }
            loss += (n - 1.0).abs();
            g * ((n - 1.0).signum() * k / n)
        })
        .collect();
    (loss * k, adj, grads.len() - valid)
}

/// Cofactor matrix, i.e. `∂ det H / ∂H`; defined for singular `H` too.
pub fn cofactor(h: &Matrix3<f64>) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| {
        let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
        let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
        h[(r0, c0)] * h[(r1, c1)] - h[(r0, c1)] * h[(r1, c0)]
    })
}

/// Mean `|det H(f)|` over near-surface samples.
pub fn nsh_loss(hessians: &[Matrix3<f64>]) -> (f64, Vec<Matrix3<f64>>) {
    let k = mean_scale(hessians.len());
    let mut loss = 0.0;
    let adj = hessians
        .iter()
        .map(|h| {
            let det = h.determinant();
            loss += det.abs();
            cofactor(h) * (det.signum() * k)
        })
        .collect();
    (loss * k, adj)
}

/// `∏ softplus(cᵢ)` and its gradient with respect to the raw `cᵢ`.
pub fn lip_loss(c: &[f64]) -> (f64, Vec<f64>) {
    let sp: Vec<f64> = c.iter().map(|&x| softplus(x)).collect();
    let prod: f64 = sp.iter().product();
    let adj = c
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let others: f64 = sp
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, s)| s)
                .product();
            others * sigmoid(x)
        })
        .collect();
    (prod, adj)
}

/// Mean of `exp(−β|f|)·(1 − ⟨u/‖u‖, Π(u, n)⟩)` with `n = ∇f/‖∇f‖`. The
/// field samples are constants here; the adjoint is with respect to `u` only.
pub fn align_loss(
    u: &[Vec9],
    values: &[f64],
    grads: &[Vector3<f64>],
    beta: f64,
) -> Result<(f64, Vec<Vec9>, usize), LossError> {
    let ok =
        |u: &Vec9, g: &Vector3<f64>| u.norm() >= DEGENERATE_GRAD && g.norm() >= DEGENERATE_GRAD;
    let valid = u.iter().zip(grads).filter(|(u, g)| ok(u, g)).count();
    if valid == 0 && !u.is_empty() {
        return Err(LossError::AllDegenerate);
    }
    let k = mean_scale(valid);
    let mut loss = 0.0;
    let adj = u
        .iter()
        .zip(values)
        .zip(grads)
        .map(|((u, f), g)| {
            if !ok(u, g) {
                return Vec9::zeros();
            }
            let w = (-beta * f.abs()).exp();
            let un = u.norm();
            let uhat = u / un;
            let p = project_normal_with_tangents(&OctaCoeffs(*u), &(g / g.norm()))
                .value
                .0;
            let c = uhat.dot(&p);
            loss += w * (1.0 - c);
            // Π maximizes ⟨û, ·⟩ over aligned frames, so only û varies:
            // ∂⟨û, Π⟩/∂u = (Π − ⟨û, Π⟩û)/‖u‖.
            -(p - uhat * c) * (w * k / un)
        })
        .collect();
    Ok((loss * k, adj, u.len() - valid))
}

/// Mean of `‖u/‖u‖ − Π(u, n)‖₁`. The frames are constants here; the adjoint
/// is with respect to the field gradients only.
pub fn regularize_loss(
    u: &[Vec9],
    grads: &[Vector3<f64>],
) -> Result<(f64, Vec<Vector3<f64>>, usize), LossError> {
    let ok =
        |u: &Vec9, g: &Vector3<f64>| u.norm() >= DEGENERATE_GRAD && g.norm() >= DEGENERATE_GRAD;
    let valid = u.iter().zip(grads).filter(|(u, g)| ok(u, g)).count();
    if valid == 0 && !u.is_empty() {
        return Err(LossError::AllDegenerate);
    }
    let k = mean_scale(valid);
    let mut loss = 0.0;
    let adj = u
        .iter()
        .zip(grads)
        .map(|(u, g)| {
            if !ok(u, g) {
                return Vector3::zeros();
            }
            let gn = g.norm();
            let n = g / gn;
            let uhat = u / u.norm();
            let proj = project_normal_with_tangents(&OctaCoeffs(*u), &n);
            let diff = uhat - proj.value.0;
            loss += diff.abs().sum();
            let pbar = -diff.map(f64::signum) * k;
            // n = g/‖g‖ and the cotangent is already orthogonal to n
            proj.normal_cotangent(&n, &pbar) / gn
        })
        .collect();
    Ok((loss * k, adj, u.len() - valid))
}

/// Everything the losses read in one iteration.
#[derive(Debug, Clone, Default)]
pub struct LossInputs {
    /// Geometry network on the input batch (value and gradient).
    pub surface: FieldSamples,
    /// Frame network on the input batch.
    pub frames: Vec<Vec9>,
    /// Geometry network on off-surface samples (value and gradient).
    pub off: FieldSamples,
    /// Geometry network on near-surface samples (Hessian needed).
    pub close: FieldSamples,
    /// Raw Lipschitz parameters.
    pub lip_c: Vec<f64>,
}

/// Adjoints of the weighted total with respect to every input.
#[derive(Debug, Clone)]
pub struct LossAdjoints {
    pub surface: FieldAdjoint,
    pub frames: Vec<Vec9>,
    pub off: FieldAdjoint,
    pub close: FieldAdjoint,
    pub lip_c: Vec<f64>,
}

/// Weighted total of the active terms and its adjoints.
pub fn evaluate(
    inputs: &LossInputs,
    weights: &LossWeights,
    mask: TermMask,
) -> Result<(LossReport, LossAdjoints), LossError> {
    let ns = inputs.surface.values.len();
    let no = inputs.off.values.len();
    let nc = inputs.close.values.len();
    let mut report = LossReport::default();
    let mut adj = LossAdjoints {
        surface: FieldAdjoint::zeros(ns, Order::Gradient),
        frames: vec![Vec9::zeros(); inputs.frames.len()],
        off: FieldAdjoint::zeros(no, Order::Gradient),
        close: FieldAdjoint::zeros(nc, Order::Hessian),
        lip_c: vec![0.0; inputs.lip_c.len()],
    };
    let set = |report: &mut LossReport, t: Term, v: f64| -> f64 {
        let w = weights.weight(t);
        report.terms[t.index()] = v;
        report.weights[t.index()] = w;
        report.active[t.index()] = true;
        w
    };

    if mask.is_active(Term::Positional) {
        let (v, a) = positional_loss(&inputs.surface.values);
        let w = set(&mut report, Term::Positional, v);
        adj.surface
            .values
            .iter_mut()
            .zip(a)
            .for_each(|(o, a)| *o += w * a);
    }
    if mask.is_active(Term::Eikonal) {
        let all: Vec<Vector3<f64>> = inputs
            .surface
            .grads
            .iter()
            .chain(&inputs.off.grads)
            .copied()
            .collect();
        let (v, a, skipped) = eikonal_loss(&all);
        let w = set(&mut report, Term::Eikonal, v);
        report.skipped += skipped;
        let (sa, oa) = a.split_at(ns);
        adj.surface
            .grads
            .iter_mut()
            .zip(sa)
            .for_each(|(o, a)| *o += a * w);
        adj.off
            .grads
            .iter_mut()
            .zip(oa)
            .for_each(|(o, a)| *o += a * w);
    }
    if mask.is_active(Term::Off) {
        let (v, a) = off_surface_loss(&inputs.off.values, weights.alpha);
        let w = set(&mut report, Term::Off, v);
        adj.off
            .values
            .iter_mut()
            .zip(a)
            .for_each(|(o, a)| *o += w * a);
    }
    if mask.is_active(Term::Nsh) {
        let (v, a) = nsh_loss(&inputs.close.hessians);
        let w = set(&mut report, Term::Nsh, v);
        adj.close
            .hessians
            .iter_mut()
            .zip(a)
            .for_each(|(o, a)| *o += a * w);
    }
    if mask.is_active(Term::Align) {
        let (v, a, skipped) = align_loss(
            &inputs.frames,
            &inputs.surface.values,
            &inputs.surface.grads,
            weights.beta,
        )?;
        let w = set(&mut report, Term::Align, v);
        report.skipped += skipped;
        adj.frames.iter_mut().zip(a).for_each(|(o, a)| *o += a * w);
    }
    if mask.is_active(Term::Regularize) {
        let (v, a, skipped) = regularize_loss(&inputs.frames, &inputs.surface.grads)?;
        let w = set(&mut report, Term::Regularize, v);
        report.skipped += skipped;
        adj.surface
            .grads
            .iter_mut()
            .zip(a)
            .for_each(|(o, a)| *o += a * w);
    }
    if mask.is_active(Term::Lip) {
        let (v, a) = lip_loss(&inputs.lip_c);
        let w = set(&mut report, Term::Lip, v);
        adj.lip_c.iter_mut().zip(a).for_each(|(o, a)| *o += a * w);
    }
    report.total = report.recompute_total();
    Ok((report, adj))
}

#[cfg(test)]
mod tests;

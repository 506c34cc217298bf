/// Counters for updates the optimizer refused.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AdamStats {
    pub steps: u64,
    /// Tensor updates skipped because their gradient held a non-finite entry.
    pub skipped_tensors: u64,
}

/// Adam with bias correction over a fixed list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    pub stats: AdamStats,
}

impl Adam {
    /// Zeroed moments shaped like `sizes`.
    pub fn new(lr: f64, sizes: &[usize]) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            stats: AdamStats::default(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.stats.steps
    }

    /// One update of every tensor. Tensors whose gradient is not finite keep
    /// both their values and their moments.
    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: &[&[f64]]) {
        assert_eq!(params.len(), self.m.len(), "tensor count mismatch");
        assert_eq!(grads.len(), self.m.len(), "tensor count mismatch");
        self.stats.steps += 1;
        let t = self.stats.steps as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (k, p) in params.into_iter().enumerate() {
            let g = grads[k];
            assert_eq!(p.len(), g.len(), "tensor {k} shape mismatch");
            assert_eq!(p.len(), self.m[k].len(), "tensor {k} shape mismatch");
            if !g.iter().all(|x| x.is_finite()) {
                self.stats.skipped_tensors += 1;
                continue;
            }
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![1.0, -2.0];
        let mut opt = Adam::new(0.1, &[2]);
        for _ in 0..3 {
            opt.step(vec![&mut p], &[&[0.0, 0.0]]);
        }
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_matches_hand_formula() {
        let (lr, g) = (5e-5, [0.3, -4.0, 1e-9]);
        let mut p = vec![0.0; 3];
        let mut opt = Adam::new(lr, &[3]);
        opt.step(vec![&mut p], &[&g]);
        for (pi, gi) in p.iter().zip(g) {
            // m̂ = g, v̂ = g² after bias correction.
            let want = -lr * gi / (gi.abs() + 1e-8);
            assert!(
                (pi - want).abs() < 1e-15 * lr.max(want.abs()),
                "{pi} {want}"
            );
        }
        // Second step with the same gradient: m̂ = g, v̂ = g².
        let before = p.clone();
        opt.step(vec![&mut p], &[&g]);
        for ((a, b), gi) in p.iter().zip(&before).zip(g) {
            let want = -lr * gi / (gi.abs() + 1e-8);
            assert!((a - b - want).abs() < 1e-12 * lr);
        }
    }

    #[test]
    fn non_finite_tensor_is_skipped() {
        let (mut a, mut b) = (vec![1.0], vec![1.0]);
        let mut opt = Adam::new(0.1, &[1, 1]);
        opt.step(vec![&mut a, &mut b], &[&[f64::NAN], &[1.0]]);
        assert_eq!(a, vec![1.0]);
        assert!(b[0] < 1.0);
        assert_eq!(
            opt.stats,
            AdamStats {
                steps: 1,
                skipped_tensors: 1
            }
        );
    }

    #[test]
    fn trajectories_are_reproducible() {
        let run = || {
            let mut p = vec![0.5; 4];
            let mut opt = Adam::new(1e-2, &[4]);
            for i in 0..50 {
                let g: Vec<f64> = p.iter().map(|x| 2.0 * x + (i as f64).sin()).collect();
                opt.step(vec![&mut p], &[&g]);
            }
            p
        };
        assert_eq!(run(), run());
    }
}

use nalgebra::Vector3;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    knn_sigma, sample_close, sample_off, Adam, AdamStats, Schedule, SineInit, TrainConfig,
    TrainError,
};
use crate::geometry::PointCloud;
use crate::losses::{evaluate, LossError, LossInputs, LossReport, LossWeights, Term, TermMask};
use crate::nets::{Checkpoint, LipNet, Order, ParamGradients, SineNet};

/// Points for one iteration, in normalized coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Batch {
    pub surface: Vec<Vector3<f64>>,
    pub close: Vec<Vector3<f64>>,
    pub off: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone)]
pub struct GradientStep {
    pub report: LossReport,
    pub sine: ParamGradients,
    pub lip: ParamGradients,
}

/// Loss report and parameter gradients of both networks on one batch.
pub fn compute_gradients(
    sine: &SineNet,
    lip: &LipNet,
    batch: &Batch,
    weights: &LossWeights,
    mask: TermMask,
) -> Result<GradientStep, LossError> {
    let surface = sine.forward(&batch.surface, Order::Gradient);
    let off = sine.forward(&batch.off, Order::Gradient);
    let close = if mask.is_active(Term::Nsh) {
        sine.forward(&batch.close, Order::Hessian)
    } else {
        sine.forward(&[], Order::Hessian)
    };
    let needs_frames = mask.is_active(Term::Align) || mask.is_active(Term::Regularize);
    let frame_tape = needs_frames.then(|| lip.forward(&batch.surface));
    let frames = frame_tape
        .as_ref()
        .map(|t| (0..batch.surface.len()).map(|p| t.output(p)).collect())
        .unwrap_or_default();
    let inputs = LossInputs {
        surface: surface.samples(),
        frames,
        off: off.samples(),
        close: close.samples(),
        lip_c: lip.c.clone(),
    };
    let (report, adj) = evaluate(&inputs, weights, mask)?;

    let mut gs = sine.zero_grads();
    sine.backward(&surface, &adj.surface, &mut gs);
    sine.backward(&off, &adj.off, &mut gs);
    if !batch.close.is_empty() && mask.is_active(Term::Nsh) {
        sine.backward(&close, &adj.close, &mut gs);
    }
    let mut gl = lip.zero_grads();
    if let Some(tape) = &frame_tape {
        lip.backward(tape, &adj.frames, &mut gl);
    }
    gl.c.iter_mut().zip(&adj.lip_c).for_each(|(g, a)| *g += a);
    Ok(GradientStep {
        report,
        sine: gs,
        lip: gl,
    })
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub sine: SineNet,
    pub lip: LipNet,
    pub log: Vec<LossReport>,
    pub optimizer: AdamStats,
    pub checkpoint: Checkpoint,
}

/// The fitting loop as an explicit state machine so callers can observe or
/// checkpoint between iterations.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub sine: SineNet,
    pub lip: LipNet,
    pub log: Vec<LossReport>,
    config: TrainConfig,
    schedule: Schedule,
    adam: Adam,
    points: Vec<Vector3<f64>>,
    sigmas: Vec<f64>,
    center: [f64; 3],
    scale: f64,
    rng: ChaCha8Rng,
    iteration: usize,
}

impl Trainer {
    /// Initializes both networks and the per-point close-sample radii.
    /// `cloud` must already be normalized.
    pub fn new(cloud: &PointCloud, config: &TrainConfig) -> Result<Trainer, TrainError> {
        config.validate()?;
        let sigmas = knn_sigma(&cloud.points, config.knn_k)?;
        let mut seeds = ChaCha8Rng::seed_from_u64(config.seed);
        let sc = &config.sine;
        let sine = match sc.init {
            SineInit::Geometric => {
                SineNet::geometric_init(sc.hidden, sc.width, seeds.gen(), sc.omega, sc.input_scale)
            }
            SineInit::Siren => {
                SineNet::init(sc.hidden, sc.width, seeds.gen(), sc.omega, sc.input_scale)
            }
        };
        let lip = LipNet::init(
            config.lip.hidden,
            config.lip.width,
            seeds.gen(),
            config.lip.input_scale,
        );
        let rng = ChaCha8Rng::seed_from_u64(seeds.gen());
        let mut sine_w = sine.clone();
        let mut lip_w = lip.clone();
        let sizes: Vec<usize> = sine_w
            .tensors_mut()
            .into_iter()
            .chain(lip_w.tensors_mut())
            .map(|t| t.len())
            .collect();
        Ok(Trainer {
            sine,
            lip,
            log: Vec::with_capacity(config.iterations),
            schedule: config.schedule(),
            adam: Adam::new(config.lr, &sizes),
            config: config.clone(),
            points: cloud.points.clone(),
            sigmas,
            center: cloud.center.into(),
            scale: cloud.scale,
            rng,
            iteration: 0,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.config.iterations
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn optimizer_stats(&self) -> AdamStats {
        self.adam.stats
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// Draws the next batch: a surface subset (the whole cloud when it fits)
    /// and fresh close and off-surface samples.
    pub fn sample_batch(&mut self) -> Batch {
        let c = &self.config;
        let surface = if self.points.len() > c.batch_surface {
            index::sample(&mut self.rng, self.points.len(), c.batch_surface)
                .into_iter()
                .map(|i| self.points[i])
                .collect()
        } else {
            self.points.clone()
        };
        let close = sample_close(&self.points, &self.sigmas, c.batch_close, &mut self.rng);
        let off = sample_off(c.batch_off, &mut self.rng);
        Batch {
            surface,
            close,
            off,
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            sine: self.sine.clone(),
            lip: self.lip.clone(),
            center: self.center,
            scale: self.scale,
            iteration: self.iteration as u64,
        }
    }

    /// One resample-evaluate-update iteration.
    pub fn step(&mut self) -> Result<&LossReport, TrainError> {
        let it = self.iteration;
        let batch = self.sample_batch();
        let weights = self.schedule.weights(it);
        let mask = self.schedule.mask(it);
        let mut step = compute_gradients(&self.sine, &self.lip, &batch, &weights, mask)?;
        step.report.iteration = it;
        if !step.report.total.is_finite() {
            return Err(TrainError::Diverged {
                iteration: it,
                total: step.report.total,
                checkpoint: Box::new(self.checkpoint()),
            });
        }
        let grads: Vec<&[f64]> = step
            .sine
            .tensors()
            .into_iter()
            .chain(step.lip.tensors())
            .collect();
        let params: Vec<&mut [f64]> = self
            .sine
            .tensors_mut()
            .into_iter()
            .chain(self.lip.tensors_mut())
            .collect();
        self.adam.step(params, &grads);
        self.iteration += 1;
        self.log.push(step.report);
        Ok(self.log.last().expect("just pushed"))
    }

    /// Runs the remaining iterations, calling `observe` after each one.
    pub fn run(&mut self, mut observe: impl FnMut(&Trainer)) -> Result<(), TrainError> {
        while !self.is_done() {
            self.step()?;
            observe(self);
        }
        Ok(())
    }

    pub fn finish(self) -> FitResult {
        let checkpoint = self.checkpoint();
        FitResult {
            sine: self.sine,
            lip: self.lip,
            log: self.log,
            optimizer: self.adam.stats,
            checkpoint,
        }
    }
}

/// Fits both networks to a normalized cloud under the configured schedule.
pub fn fit(cloud: &PointCloud, config: &TrainConfig) -> Result<FitResult, TrainError> {
    let mut trainer = Trainer::new(cloud, config)?;
    trainer.run(|_| {})?;
    Ok(trainer.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::fibonacci_sphere;
    use crate::training::{Preset, TrainConfig};

    fn tiny_config(iterations: usize) -> TrainConfig {
        let mut c = TrainConfig::preset(Preset::Desk);
        c.iterations = iterations;
        c.batch_surface = 64;
        c.batch_close = 64;
        c.batch_off = 64;
        c.knn_k = 11;
        c.sine.width = 16;
        c.lip.width = 8;
        c
    }

    fn sphere_cloud(n: usize) -> PointCloud {
        let pts: Vec<Vector3<f64>> = fibonacci_sphere(n).into_iter().map(|d| d * 0.6).collect();
        PointCloud::identity(pts)
    }

    fn all_terms_batch(seed: u64) -> (SineNet, LipNet, Batch) {
        let cloud = sphere_cloud(200);
        let mut t = Trainer::new(
            &cloud,
            &TrainConfig {
                seed,
                ..tiny_config(10)
            },
        )
        .unwrap();
        let batch = t.sample_batch();
        (t.sine.clone(), t.lip.clone(), batch)
    }

    #[test]
    fn stop_gradients_are_exact_under_weight_perturbation() {
        let (sine, lip, batch) = all_terms_batch(3);
        let w = LossWeights::default();
        let base = compute_gradients(&sine, &lip, &batch, &w, TermMask::all()).unwrap();
        for scale in [0.0, 0.5, 7.0] {
            let reg = LossWeights {
                regularize: w.regularize * scale,
                ..w
            };
            let s = compute_gradients(&sine, &lip, &batch, &reg, TermMask::all()).unwrap();
            assert_eq!(s.lip.tensors(), base.lip.tensors());
            let al = LossWeights {
                align: w.align * scale,
                ..w
            };
            let s = compute_gradients(&sine, &lip, &batch, &al, TermMask::all()).unwrap();
            assert_eq!(s.sine.tensors(), base.sine.tensors());
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (mut sine, mut lip, batch) = all_terms_batch(8);
        // Initial bounds sit on the kink of the row normalization.
        for c in lip.c.iter_mut() {
            *c -= 0.5;
        }
        let w = LossWeights::default();
        // Each network is checked against the terms that train it; the other
        // terms see it only through a stop-gradient.
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
                .unwrap()
                .report
                .total
        };
        let g = compute_gradients(&sine, &lip, &batch, &w, TermMask::all()).unwrap();
        let h = 1e-6;
        for (t, k) in [(0usize, 3usize), (1, 5), (2, 7), (3, 2), (4, 0), (5, 0)] {
            let analytic = g.sine.tensors()[t][k];
            let orig = sine.tensors_mut()[t][k];
            sine.tensors_mut()[t][k] = orig + h;
            let up = total(&sine, &lip, geometry);
            sine.tensors_mut()[t][k] = orig - h;
            let down = total(&sine, &lip, geometry);
            sine.tensors_mut()[t][k] = orig;
            let fd = (up - down) / (2.0 * h);
            assert!(
                (fd - analytic).abs() <= 1e-2 * fd.abs().max(1e-3),
                "sine {t},{k}: {fd} vs {analytic}"
            );
        }
        let n = g.lip.tensors().len();
        for (t, k) in [(0usize, 4usize), (2, 1), (n - 2, 3), (n - 1, 1)] {
            let analytic = g.lip.tensors()[t][k];
            let orig = lip.tensors_mut()[t][k];
            lip.tensors_mut()[t][k] = orig + h;
            let up = total(&sine, &lip, frame);
            lip.tensors_mut()[t][k] = orig - h;
            let down = total(&sine, &lip, frame);
            lip.tensors_mut()[t][k] = orig;
            let fd = (up - down) / (2.0 * h);
            assert!(
                (fd - analytic).abs() <= 1e-2 * fd.abs().max(1e-6),
                "lip {t},{k}: {fd} vs {analytic}"
            );
        }
    }

    #[test]
    fn log_gating_matches_milestones() {
        let cloud = sphere_cloud(200);
        let cfg = tiny_config(20);
        let r = fit(&cloud, &cfg).unwrap();
        let s = cfg.schedule();
        assert_eq!(r.log.len(), 20);
        for rep in &r.log {
            let it = rep.iteration;
            if it < s.align_at {
                assert_eq!(rep.term(Term::Align), 0.0);
                assert_eq!(rep.term(Term::Lip), 0.0);
            } else {
                assert!(rep.term(Term::Lip) > 0.0);
            }
            if it < s.regularize_at {
                assert_eq!(rep.term(Term::Regularize), 0.0);
            }
            let nsh_w = rep.weights[Term::Nsh.index()];
            assert_eq!(
                nsh_w,
                if it >= s.anneal_at {
                    s.nsh_annealed
                } else {
                    s.base.nsh
                }
            );
            assert_eq!(rep.total, rep.recompute_total());
        }
    }

    #[test]
    fn fit_is_bit_reproducible() {
        let cloud = sphere_cloud(150);
        let a = fit(&cloud, &tiny_config(6)).unwrap();
        let b = fit(&cloud, &tiny_config(6)).unwrap();
        assert_eq!(a.checkpoint.to_bytes(), b.checkpoint.to_bytes());
        let c = fit(
            &cloud,
            &TrainConfig {
                seed: 1,
                ..tiny_config(6)
            },
        )
        .unwrap();
        assert_ne!(a.checkpoint.to_bytes(), c.checkpoint.to_bytes());
    }

    #[test]
    fn divergence_returns_checkpoint() {
        let cloud = sphere_cloud(100);
        let mut t = Trainer::new(&cloud, &tiny_config(5)).unwrap();
        t.sine.layers[0].b[0] = f64::NAN;
        match t.step() {
            Err(TrainError::Diverged {
                iteration,
                checkpoint,
                ..
            }) => {
                assert_eq!(iteration, 0);
                assert!(checkpoint.sine.layers[0].b[0].is_nan());
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn small_cloud_is_rejected() {
        let cloud = sphere_cloud(5);
        assert!(matches!(
            Trainer::new(&cloud, &tiny_config(5)),
            Err(TrainError::Geometry(_))
        ));
    }

    #[test]
    fn positional_loss_decreases() {
        let cloud = sphere_cloud(300);
        let mut cfg = tiny_config(150);
        cfg.lr = 1e-3;
        let r = fit(&cloud, &cfg).unwrap();
        let head: f64 = r.log[..10].iter().map(|l| l.total).sum();
        let tail: f64 = r.log[140..].iter().map(|l| l.total).sum();
        assert!(tail < head, "{head} {tail}");
    }
}

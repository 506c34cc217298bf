use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::losses::{LossWeights, Term, TermMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Full-size networks, batches and iteration count.
    Paper,
    /// Small networks and short runs for a single CPU core.
    Desk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SineInit {
    /// Starts from a convex bowl so the fitted field is signed from the outset.
    Geometric,
    /// Standard sine-network initialization.
    Siren,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineConfig {
    pub init: SineInit,
    pub hidden: usize,
    pub width: usize,
    pub omega: f64,
    pub input_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipConfig {
    pub hidden: usize,
    pub width: usize,
    pub input_scale: f64,
}

/// Explicit weight settings; each one replaces the noise-regime default.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lambdas {
    pub positional: Option<f64>,
    pub nsh: Option<f64>,
    pub nsh_annealed: Option<f64>,
    pub eikonal: Option<f64>,
    pub off: Option<f64>,
    pub align: Option<f64>,
    pub regularize: Option<f64>,
    pub lip: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

/// Milestones as fractions of the iteration count; unset ones follow the
/// noise regime.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Milestones {
    pub anneal: Option<f64>,
    pub align: Option<f64>,
    pub regularize: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_surface: usize,
    pub batch_close: usize,
    pub batch_off: usize,
    pub lr: f64,
    pub seed: u64,
    pub noise: Noise,
    pub mc_resolution: usize,
    /// Neighbour rank (self included) whose distance sets the close-sample radius.
    pub knn_k: usize,
    /// Checkpoint cadence in iterations; 0 saves only the final state.
    pub checkpoint_every: usize,
    pub sine: SineConfig,
    pub lip: LipConfig,
    #[serde(default)]
    pub lambdas: Lambdas,
    #[serde(default)]
    pub milestones: Milestones,
}

impl TrainConfig {
    pub fn preset(preset: Preset) -> TrainConfig {
        match preset {
            Preset::Paper => TrainConfig {
                iterations: 10_000,
                batch_surface: 15_000,
                batch_close: 15_000,
                batch_off: 15_000,
                lr: 5e-5,
                seed: 0,
                noise: Noise::Low,
                mc_resolution: 512,
                knn_k: 51,
                checkpoint_every: 1000,
                sine: SineConfig {
                    init: SineInit::Geometric,
                    hidden: 4,
                    width: 256,
                    omega: 30.0,
                    input_scale: 1.0,
                },
                lip: LipConfig {
                    hidden: 4,
                    width: 256,
                    input_scale: 100.0,
                },
                lambdas: Lambdas::default(),
                milestones: Milestones::default(),
            },
            Preset::Desk => TrainConfig {
                iterations: 3000,
                batch_surface: 512,
                batch_close: 512,
                batch_off: 512,
                lr: 1e-4,
                seed: 0,
                noise: Noise::Low,
                mc_resolution: 128,
                knn_k: 51,
                checkpoint_every: 0,
                sine: SineConfig {
                    init: SineInit::Geometric,
                    hidden: 2,
                    width: 64,
                    omega: 30.0,
                    input_scale: 1.0,
                },
                lip: LipConfig {
                    hidden: 2,
                    width: 32,
                    input_scale: 100.0,
                },
                lambdas: Lambdas::default(),
                milestones: Milestones::default(),
            },
        }
    }

    /// Parses TOML. An optional top-level `preset = "paper" | "desk"`
    /// (default `desk`) supplies every key the document leaves out; unknown
    /// keys are rejected.
    pub fn from_toml(text: &str) -> Result<TrainConfig, TrainError> {
        let mut doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| TrainError::Config(e.to_string()))?;
        let preset = match doc.remove("preset") {
            None => Preset::Desk,
            Some(v) => v
                .try_into()
                .map_err(|e: toml::de::Error| TrainError::Config(format!("preset: {e}")))?,
        };
        let mut base = toml::Table::try_from(TrainConfig::preset(preset))
            .map_err(|e| TrainError::Config(e.to_string()))?;
        merge(&mut base, doc);
        let cfg: TrainConfig = toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| TrainError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.iterations == 0 {
            return bad("iterations must be positive");
        }
        if self.batch_surface == 0 || self.batch_close == 0 || self.batch_off == 0 {
            return bad("batch sizes must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.mc_resolution < 8 {
            return bad("mc_resolution must be at least 8");
        }
        if self.knn_k == 0 {
            return bad("knn_k must be positive");
        }
        if self.sine.hidden == 0
            || self.sine.width == 0
            || self.lip.hidden == 0
            || self.lip.width == 0
        {
            return bad("networks need at least one hidden layer of positive width");
        }
        for f in [
            self.milestones.anneal,
            self.milestones.align,
            self.milestones.regularize,
        ]
        .into_iter()
        .flatten()
        {
            if !(0.0..=1.0).contains(&f) {
                return bad("milestones are fractions in [0, 1]");
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> Schedule {
        Schedule::new(self.noise, self.iterations, &self.lambdas, &self.milestones)
    }
}

/// Recursively overlays `top` onto `base`.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Per-iteration weights and active terms. Backbone terms run throughout;
/// alignment and the Lipschitz term start at `align_at`, regularization at
/// `regularize_at`, and the singular-Hessian weight steps to its annealed
/// value at `anneal_at`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    pub base: LossWeights,
    pub nsh_annealed: f64,
    pub anneal_at: usize,
    pub align_at: usize,
    pub regularize_at: usize,
}

impl Schedule {
    pub fn new(noise: Noise, iterations: usize, l: &Lambdas, m: &Milestones) -> Schedule {
        let (positional, annealed, align, regularize) = match noise {
            Noise::Low => (7000.0, 3e-4, 0.4, 0.6),
            Noise::High => (3500.0, 3e-3, 0.2, 0.4),
        };
        let d = LossWeights::default();
        let base = LossWeights {
            positional: l.positional.unwrap_or(positional),
            nsh: l.nsh.unwrap_or(d.nsh),
            eikonal: l.eikonal.unwrap_or(d.eikonal),
            off: l.off.unwrap_or(d.off),
            align: l.align.unwrap_or(d.align),
            regularize: l.regularize.unwrap_or(d.regularize),
            lip: l.lip.unwrap_or(d.lip),
            alpha: l.alpha.unwrap_or(d.alpha),
            beta: l.beta.unwrap_or(d.beta),
        };
        let at = |f: f64| (f * iterations as f64).floor() as usize;
        Schedule {
            base,
            nsh_annealed: l.nsh_annealed.unwrap_or(annealed),
            anneal_at: at(m.anneal.unwrap_or(0.1)),
            align_at: at(m.align.unwrap_or(align)),
            regularize_at: at(m.regularize.unwrap_or(regularize)),
        }
    }

    pub fn weights(&self, iteration: usize) -> LossWeights {
        let mut w = self.base;
        if iteration >= self.anneal_at {
            w.nsh = self.nsh_annealed;
        }
        w
    }

    pub fn mask(&self, iteration: usize) -> TermMask {
        let mut terms = vec![Term::Positional, Term::Eikonal, Term::Off, Term::Nsh];
        if iteration >= self.align_at {
            terms.extend([Term::Align, Term::Lip]);
        }
        if iteration >= self.regularize_at {
            terms.push(Term::Regularize);
        }
        TermMask::only(&terms)
    }

    /// True once either network receives a frame-field loss.
    pub fn frames_active(&self, iteration: usize) -> bool {
        iteration >= self.align_at.min(self.regularize_at)
    }
}

//! Sampling, scheduling, the Adam optimizer and the joint fitting loop.

mod adam;
mod config;
mod fit;
mod sampling;

use thiserror::Error;

pub use adam::{Adam, AdamStats};
pub use config::{
    Lambdas, LipConfig, Milestones, Noise, Preset, Schedule, SineConfig, SineInit, TrainConfig,
};
pub use fit::{compute_gradients, fit, Batch, FitResult, GradientStep, Trainer};
pub use sampling::{knn_sigma, sample_close, sample_off, SIGMA_FLOOR};

use crate::geometry::GeometryError;
use crate::losses::LossError;
use crate::nets::Checkpoint;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Loss(#[from] LossError),
    /// The total loss became non-finite; the checkpoint holds the networks
    /// that produced it.
    #[error("training diverged at iteration {iteration}: total loss {total}")]
    Diverged {
        iteration: usize,
        total: f64,
        checkpoint: Box<Checkpoint>,
    },
}

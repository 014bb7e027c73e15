//! Coarse-to-fine voxel occupancy refinement with flow matching.
//!
//! A small velocity network `f(x_t, c, cond, t)` is trained to regress the
//! straight-path velocity `noise - x0`, where `x_t = (1-t) x0 + t noise`
//! interpolates between the fine target occupancy `x0` (encoded as +-1) and
//! Gaussian noise. The coarse grid enters as an extra conditioning channel
//! through an additive control branch; an optional fixed-length image
//! embedding `c` rides along the same way. Sampling integrates the learned
//! field from noise back to data with Euler steps and thresholds at zero.

mod checkpoint;
mod model;
mod sample;
mod train;

pub use checkpoint::{load_model, save_model};
pub use model::{condition_channel, occupancy_tensor, tensor_to_grid, ModelConfig, RefinerModel, VelocityField};
pub use sample::{sample, sample_from};
pub use train::{
    flow_loss, interpolate, loss_and_grad, loss_curve_csv, train, FlowSample, TrainConfig,
    TrainResult,
};

use simvox_core::voxel::VoxelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("shape mismatch: expected {expected} elements, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("time {0} outside [0, 1]")]
    BadTime(f64),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(
        "pair {index} inconsistent: {fraction:.3} of coarse cells missing from the downsampled fine grid (tolerance {tolerance})"
    )]
    InconsistentPair {
        index: usize,
        fraction: f64,
        tolerance: f64,
    },
    #[error("pair {index}: resolution {got} does not match configured {expected}")]
    PairResolution {
        index: usize,
        expected: u32,
        got: u32,
    },
    #[error("coarse resolution {coarse} must divide fine resolution {fine}")]
    NonDivisibleResolutions { fine: u32, coarse: u32 },
    #[error("step count must be at least 1")]
    BadStepCount,
    #[error("image condition length {got} does not match configured {expected}")]
    ImageCondLength { expected: usize, got: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Voxel(#[from] VoxelError),
}

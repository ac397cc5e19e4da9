//! A compact convolutional regressor built from scratch.
//!
//! Four conv/rectifier/average-pool stages feed one dense layer that emits the
//! standardized R-QP model parameters. Training minimizes the mean squared
//! error over parameters with Adam.

mod checkpoint;
pub mod gradcheck;
mod layers;
mod network;
mod scalers;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use layers::{AvgPool, Conv2d, Dense, Layer, Shape};
pub use network::{mse_loss, ConvStage, Network, NetworkConfig, Trace, CONV_STAGES, DEFAULT_CHANNELS};
pub use scalers::{normalize_stack, Standardizer};
pub use train::{evaluate_loss, fit_examples, Adam, Example, LossHistory, Regressor, TrainConfig};

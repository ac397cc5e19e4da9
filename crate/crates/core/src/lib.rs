//! One-pass R-QP bitrate prediction for intra-coded frames.
//!
//! The pipeline takes the reconstructed frame and coding decisions of a single
//! encode at `qp0`, renders them as feature planes, regresses the parameters of
//! a logarithmic R-QP model with a small CNN, and inverts that model to predict
//! the frame's bit cost at any other QP.

pub mod entropy;
pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod lsq;
pub mod model;
pub mod nn;

pub use error::{Error, Result};

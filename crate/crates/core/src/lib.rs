//! Label-noise auditing for node-classification graphs.
//!
//! The pipeline estimates how labels get confused from a base classifier's
//! softmax output, plants synthetic mislabels that follow that confusion,
//! and trains a small detector on neighborhood-agreement features. Scores can
//! be thresholded with a fixed cut, a prior-ratio cut, or conformal cuts with
//! false-positive / false-negative guarantees.

pub mod audit;
pub mod base;
pub mod conformal;
pub mod config;
pub mod detector;
pub mod error;
pub mod features;
pub mod graph;
pub mod harness;
pub mod matrix;
pub mod noise;
pub mod pipeline;
pub mod propagation;
pub mod review;
pub mod rng;
#[cfg(feature = "serve")]
pub mod service;
pub mod transition;

pub use error::{Error, ErrorKind, Result};

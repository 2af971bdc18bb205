//! Rank examples by learning difficulty with Variance of Gradients (VoG).
//!
//! A model is trained with SGD while parameter snapshots are written to a
//! checkpoint directory. For every example, the gradient of the pre-softmax
//! class score with respect to the input is taken at each checkpoint of a
//! training stage; the per-pixel standard deviation of those gradients,
//! averaged over pixels, is the raw VoG score, which is then z-scored within
//! each class.
//!
//! Module map:
//!
//! - [`nn`]: dense/conv ReLU networks with manual backprop
//! - [`training`]: SGD loop, checkpoint store, label shuffling
//! - [`engine`]: gradient matrices, VoG scores, class normalization, ranking
//! - [`data`]: blobs, glyphs, IDX files, Gaussian OoD noise, corruptions
//! - [`evaluation`]: decile errors, Welch t-test, correlations, OoD metrics
//! - [`cli`]: the `vog` command-line surface

pub mod cli;
pub mod data;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod io;
pub mod nn;
pub mod tensor;
pub mod training;

pub use error::{Result, VogError};
pub use tensor::Tensor;

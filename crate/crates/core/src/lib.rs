//! Handwritten digit recognition with convolutional networks and deep belief
//! networks, built from scratch.
//!
//! Modules, bottom up:
//!
//! - [`tensor`], [`rng`]: dense arrays and the project random generator.
//! - [`layers`]: convolution, max-pooling, dense, dropout, loss heads.
//! - [`filters`]: Gabor and Gaussian kernel banks for the first layer.
//! - [`network`]: CNN and dense stacks behind the [`Model`] trait.
//! - [`rbm`], [`dbn`]: restricted Boltzmann machines, exact small-model
//!   oracles, greedy pretraining and fine-tuning.
//! - [`training`]: network assembly, SGD loop, evaluation, reports.
//! - [`dataio`]: dataset loading, splits, PGM export.
//! - [`model_file`]: binary named-tensor model format.

pub mod config;
pub mod dataio;
pub mod dbn;
pub mod error;
pub mod exec;
pub mod filters;
pub mod layers;
pub mod model_file;
pub mod network;
pub mod rbm;
pub mod real;
pub mod rng;
pub mod synthetic;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use exec::Exec;
pub use network::{Cnn, CnnArch, FeedForward, Model};
pub use real::Real;
pub use rng::Rng;
pub use tensor::Tensor;

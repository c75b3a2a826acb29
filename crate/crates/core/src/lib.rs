//! Crater detection with a small convolutional network.
//!
//! Candidate windows cut from orbital imagery are scaled to 15x15 patches and
//! classified as crater / non-crater by a two-convolution network trained with
//! plain SGD. The crate also carries the k-fold cross-validated F1 harness
//! and false-color rendering of first-layer responses.

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod layers;
mod linalg;
pub mod model_io;
pub mod netpbm;
pub mod network;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod viz;

pub use error::{Error, Result};
pub use network::{NetConfig, Network, CRATER, NON_CRATER};
pub use tensor::Tensor;
pub use train::{predict, train, Prediction, Sample, TrainConfig, TrainTrace};

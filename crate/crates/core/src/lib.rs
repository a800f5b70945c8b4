//! Statevector simulation, training and explanation of data re-uploading
//! quantum neural networks for cloud-cover regression, together with the
//! classical baselines they are compared against.
//!
//! Qubit `n` is bit `n` of a basis-state index (little-endian). Feature `n`
//! is encoded on qubit `n`.

// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod explain;
pub mod gradients;
pub mod model;
pub mod qnn;
pub mod rng;
pub mod statevector;
pub mod training;

pub use error::{Error, Result};
pub use model::{Model, ModelSpec, Predictor, ScaledModel};

/// Library version, recorded in checkpoints and run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

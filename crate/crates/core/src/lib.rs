// SPDX-License-Identifier: Apache-2.0

//! Confidence-weighted transfer from a complex model to a simple target
//! family, and the (δ, γ) metrics that measure how well the target recovers
//! the complex model's advantage.

pub mod bounds;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod robustness;
pub mod serial;
pub mod split;
pub mod transfer;

pub use dataset::{ConfidenceMatrix, Dataset, Matrix};
pub use error::{Error, Result};
pub use loss::LossKind;
pub use models::{Family, ModelSpec, TrainedModel};

//! Domain-adaptive indoor UWB jammer localization toolkit.
//!
//! Pipeline stages: CIR preprocessing, a denoising ConvNeXt-style 1-D
//! autoencoder with gradient-reversal adversarial domain alignment,
//! three-phase training, classical UDA and tabular baselines, and a
//! metrics/diagnostics suite. Runs on the canonical dataset format or on the
//! built-in deterministic synthetic generator.

pub mod analysis;
pub mod baselines;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod models;
pub mod nn;
pub mod preprocess;
pub mod training;
pub mod uda;

pub use error::{JamlocError, Result};

//! TransICD: transformer encoder with code-wise label attention for
//! multi-label document classification, built on a small reverse-mode
//! autodiff engine.

pub mod embeddings;
pub mod error;
pub mod harness;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod preprocess;
pub mod synth;

pub use error::{Error, Result};

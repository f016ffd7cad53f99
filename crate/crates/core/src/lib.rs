//! Multitask neural image compression.
//!
//! A shared patch encoder is trained on several patch-classification tasks
//! at once; large images are then compressed into grids of patch embeddings,
//! and an image-level CNN is trained on those grids for regression,
//! classification, or censored survival. Evaluation statistics, synthetic
//! data generators with known ground truth, and the experiment pipeline used
//! by the `nic` command-line tool live here as well.

pub mod compression;
pub mod config;
pub mod error;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod rng;
pub mod special;
pub mod survival;
pub mod synthdata;
pub mod training;

pub use error::{Error, Result};

//! Differentiable operations, each recorded on a [`Tape`](crate::Tape).

pub mod activation;
pub mod basic;
pub mod conv;
pub mod linalg;
pub mod loss;
pub mod norm;

pub use activation::DropoutGranularity;
pub use conv::{ConvGeom, Padding};
pub use norm::{BatchNormConfig, RunningStats};

/// Whether stochastic and batch-statistics layers behave as in training.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

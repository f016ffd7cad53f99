//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! Operations are recorded on a [`Tape`] as they execute; [`Tape::backward`]
//! walks the record in reverse creation order and accumulates gradients into
//! the leaves. The operation set is deliberately small: convolutions
//! (dense, depthwise, depthwise-separable), batch normalization, leaky ReLU,
//! softmax, inverted dropout, affine maps, and the cross-entropy and squared
//! error losses. Anything else can be added through [`Tape::custom`].

pub mod error;
pub mod gradcheck;
pub mod ops;
pub mod params;
pub mod tape;
pub mod tensor;

pub use error::{Error, Result};
pub use gradcheck::{finite_difference_check, GradCheck, GradCheckReport};
pub use ops::{BatchNormConfig, DropoutGranularity, Mode, Padding, RunningStats};
pub use params::ParamStore;
pub use tape::{Tape, Var, VjpFn};
pub use tensor::Tensor;

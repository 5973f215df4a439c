//! Differentiable operations. Each op is a method on [`Tape`](crate::autograd::Tape);
//! the raw forward kernels are exposed alongside for reference testing.

pub mod basic;
pub mod conv;
pub mod dropout;
pub mod linear;
pub mod norm;
pub mod pool;
pub mod softmax;

pub use conv::{causal_conv1d_direct, conv2d_direct, conv2d_im2col, Conv2dGeometry};
pub use norm::{BatchNormOptions, BatchStats};

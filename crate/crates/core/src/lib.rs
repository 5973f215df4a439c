//! ResNet+TCN spatio-temporal video classification engine.
//!
//! A residual 2-D CNN encodes every frame of a clip; the per-frame feature
//! vectors become the time steps of a dilated causal temporal convolutional
//! network whose final step feeds a linear classifier. Everything here is
//! `no_std` + `alloc`: tensors, reverse-mode autograd, the layer blocks,
//! model assembly, class weighting, stratified batching, SGD and metrics.
//! File formats and the command-line driver live in the `engagenet` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod autograd;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod model;
pub mod nn;
pub mod ops;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod verify;

pub use autograd::{Backward, Gradients, NodeId, Tape, Var};
pub use error::{Error, Result};
pub use rng::{RngState, SeededRng};
pub use tensor::{DType, Scalar, Tensor};

//! File formats, the training driver and the `engagenet` command line on top
//! of [`engagenet_core`].

mod bytes;
pub mod checkpoint;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod fseq;
pub mod kv;
pub mod manifest;
pub mod runner;
pub mod synth_io;
pub mod tnsr;

pub use error::{Error, Result};

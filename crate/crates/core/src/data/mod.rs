//! Clip preprocessing, class weighting, batch samplers and the synthetic
//! motion dataset.

pub mod clip;
pub mod sampler;
pub mod synth;
pub mod transform;
pub mod weights;

pub use clip::{Normalization, RawClip, RawData};
pub use sampler::{stratified_batches, uniform_batches};
pub use synth::{SynthConfig, SynthDirection};
pub use transform::{downsample_indices, resize_bilinear, spatial_resize_normalize, temporal_downsample};
pub use weights::class_weights;

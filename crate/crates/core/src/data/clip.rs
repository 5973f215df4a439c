//! Raw frame stacks and their conversion to model input.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::transform::{downsample_indices, spatial_resize_normalize};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::tensor::{DType, Scalar, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub enum RawData {
    U8(Vec<u8>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl RawData {
    pub fn len(&self) -> usize {
        match self {
            RawData::U8(v) => v.len(),
            RawData::F32(v) => v.len(),
            RawData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Value in `[0, 1]` units: bytes are divided by 255, floats pass through.
    pub fn unit(&self, i: usize) -> f64 {
        match self {
            RawData::U8(v) => v[i] as f64 / 255.0,
            RawData::F32(v) => v[i] as f64,
            RawData::F64(v) => v[i],
        }
    }
}

/// An `[L, C, H, W]` frame stack as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawClip {
    shape: [usize; 4],
    data: RawData,
}

impl RawClip {
    pub fn new(shape: [usize; 4], data: RawData) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Contract(alloc::format!("clip extents {shape:?} contain a zero")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::dim("RawClip", "payload length", n, data.len()));
        }
        Ok(RawClip { shape, data })
    }

    pub fn from_tensor<T: Scalar>(t: &Tensor<T>) -> Result<Self> {
        let shape: [usize; 4] = t
            .shape()
            .try_into()
            .map_err(|_| Error::dim("RawClip", "rank", 4, t.rank()))?;
        let data = match T::DTYPE {
            DType::F32 => RawData::F32(t.data().iter().map(|v| v.as_f64() as f32).collect()),
            DType::F64 => RawData::F64(t.data().iter().map(|v| v.as_f64()).collect()),
        };
        RawClip::new(shape, data)
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn data(&self) -> &RawData {
        &self.data
    }

    pub fn into_data(self) -> RawData {
        self.data
    }

    /// Values in `[0, 1]` units as a tensor.
    pub fn to_unit_tensor<T: Scalar>(&self) -> Tensor<T> {
        Tensor::from_fn(self.shape, |i| T::of(self.data.unit(i)))
    }
}

/// Per-channel `(x - mean) / std` applied after resizing.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization { mean: vec![0.5], std: vec![0.5] }
    }
}

impl Normalization {
    /// Raw clip to model input: temporal downsampling to `clip_len`, bilinear
    /// resize to the frame size, then normalization.
    pub fn preprocess<T: Scalar>(&self, raw: &RawClip, config: &ModelConfig) -> Result<Tensor<T>> {
        let [len, c, h, w] = raw.shape();
        if c != config.encoder.input_channels {
            return Err(Error::dim("preprocess", "channels", config.encoder.input_channels, c));
        }
        let frame = c * h * w;
        let mut out = Vec::with_capacity(config.clip_len * c * config.frame_height * config.frame_width);
        for i in downsample_indices(len, config.clip_len) {
            let f = Tensor::<T>::from_fn([c, h, w], |j| T::of(raw.data().unit(i * frame + j)));
            let f = spatial_resize_normalize(&f, config.frame_height, config.frame_width, &self.mean, &self.std)?;
            out.extend_from_slice(f.data());
        }
        Tensor::new(config.clip_shape(), out)
    }
}

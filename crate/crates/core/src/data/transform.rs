//! Temporal and spatial resampling of frame stacks.

use num_traits::Float;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Source frame indices for resampling `len` frames to `target`: stride
/// `floor(len / target)`, repeating the last frame when `len < target`.
pub fn downsample_indices(len: usize, target: usize) -> Vec<usize> {
    let stride = (len / target.max(1)).max(1);
    (0..target).map(|i| (i * stride).min(len.saturating_sub(1))).collect()
}

/// Picks `target` frames along the leading axis.
pub fn temporal_downsample<T: Scalar>(frames: &Tensor<T>, target: usize) -> Result<Tensor<T>> {
    if target == 0 {
        return Err(Error::param("target", "must be at least 1"));
    }
    let len = *frames
        .shape()
        .first()
        .ok_or_else(|| Error::Contract("temporal_downsample of a rank-0 tensor".into()))?;
    let frame = frames.numel() / len;
    let mut data = Vec::with_capacity(target * frame);
    for i in downsample_indices(len, target) {
        data.extend_from_slice(&frames.data()[i * frame..(i + 1) * frame]);
    }
    let mut shape = frames.shape().to_vec();
    shape[0] = target;
    Tensor::new(shape, data)
}

/// Bilinear resampling of `[C, H, W]` with half-pixel centres, edges clamped.
pub fn resize_bilinear<T: Scalar>(frame: &Tensor<T>, out_h: usize, out_w: usize) -> Result<Tensor<T>> {
    let shape = frame.shape();
    if shape.len() != 3 {
        return Err(Error::dim("resize_bilinear", "frame rank", 3, shape.len()));
    }
    if out_h == 0 || out_w == 0 {
        return Err(Error::param("size", "output extents must be positive"));
    }
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    if (h, w) == (out_h, out_w) {
        return Ok(frame.clone());
    }
    let taps = |n_in: usize, n_out: usize| -> Vec<(usize, usize, f64)> {
        let scale = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|o| {
                let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
                let lo = Float::floor(src) as usize;
                let hi = (lo + 1).min(n_in - 1);
                (lo, hi, src - lo as f64)
            })
            .collect()
    };
    let (ys, xs) = (taps(h, out_h), taps(w, out_w));
    let src = frame.data();
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let at = |y: usize, x: usize| plane[y * w + x].as_f64();
                let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
                let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
                out.push(T::of(top * (1.0 - fy) + bottom * fy));
            }
        }
    }
    Tensor::new([c, out_h, out_w], out)
}

/// Resizes a `[C, H, W]` frame whose values are already in `[0, 1]`, then
/// applies `(x - mean) / std` per channel.
pub fn spatial_resize_normalize<T: Scalar>(
    frame: &Tensor<T>,
    out_h: usize,
    out_w: usize,
    mean: &[f64],
    std: &[f64],
) -> Result<Tensor<T>> {
    let mut out = resize_bilinear(frame, out_h, out_w)?;
    let c = out.shape()[0];
    for (name, v) in [("mean", mean), ("std", std)] {
        if v.len() != c && v.len() != 1 {
            return Err(Error::dim("spatial_resize_normalize", name, c, v.len()));
        }
    }
    if let Some(ch) = std.iter().position(|&s| s.is_nan() || s <= 0.0) {
        return Err(Error::param("std", alloc::format!("channel {ch} has non-positive std {}", std[ch])));
    }
    let plane = out_h * out_w;
    for (ch, chunk) in out.data_mut().chunks_exact_mut(plane).enumerate() {
        let m = mean[if mean.len() == 1 { 0 } else { ch }];
        let s = std[if std.len() == 1 { 0 } else { ch }];
        for v in chunk {
            *v = T::of((v.as_f64() - m) / s);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_from_thirty_fps() {
        let idx = downsample_indices(300, 50);
        assert_eq!(idx.len(), 50);
        assert_eq!(idx[1], 6);
        assert_eq!(idx[49], 294);
        assert_eq!(downsample_indices(3, 5), [0, 1, 2, 2, 2]);
        assert_eq!(downsample_indices(7, 7), [0, 1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn downsample_picks_frames() {
        let t = Tensor::<f32>::from_fn([3, 2], |i| i as f32);
        let d = temporal_downsample(&t, 5).unwrap();
        assert_eq!(d.data(), &[0., 1., 2., 3., 4., 5., 4., 5., 4., 5.]);
        assert_eq!(temporal_downsample(&t, 3).unwrap(), t);
    }

    #[test]
    fn half_pixel_average() {
        let t = Tensor::<f64>::from_f64([1, 2, 2], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let r = resize_bilinear(&t, 1, 1).unwrap();
        assert_eq!(r.data(), &[2.5]);
    }

    #[test]
    fn constant_stays_constant() {
        let t = Tensor::<f64>::full([2, 5, 7], 0.25);
        let r = resize_bilinear(&t, 9, 3).unwrap();
        assert!(r.data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn normalize_maps_unit_interval() {
        let t = Tensor::<f64>::from_f64([1, 1, 2], &[0.0, 1.0]).unwrap();
        let r = spatial_resize_normalize(&t, 1, 2, &[0.5], &[0.5]).unwrap();
        assert_eq!(r.data(), &[-1.0, 1.0]);
        assert!(matches!(
            spatial_resize_normalize(&t, 1, 2, &[0.5], &[0.0]),
            Err(Error::Parameter { .. })
        ));
    }
}

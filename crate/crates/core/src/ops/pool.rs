//! Spatial pooling.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

fn rank4<T: Scalar>(op: &'static str, x: &Var<T>) -> Result<[usize; 4]> {
    match *x.shape() {
        [n, c, h, w] => Ok([n, c, h, w]),
        ref s => Err(Error::dim(op, "input rank", 4, s.len())),
    }
}

impl<T: Scalar> Tape<T> {
    /// Max pooling with implicit `-inf` padding. Output extents use the
    /// floor rule `(H + 2p - k) / s + 1`; windows larger than the padded
    /// input are rejected.
    pub fn max_pool2d(&mut self, x: &Var<T>, kernel: usize, stride: usize, padding: usize) -> Result<Var<T>> {
        let [n, c, h, w] = rank4("max_pool2d", x)?;
        if stride == 0 || kernel == 0 {
            return Err(Error::param("max_pool2d", "kernel and stride must be >= 1"));
        }
        if padding > kernel / 2 {
            return Err(Error::geometry("max_pool2d", format!("padding {padding} exceeds half the window {kernel}")));
        }
        if kernel > h + 2 * padding || kernel > w + 2 * padding {
            return Err(Error::geometry(
                "max_pool2d",
                format!("window {kernel} larger than padded input {}x{}", h + 2 * padding, w + 2 * padding),
            ));
        }
        let oh = (h + 2 * padding - kernel) / stride + 1;
        let ow = (w + 2 * padding - kernel) / stride + 1;
        let src = x.value().data();
        let mut out = vec![T::zero(); n * c * oh * ow];
        let mut argmax = vec![0usize; out.len()];
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = T::neg_infinity();
                    let mut best_at = usize::MAX;
                    for ky in 0..kernel {
                        let iy = (oy * stride + ky) as isize - padding as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..kernel {
                            let ix = (ox * stride + kx) as isize - padding as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let idx = base + iy as usize * w + ix as usize;
                            if best_at == usize::MAX || src[idx] > best {
                                best = src[idx];
                                best_at = idx;
                            }
                        }
                    }
                    let o = (plane * oh + oy) * ow + ox;
                    out[o] = best;
                    argmax[o] = best_at;
                }
            }
        }
        let out = Tensor::from_parts(vec![n, c, oh, ow], out);
        if !self.tracks(&[x]) {
            return Ok(Var::constant(out));
        }
        let in_shape = x.shape().to_vec();
        Ok(self.record(out, &[x], move |g: &Tensor<T>, _: &[bool]| {
            let mut dx = vec![T::zero(); in_shape.iter().product()];
            for (gv, &i) in g.data().iter().zip(&argmax) {
                dx[i] = dx[i] + *gv;
            }
            vec![Some(Tensor::from_parts(in_shape.clone(), dx))]
        }))
    }

    /// Mean over the spatial axes: `[N, C, H, W] -> [N, C]`.
    pub fn global_avg_pool2d(&mut self, x: &Var<T>) -> Result<Var<T>> {
        let [n, c, h, w] = rank4("global_avg_pool2d", x)?;
        let hw = h * w;
        let inv = T::one() / T::of(hw as f64);
        let out: Vec<T> = x
            .value()
            .data()
            .chunks_exact(hw)
            .map(|plane| plane.iter().copied().sum::<T>() * inv)
            .collect();
        let out = Tensor::from_parts(vec![n, c], out);
        Ok(self.record(out, &[x], move |g: &Tensor<T>, _: &[bool]| {
            let mut dx = Vec::with_capacity(n * c * hw);
            for &v in g.data() {
                dx.extend(core::iter::repeat_n(v * inv, hw));
            }
            vec![Some(Tensor::from_parts(vec![n, c, h, w], dx))]
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn global_average() {
        let mut tape = Tape::<f64>::no_grad();
        let x = Var::constant(Tensor::from_f64([1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]).unwrap());
        let y = tape.global_avg_pool2d(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1]);
        assert_eq!(y.value().data(), &[2.5]);
    }

    #[test]
    fn max_pool_floor_rule_and_padding() {
        let mut tape = Tape::<f64>::no_grad();
        let x = Var::constant(Tensor::from_fn([1, 1, 5, 5], |i| i as f64));
        let y = tape.max_pool2d(&x, 2, 2, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.value().data(), &[6.0, 8.0, 16.0, 18.0]);
        // ResNet stem pool: 3x3 / 2, pad 1 halves 112 -> 56.
        let x = Var::constant(Tensor::zeros([1, 1, 112, 112]));
        assert_eq!(tape.max_pool2d(&x, 3, 2, 1).unwrap().shape(), &[1, 1, 56, 56]);
    }

    #[test]
    fn oversized_window_is_a_geometry_error() {
        let mut tape = Tape::<f64>::no_grad();
        let x = Var::constant(Tensor::zeros([1, 1, 2, 2]));
        assert!(matches!(tape.max_pool2d(&x, 3, 1, 0), Err(Error::Geometry { .. })));
    }
}

//! Per-channel batch normalization over `[N, C, H, W]`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchNormOptions {
    /// Normalize with batch statistics (and report them) instead of the running ones.
    pub training: bool,
    pub momentum: f64,
    pub eps: f64,
}

impl Default for BatchNormOptions {
    fn default() -> Self {
        BatchNormOptions {
            training: true,
            momentum: 0.1,
            eps: 1e-5,
        }
    }
}

/// Statistics of one training-mode batch, used to advance the running state.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    /// Biased variance (the one used for normalization).
    pub var: Vec<T>,
    pub count: usize,
}

impl<T: Scalar> BatchStats<T> {
    /// `running <- (1 - momentum) * running + momentum * batch`. The variance
    /// is blended in its unbiased form.
    pub fn update_running(&self, running_mean: &mut Tensor<T>, running_var: &mut Tensor<T>, momentum: f64) {
        let m = T::of(momentum);
        let keep = T::one() - m;
        let correction = T::of(self.count as f64 / (self.count - 1) as f64);
        for (r, b) in running_mean.data_mut().iter_mut().zip(&self.mean) {
            *r = keep * *r + m * *b;
        }
        for (r, b) in running_var.data_mut().iter_mut().zip(&self.var) {
            *r = keep * *r + m * *b * correction;
        }
    }
}

impl<T: Scalar> Tape<T> {
    /// Batch normalization. In training mode the batch statistics are
    /// returned so the caller can update its running buffers.
    #[allow(clippy::too_many_arguments)]
    pub fn batch_norm2d(
        &mut self,
        input: &Var<T>,
        gamma: &Var<T>,
        beta: &Var<T>,
        running_mean: &Tensor<T>,
        running_var: &Tensor<T>,
        opts: BatchNormOptions,
    ) -> Result<(Var<T>, Option<BatchStats<T>>)> {
        let shape = input.shape();
        if shape.len() != 4 {
            return Err(Error::dim("batch_norm2d", "input rank", 4, shape.len()));
        }
        let (n, c, hw) = (shape[0], shape[1], shape[2] * shape[3]);
        for (name, t) in [
            ("gamma", gamma.value()),
            ("beta", beta.value()),
            ("running_mean", running_mean),
            ("running_var", running_var),
        ] {
            if t.shape() != [c] {
                return Err(Error::dim("batch_norm2d", name, c, t.numel()));
            }
        }
        let count = n * hw;
        if opts.training && count < 2 {
            return Err(Error::DegenerateStatistics {
                op: "batch_norm2d",
                count,
            });
        }
        let x = input.value().data();
        let eps = T::of(opts.eps);

        let (mean, var) = if opts.training {
            let inv_count = T::one() / T::of(count as f64);
            let mut mean = vec![T::zero(); c];
            let mut var = vec![T::zero(); c];
            for ch in 0..c {
                let mut s = T::zero();
                for ni in 0..n {
                    s = s + x[(ni * c + ch) * hw..(ni * c + ch + 1) * hw].iter().copied().sum::<T>();
                }
                let m = s * inv_count;
                let mut sq = T::zero();
                for ni in 0..n {
                    for &v in &x[(ni * c + ch) * hw..(ni * c + ch + 1) * hw] {
                        sq = sq + (v - m) * (v - m);
                    }
                }
                mean[ch] = m;
                var[ch] = sq * inv_count;
            }
            (mean, var)
        } else {
            (running_mean.data().to_vec(), running_var.data().to_vec())
        };

        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let (g, b) = (gamma.value().data(), beta.value().data());
        let mut xhat = vec![T::zero(); x.len()];
        let mut out = vec![T::zero(); x.len()];
        for ni in 0..n {
            for ch in 0..c {
                let range = (ni * c + ch) * hw..(ni * c + ch + 1) * hw;
                for i in range {
                    let h = (x[i] - mean[ch]) * inv_std[ch];
                    xhat[i] = h;
                    out[i] = g[ch] * h + b[ch];
                }
            }
        }
        let out = Tensor::from_parts(shape.to_vec(), out);
        let stats = opts.training.then(|| BatchStats {
            mean: mean.clone(),
            var: var.clone(),
            count,
        });
        if !self.tracks(&[input, gamma, beta]) {
            return Ok((Var::constant(out), stats));
        }

        let xhat = Arc::new(xhat);
        let gamma_v = gamma.shared().clone();
        let training = opts.training;
        let in_shape = shape.to_vec();
        let var = self.record(out, &[input, gamma, beta], move |grad: &Tensor<T>, needs: &[bool]| {
            let dy = grad.data();
            let mut sum_dy = vec![T::zero(); c];
            let mut sum_dy_xhat = vec![T::zero(); c];
            for ni in 0..n {
                for ch in 0..c {
                    for i in (ni * c + ch) * hw..(ni * c + ch + 1) * hw {
                        sum_dy[ch] = sum_dy[ch] + dy[i];
                        sum_dy_xhat[ch] = sum_dy_xhat[ch] + dy[i] * xhat[i];
                    }
                }
            }
            let dx = needs[0].then(|| {
                let gm = gamma_v.data();
                let inv_count = T::one() / T::of(count as f64);
                let mut dx = vec![T::zero(); dy.len()];
                for ni in 0..n {
                    for ch in 0..c {
                        let scale = gm[ch] * inv_std[ch];
                        for i in (ni * c + ch) * hw..(ni * c + ch + 1) * hw {
                            dx[i] = if training {
                                scale * (dy[i] - (sum_dy[ch] + xhat[i] * sum_dy_xhat[ch]) * inv_count)
                            } else {
                                scale * dy[i]
                            };
                        }
                    }
                }
                Tensor::from_parts(in_shape.clone(), dx)
            });
            vec![
                dx,
                needs[1].then(|| Tensor::from_parts(vec![c], sum_dy_xhat.clone())),
                needs[2].then(|| Tensor::from_parts(vec![c], sum_dy.clone())),
            ]
        });
        Ok((var, stats))
    }
}

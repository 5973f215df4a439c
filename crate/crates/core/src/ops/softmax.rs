use alloc::vec;
use alloc::vec::Vec;

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Row-wise softmax of a `[N, K]` buffer with max subtraction.
pub(crate) fn softmax_rows<T: Scalar>(logits: &[T], k: usize) -> Result<Vec<T>> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("softmax input".into()));
    }
    let mut out = vec![T::zero(); logits.len()];
    for (row, dst) in logits.chunks_exact(k).zip(out.chunks_exact_mut(k)) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut z = T::zero();
        for (d, &v) in dst.iter_mut().zip(row) {
            *d = (v - max).exp();
            z = z + *d;
        }
        for d in dst.iter_mut() {
            *d = *d / z;
        }
    }
    Ok(out)
}

impl<T: Scalar> Tape<T> {
    /// Softmax over the last axis of a `[N, K]` tensor.
    pub fn softmax(&mut self, x: &Var<T>) -> Result<Var<T>> {
        let k = match *x.shape() {
            [_, k] => k,
            ref s => return Err(Error::dim("softmax", "input rank", 2, s.len())),
        };
        let probs = Tensor::from_parts(x.shape().to_vec(), softmax_rows(x.value().data(), k)?);
        if !self.tracks(&[x]) {
            return Ok(Var::constant(probs));
        }
        let saved = probs.data().to_vec();
        Ok(self.record(probs, &[x], move |g: &Tensor<T>, _: &[bool]| {
            let mut dx = vec![T::zero(); saved.len()];
            for ((gr, yr), dr) in g.data().chunks_exact(k).zip(saved.chunks_exact(k)).zip(dx.chunks_exact_mut(k)) {
                let dot: T = gr.iter().zip(yr).map(|(a, b)| *a * *b).sum();
                for ((d, gv), yv) in dr.iter_mut().zip(gr).zip(yr) {
                    *d = *yv * (*gv - dot);
                }
            }
            vec![Some(Tensor::from_parts(g.shape().to_vec(), dx))]
        }))
    }
}

//! Class-weighted cross-entropy.

use num_traits::Float;
use alloc::format;
use alloc::vec::Vec;

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

impl<T: Scalar> Tape<T> {
    /// `sum_i w[y_i] * l_i / sum_i w[y_i]` with `l_i = -log softmax(x_i)[y_i]`
    /// over `[B, K]` logits.
    pub fn weighted_cross_entropy(&mut self, logits: &Var<T>, targets: &[usize], weights: &[f64]) -> Result<Var<T>> {
        let shape = logits.shape();
        if shape.len() != 2 {
            return Err(Error::dim("weighted_cross_entropy", "logits rank", 2, shape.len()));
        }
        let (b, k) = (shape[0], shape[1]);
        if targets.len() != b {
            return Err(Error::dim("weighted_cross_entropy", "targets", b, targets.len()));
        }
        if weights.len() != k {
            return Err(Error::dim("weighted_cross_entropy", "weights", k, weights.len()));
        }
        if let Some(c) = weights.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::param("weights", format!("class {c} weight {} is not positive", weights[c])));
        }
        if let Some(&y) = targets.iter().find(|&&y| y >= k) {
            return Err(Error::Index { what: "target class", index: y, bound: k });
        }
        let x = logits.value().data();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cross-entropy logits".into()));
        }

        let mut probs = Vec::with_capacity(b * k);
        let mut total = 0.0;
        let mut norm = 0.0;
        for (row, &y) in x.chunks_exact(k).zip(targets) {
            let max = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| Float::exp(v.as_f64() - max)).sum();
            let log_z = max + Float::ln(z);
            probs.extend(row.iter().map(|v| Float::exp(v.as_f64() - log_z)));
            total += weights[y] * (log_z - row[y].as_f64());
            norm += weights[y];
        }
        let value = Tensor::scalar(T::of(total / norm));

        let targets = targets.to_vec();
        let weights = weights.to_vec();
        Ok(self.record(value, &[logits], move |g: &Tensor<T>, _: &[bool]| {
            let g = g.data()[0].as_f64();
            let mut dx = Vec::with_capacity(b * k);
            for (i, &y) in targets.iter().enumerate() {
                let scale = g * weights[y] / norm;
                for j in 0..k {
                    let onehot = if j == y { 1.0 } else { 0.0 };
                    dx.push(T::of(scale * (probs[i * k + j] - onehot)));
                }
            }
            alloc::vec![Some(Tensor::from_parts(alloc::vec![b, k], dx))]
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loss_and_grad(x: &Tensor<f64>, t: &[usize], w: &[f64]) -> (f64, Tensor<f64>) {
        let mut tape = Tape::new();
        let v = tape.leaf(x.clone());
        let l = tape.weighted_cross_entropy(&v, t, w).unwrap();
        let g = tape.backward(&l).unwrap();
        (l.value().item().unwrap(), g.get(&v).unwrap().clone())
    }

    #[test]
    fn uniform_logits_give_ln_k() {
        let (l, _) = loss_and_grad(&Tensor::zeros([3, 4]), &[0, 1, 3], &[1.0; 4]);
        assert!((l - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_logits() {
        let x = Tensor::from_f64([1, 4], &[0.0, 30.0, 0.0, 0.0]).unwrap();
        let (l, _) = loss_and_grad(&x, &[1], &[1.0; 4]);
        assert!(l < 1e-9);
    }

    #[test]
    fn weighted_mean_by_hand() {
        let x = Tensor::from_f64([2, 2], &[0.3, -0.2, 0.3, -0.2]).unwrap();
        let (l, _) = loss_and_grad(&x, &[0, 1], &[3.0, 1.0]);
        let lse = (0.3f64.exp() + (-0.2f64).exp()).ln();
        let (l0, l1) = (lse - 0.3, lse + 0.2);
        assert!((l - (3.0 * l0 + l1) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let x = Tensor::from_fn([3, 4], |i| (i as f64 * 0.37).sin());
        let (_, g) = loss_and_grad(&x, &[2, 0, 1], &[1.0; 4]);
        for row in g.data().chunks(4) {
            assert!(row.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn bad_target_is_index_error() {
        let mut tape = Tape::<f64>::new();
        let v = tape.leaf(Tensor::zeros([1, 4]));
        assert!(matches!(
            tape.weighted_cross_entropy(&v, &[4], &[1.0; 4]),
            Err(Error::Index { .. })
        ));
    }
}

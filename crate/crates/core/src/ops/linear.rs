use alloc::vec;

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

impl<T: Scalar> Tape<T> {
    /// Fully connected layer: `[N, F] x [O, F]^T + [O] -> [N, O]`.
    pub fn linear(&mut self, input: &Var<T>, weight: &Var<T>, bias: Option<&Var<T>>) -> Result<Var<T>> {
        let (n, f) = match *input.shape() {
            [n, f] => (n, f),
            ref s => return Err(Error::dim("linear", "input rank", 2, s.len())),
        };
        let o = match *weight.shape() {
            [o, wf] if wf == f => o,
            [_, wf] => return Err(Error::dim("linear", "in_features", wf, f)),
            ref s => return Err(Error::dim("linear", "weight rank", 2, s.len())),
        };
        if let Some(b) = bias {
            if b.shape() != [o] {
                return Err(Error::dim("linear", "bias", o, b.value().numel()));
            }
        }
        let mut out = vec![T::zero(); n * o];
        let beta = match bias {
            Some(b) => {
                for row in out.chunks_exact_mut(o) {
                    row.copy_from_slice(b.value().data());
                }
                T::one()
            }
            None => T::zero(),
        };
        T::gemm(false, true, n, f, o, T::one(), input.value().data(), weight.value().data(), beta, &mut out);
        let out = Tensor::from_parts(vec![n, o], out);

        let (x, w) = (input.shared().clone(), weight.shared().clone());
        let mut parents = vec![input, weight];
        parents.extend(bias);
        Ok(self.record(out, &parents, move |g: &Tensor<T>, needs: &[bool]| {
            let dy = g.data();
            let dx = needs[0].then(|| {
                let mut dx = vec![T::zero(); n * f];
                T::gemm(false, false, n, o, f, T::one(), dy, w.data(), T::zero(), &mut dx);
                Tensor::from_parts(vec![n, f], dx)
            });
            let dw = needs[1].then(|| {
                let mut dw = vec![T::zero(); o * f];
                T::gemm(true, false, o, n, f, T::one(), dy, x.data(), T::zero(), &mut dw);
                Tensor::from_parts(vec![o, f], dw)
            });
            let mut grads = vec![dx, dw];
            if needs.len() > 2 {
                grads.push(needs[2].then(|| {
                    let mut db = vec![T::zero(); o];
                    for row in dy.chunks_exact(o) {
                        for (a, v) in db.iter_mut().zip(row) {
                            *a = *a + *v;
                        }
                    }
                    Tensor::from_parts(vec![o], db)
                }));
            }
            grads
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(shape: &[usize], v: &[f64]) -> Var<f64> {
        Var::constant(Tensor::from_f64(shape.to_vec(), v).unwrap())
    }

    #[test]
    fn hand_matrix_product() {
        // [1,2] . [[1,1],[0,1]]^T + [0,1] = [1+2, 0+2] + [0,1] = [3, 3]
        let mut tape = Tape::no_grad();
        let y = tape
            .linear(&c(&[1, 2], &[1.0, 2.0]), &c(&[2, 2], &[1.0, 1.0, 0.0, 1.0]), Some(&c(&[2], &[0.0, 1.0])))
            .unwrap();
        assert_eq!(y.value().data(), &[3.0, 3.0]);
    }

    #[test]
    fn identity_and_zero_weights() {
        let mut tape = Tape::no_grad();
        let x = c(&[2, 3], &[1.0, -2.0, 3.0, 4.0, 5.0, -6.0]);
        let eye = c(&[3, 3], &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let y = tape.linear(&x, &eye, Some(&c(&[3], &[0.0; 3]))).unwrap();
        assert_eq!(y.value(), x.value());
        let y = tape
            .linear(&x, &c(&[2, 3], &[0.0; 6]), Some(&c(&[2], &[7.0, -1.0])))
            .unwrap();
        assert_eq!(y.value().data(), &[7.0, -1.0, 7.0, -1.0]);
    }

    #[test]
    fn extent_mismatch() {
        let mut tape = Tape::no_grad();
        let err = tape.linear(&c(&[1, 2], &[1.0, 2.0]), &c(&[1, 3], &[0.0; 3]), None).unwrap_err();
        assert!(matches!(err, Error::Dimension { ref axis, .. } if axis == "in_features"));
    }
}

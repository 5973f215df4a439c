//! Elementwise arithmetic, reductions and layout ops.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

fn same_shape<T: Scalar>(op: &'static str, a: &Var<T>, b: &Var<T>) -> Result<()> {
    if a.shape() == b.shape() {
        return Ok(());
    }
    if a.shape().len() != b.shape().len() {
        return Err(Error::dim(op, "rank", a.shape().len(), b.shape().len()));
    }
    let axis = a
        .shape()
        .iter()
        .zip(b.shape())
        .position(|(x, y)| x != y)
        .unwrap_or(0);
    Err(Error::dim(op, format!("{axis}"), a.shape()[axis], b.shape()[axis]))
}

fn expect_rank<T: Scalar>(op: &'static str, x: &Var<T>, rank: usize) -> Result<()> {
    if x.shape().len() != rank {
        return Err(Error::dim(op, "rank", rank, x.shape().len()));
    }
    Ok(())
}

fn map<T: Scalar>(x: &Tensor<T>, f: impl Fn(T) -> T) -> Tensor<T> {
    Tensor::from_parts(x.shape().to_vec(), x.data().iter().map(|&v| f(v)).collect())
}

impl<T: Scalar> Tape<T> {
    pub fn add(&mut self, a: &Var<T>, b: &Var<T>) -> Result<Var<T>> {
        same_shape("add", a, b)?;
        let data = a.value().data().iter().zip(b.value().data()).map(|(x, y)| *x + *y).collect();
        let out = Tensor::from_parts(a.shape().to_vec(), data);
        Ok(self.record(out, &[a, b], |g: &Tensor<T>, needs: &[bool]| {
            vec![needs[0].then(|| g.clone()), needs[1].then(|| g.clone())]
        }))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: &Var<T>, b: &Var<T>) -> Result<Var<T>> {
        same_shape("mul", a, b)?;
        let data = a.value().data().iter().zip(b.value().data()).map(|(x, y)| *x * *y).collect();
        let out = Tensor::from_parts(a.shape().to_vec(), data);
        let (sa, sb) = (a.shared().clone(), b.shared().clone());
        Ok(self.record(out, &[a, b], move |g: &Tensor<T>, needs: &[bool]| {
            let prod = |other: &Arc<Tensor<T>>| {
                let d = g.data().iter().zip(other.data()).map(|(x, y)| *x * *y).collect();
                Tensor::from_parts(g.shape().to_vec(), d)
            };
            vec![needs[0].then(|| prod(&sb)), needs[1].then(|| prod(&sa))]
        }))
    }

    pub fn scale(&mut self, x: &Var<T>, factor: f64) -> Var<T> {
        let c = T::of(factor);
        let out = map(x.value(), |v| v * c);
        self.record(out, &[x], move |g: &Tensor<T>, _: &[bool]| vec![Some(map(g, |v| v * c))])
    }

    /// Sum of all elements, as a rank-0 tensor.
    pub fn sum(&mut self, x: &Var<T>) -> Var<T> {
        let out = Tensor::scalar(x.value().sum());
        let shape = x.shape().to_vec();
        self.record(out, &[x], move |g: &Tensor<T>, _: &[bool]| {
            vec![Some(Tensor::full(shape.clone(), g.data()[0]))]
        })
    }

    pub fn relu(&mut self, x: &Var<T>) -> Var<T> {
        let out = map(x.value(), |v| if v > T::zero() { v } else { T::zero() });
        if !self.tracks(&[x]) {
            return Var::constant(out);
        }
        let mask: Vec<bool> = out.data().iter().map(|&v| v > T::zero()).collect();
        let margin = x.value().data().iter().map(|v| v.abs().as_f64()).fold(f64::INFINITY, f64::min);
        self.note_kink(margin);
        self.record(out, &[x], move |g: &Tensor<T>, _: &[bool]| {
            let d = g
                .data()
                .iter()
                .zip(&mask)
                .map(|(&v, &m)| if m { v } else { T::zero() })
                .collect();
            vec![Some(Tensor::from_parts(g.shape().to_vec(), d))]
        })
    }

    pub fn reshape(&mut self, x: &Var<T>, shape: &[usize]) -> Result<Var<T>> {
        let out = x.value().clone().reshape(shape.to_vec())?;
        let orig = x.shape().to_vec();
        Ok(self.record(out, &[x], move |g: &Tensor<T>, _: &[bool]| {
            vec![Some(Tensor::from_parts(orig.clone(), g.data().to_vec()))]
        }))
    }

    /// `[N, d1, d2, ...] -> [N, d1*d2*...]`.
    pub fn flatten(&mut self, x: &Var<T>) -> Result<Var<T>> {
        let n = *x
            .shape()
            .first()
            .ok_or_else(|| Error::Contract("flatten of a rank-0 tensor".into()))?;
        let rest = x.value().numel() / n;
        self.reshape(x, &[n, rest])
    }

    /// `[B, M, N] -> [B, N, M]`.
    pub fn swap_last_two(&mut self, x: &Var<T>) -> Result<Var<T>> {
        expect_rank("swap_last_two", x, 3)?;
        let (b, m, n) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let out = Tensor::from_parts(vec![b, n, m], transpose3(x.value().data(), b, m, n));
        Ok(self.record(out, &[x], move |g: &Tensor<T>, _: &[bool]| {
            vec![Some(Tensor::from_parts(vec![b, m, n], transpose3(g.data(), b, n, m)))]
        }))
    }

    /// Mean over the middle axis: `[B, L, F] -> [B, F]`.
    pub fn mean_axis1(&mut self, x: &Var<T>) -> Result<Var<T>> {
        expect_rank("mean_axis1", x, 3)?;
        let (b, l, f) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let inv = T::one() / T::of(l as f64);
        let src = x.value().data();
        let mut out = vec![T::zero(); b * f];
        for bi in 0..b {
            let row = &mut out[bi * f..(bi + 1) * f];
            for t in 0..l {
                let frame = &src[(bi * l + t) * f..(bi * l + t + 1) * f];
                for (o, v) in row.iter_mut().zip(frame) {
                    *o = *o + *v;
                }
            }
            for o in row.iter_mut() {
                *o = *o * inv;
            }
        }
        let out = Tensor::from_parts(vec![b, f], out);
        Ok(self.record(out, &[x], move |g: &Tensor<T>, _: &[bool]| {
            let mut dx = Vec::with_capacity(b * l * f);
            for bi in 0..b {
                let row = &g.data()[bi * f..(bi + 1) * f];
                for _ in 0..l {
                    dx.extend(row.iter().map(|&v| v * inv));
                }
            }
            vec![Some(Tensor::from_parts(vec![b, l, f], dx))]
        }))
    }

    /// Value at the final time index: `[B, C, L] -> [B, C]`.
    pub fn last_step(&mut self, x: &Var<T>) -> Result<Var<T>> {
        expect_rank("last_step", x, 3)?;
        let (b, c, l) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let src = x.value().data();
        let out: Vec<T> = (0..b * c).map(|i| src[i * l + l - 1]).collect();
        let out = Tensor::from_parts(vec![b, c], out);
        Ok(self.record(out, &[x], move |g: &Tensor<T>, _: &[bool]| {
            let mut dx = vec![T::zero(); b * c * l];
            for (i, &v) in g.data().iter().enumerate() {
                dx[i * l + l - 1] = v;
            }
            vec![Some(Tensor::from_parts(vec![b, c, l], dx))]
        }))
    }
}

fn transpose3<T: Scalar>(src: &[T], b: usize, m: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); b * m * n];
    for bi in 0..b {
        let base = bi * m * n;
        for i in 0..m {
            for j in 0..n {
                out[base + j * m + i] = src[base + i * n + j];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_definition() {
        let mut tape = Tape::<f32>::no_grad();
        let x = Var::constant(Tensor::new([3], vec![-1.0, 0.0, 2.0]).unwrap());
        assert_eq!(tape.relu(&x).value().data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn mismatched_add_names_axis() {
        let mut tape = Tape::<f32>::no_grad();
        let a = Var::constant(Tensor::zeros([2, 3]));
        let b = Var::constant(Tensor::zeros([2, 4]));
        match tape.add(&a, &b) {
            Err(Error::Dimension { axis, expected, got, .. }) => {
                assert_eq!((axis.as_str(), expected, got), ("1", 3, 4));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn swap_last_two_round_trips() {
        let mut tape = Tape::<f32>::no_grad();
        let x = Var::constant(Tensor::from_fn([2, 3, 4], |i| i as f32));
        let y = tape.swap_last_two(&x).unwrap();
        assert_eq!(y.shape(), &[2, 4, 3]);
        assert_eq!(y.value().data()[1], 4.0);
        let z = tape.swap_last_two(&y).unwrap();
        assert_eq!(z.value(), x.value());
    }

    #[test]
    fn mean_axis1_and_last_step() {
        let mut tape = Tape::<f64>::no_grad();
        let x = Var::constant(Tensor::from_fn([1, 2, 3], |i| i as f64));
        assert_eq!(tape.mean_axis1(&x).unwrap().value().data(), &[1.5, 2.5, 3.5]);
        assert_eq!(tape.last_step(&x).unwrap().value().data(), &[2.0, 5.0]);
    }
}

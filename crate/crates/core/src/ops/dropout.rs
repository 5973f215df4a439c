use alloc::vec;
use alloc::vec::Vec;

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tensor::{Scalar, Tensor};

impl<T: Scalar> Tape<T> {
    /// Inverted dropout. In training mode each element is zeroed with
    /// probability `p` and survivors are scaled by `1/(1-p)`; otherwise (or
    /// when `p == 0`) this is the identity and draws nothing from `rng`.
    pub fn dropout(&mut self, x: &Var<T>, p: f64, rng: &mut SeededRng, training: bool) -> Result<Var<T>> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::param("dropout.p", alloc::format!("{p} not in [0, 1)")));
        }
        if !training || p == 0.0 {
            return Ok(x.clone());
        }
        let keep = T::of(1.0 / (1.0 - p));
        let mask: Vec<T> = (0..x.value().numel())
            .map(|_| if rng.uniform() < p { T::zero() } else { keep })
            .collect();
        let data = x.value().data().iter().zip(&mask).map(|(v, m)| *v * *m).collect();
        let out = Tensor::from_parts(x.shape().to_vec(), data);
        Ok(self.record(out, &[x], move |g: &Tensor<T>, _: &[bool]| {
            let d = g.data().iter().zip(&mask).map(|(v, m)| *v * *m).collect();
            vec![Some(Tensor::from_parts(g.shape().to_vec(), d))]
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_is_identity_in_both_modes() {
        let mut tape = Tape::<f32>::new();
        let mut rng = SeededRng::new(0);
        let x = Var::constant(Tensor::from_fn([4, 5], |i| i as f32 - 7.0));
        for training in [true, false] {
            let y = tape.dropout(&x, 0.0, &mut rng, training).unwrap();
            assert_eq!(y.value(), x.value());
        }
    }

    #[test]
    fn eval_mode_is_identity() {
        let mut tape = Tape::<f64>::new();
        let mut rng = SeededRng::new(0);
        let x = Var::constant(Tensor::from_fn([100], |i| i as f64));
        let y = tape.dropout(&x, 0.25, &mut rng, false).unwrap();
        assert_eq!(y.value(), x.value());
    }

    #[test]
    fn rejects_rate_of_one() {
        let mut tape = Tape::<f64>::new();
        let mut rng = SeededRng::new(0);
        let x = Var::constant(Tensor::zeros([3]));
        assert!(tape.dropout(&x, 1.0, &mut rng, true).is_err());
        assert!(tape.dropout(&x, -0.1, &mut rng, true).is_err());
    }

    #[test]
    fn train_mode_expectation_matches_input() {
        // 10^4 independent masks on a fixed 8-vector.
        let x = Tensor::from_fn([8], |i| 1.0 + i as f64);
        let mut rng = SeededRng::new(11);
        let mut tape = Tape::<f64>::no_grad();
        let input = Var::constant(x.clone());
        let trials = 10_000;
        let mut acc = [0.0f64; 8];
        let mut zeros = 0usize;
        for _ in 0..trials {
            let y = tape.dropout(&input, 0.25, &mut rng, true).unwrap();
            for (a, v) in acc.iter_mut().zip(y.value().data()) {
                *a += v;
                zeros += (*v == 0.0) as usize;
            }
        }
        for (a, v) in acc.iter().zip(x.data()) {
            let mean = a / trials as f64;
            // std of one output: v * sqrt(p/(1-p)) = 0.577 v; 4 sigma of the mean
            let tol = 4.0 * v * (0.25f64 / 0.75).sqrt() / (trials as f64).sqrt();
            assert!((mean - v).abs() < tol, "mean {mean} vs {v}");
        }
        let rate = zeros as f64 / (8 * trials) as f64;
        assert!((rate - 0.25).abs() < 0.01);
    }
}

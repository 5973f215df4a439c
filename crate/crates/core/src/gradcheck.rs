//! Central finite-difference gradient checking.
//!
//! The analytic gradient comes from one recorded forward + [`Tape::backward`];
//! the numeric one from `(f(x + eps) - f(x - eps)) / 2 eps` per coordinate,
//! each evaluated on a non-recording tape.

use alloc::format;
use alloc::vec::Vec;

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckReport {
    /// `max |a - n| / max(|a|, |n|, 1e-8)` over every coordinate.
    pub max_rel_error: f64,
    /// `(input index, flat coordinate)` where the maximum occurred.
    pub worst: Option<(usize, usize)>,
    /// Analytic and numeric derivative at `worst`.
    pub worst_values: (f64, f64),
    pub coordinates: usize,
}

/// Relative error with the `1e-8` floor in the denominator.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / denom
}

fn scalar_output(out: &Var<f64>) -> Result<f64> {
    if out.value().numel() != 1 {
        return Err(Error::Contract(format!(
            "gradcheck function must return a scalar, got shape {:?}",
            out.shape()
        )));
    }
    Ok(out.value().data()[0])
}

/// Compares reverse-mode gradients of `f` against central differences.
///
/// `f` must be deterministic: it is called once on a recording tape and
/// twice per input coordinate on non-recording tapes.
pub fn gradcheck<F>(mut f: F, inputs: &[Tensor<f64>], eps: f64) -> Result<GradcheckReport>
where
    F: FnMut(&mut Tape<f64>, &[Var<f64>]) -> Result<Var<f64>>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::param("epsilon", format!("{eps} not in [1e-7, 1e-3]")));
    }
    let mut tape = Tape::new();
    let leaves: Vec<Var<f64>> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &leaves)?;
    scalar_output(&out)?;
    let analytic: Vec<Tensor<f64>> = if out.is_tracked() {
        let grads = tape.backward(&out)?;
        leaves.iter().map(|v| grads.get_or_zeros(v)).collect()
    } else {
        leaves.iter().map(|v| Tensor::zeros(v.shape().to_vec())).collect()
    };
    drop(tape);

    let mut eval = |values: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::no_grad();
        let vars: Vec<Var<f64>> = values.iter().map(|t| Var::constant(t.clone())).collect();
        scalar_output(&f(&mut tape, &vars)?)
    };

    let mut report = GradcheckReport {
        max_rel_error: 0.0,
        worst: None,
        worst_values: (0.0, 0.0),
        coordinates: 0,
    };
    let mut probe: Vec<Tensor<f64>> = inputs.to_vec();
    for (i, grad) in analytic.iter().enumerate() {
        for j in 0..probe[i].numel() {
            let orig = probe[i].data()[j];
            probe[i].data_mut()[j] = orig + eps;
            let plus = eval(&probe)?;
            probe[i].data_mut()[j] = orig - eps;
            let minus = eval(&probe)?;
            probe[i].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let err = relative_error(grad.data()[j], numeric);
            report.coordinates += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((i, j));
                report.worst_values = (grad.data()[j], numeric);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn random(shape: &[usize], rng: &mut SeededRng) -> Tensor<f64> {
        Tensor::from_fn(shape.to_vec(), |_| rng.uniform_range(-1.0, 1.0))
    }

    #[test]
    fn sum_of_squares() {
        let mut rng = SeededRng::new(5);
        let x = random(&[3, 4], &mut rng);
        let r = gradcheck(
            |tape, v| {
                let sq = tape.mul(&v[0], &v[0])?;
                Ok(tape.sum(&sq))
            },
            &[x],
            1e-5,
        )
        .unwrap();
        assert!(r.max_rel_error < 1e-7, "{r:?}");
        assert_eq!(r.coordinates, 12);
    }

    #[test]
    fn constant_function_has_zero_error() {
        let r = gradcheck(
            |_, _| Ok(Var::constant(Tensor::scalar(3.0))),
            &[Tensor::ones([2])],
            1e-5,
        )
        .unwrap();
        assert_eq!(r.max_rel_error, 0.0);
    }

    #[test]
    fn non_scalar_output_is_rejected() {
        let r = gradcheck(|_, v| Ok(v[0].clone()), &[Tensor::ones([2])], 1e-5);
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn epsilon_range_is_enforced() {
        let f = |tape: &mut Tape<f64>, v: &[Var<f64>]| Ok(tape.sum(&v[0]));
        assert!(gradcheck(f, &[Tensor::ones([1])], 1e-2).is_err());
        assert!(gradcheck(f, &[Tensor::ones([1])], 1e-9).is_err());
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // relu(x) at x = 0.5 has slope 1; pretending the loss is 2*relu but
        // computing the value through a constant breaks the analytic side.
        let x = Tensor::from_f64([1], &[0.5]).unwrap();
        let r = gradcheck(
            |tape, v| {
                let r = tape.relu(&v[0]);
                let s = tape.sum(&r);
                let frozen = Var::constant(s.value().clone());
                tape.add(&s, &frozen)
            },
            &[x],
            1e-5,
        )
        .unwrap();
        assert!(r.max_rel_error > 0.4);
    }
}

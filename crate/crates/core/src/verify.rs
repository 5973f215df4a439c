//! Randomized finite-difference checks of every differentiable building
//! block, at `f64`.
//!
//! Each case draws fresh shapes, inputs and parameters from its own stream
//! and reduces the output to a scalar through a random weighting, so no
//! coordinate sees a structurally zero gradient. Draws whose recorded point
//! lies within `KINK_MARGIN` of a ReLU kink are redrawn: central differences
//! across a kink measure the kink, not the gradient.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::gradcheck::gradcheck;
use crate::nn::{basic_block2d, init_basic_block, init_temporal_block, temporal_block, Forward, Mode, ParamStore, TemporalBlockSpec};
use crate::ops::BatchNormOptions;
use crate::rng::SeededRng;
use crate::tensor::Tensor;

pub const SUITE_OPS: [&str; 7] = [
    "conv2d",
    "causal_conv1d",
    "batchnorm2d",
    "linear",
    "softmax_ce",
    "temporal_block",
    "basic_block2d",
];

/// Minimum distance from a ReLU kink for a draw to be checked.
pub const KINK_MARGIN: f64 = 1e-3;

const MAX_DRAWS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct OpReport {
    pub op: &'static str,
    pub cases: usize,
    pub coordinates: usize,
    pub max_rel_error: f64,
    /// Draws rejected for sitting too close to a kink.
    pub redraws: usize,
    /// Case, input index, coordinate, analytic and numeric values of the
    /// worst coordinate.
    pub worst: Option<(usize, usize, usize, f64, f64)>,
}

fn uniform(shape: &[usize], rng: &mut SeededRng) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| rng.uniform_range(-1.0, 1.0))
}

fn range(rng: &mut SeededRng, lo: usize, hi: usize) -> usize {
    lo + rng.below(hi - lo + 1)
}

/// `sum(out * r)` for a fixed random `r`.
fn weighted_sum(tape: &mut Tape<f64>, out: &Var<f64>, r: &Tensor<f64>) -> Result<Var<f64>> {
    let w = Var::constant(r.clone());
    let p = tape.mul(out, &w)?;
    Ok(tape.sum(&p))
}

/// A drawn problem: the inputs to differentiate and the scalar function.
type Case = (Vec<Tensor<f64>>, alloc::boxed::Box<dyn FnMut(&mut Tape<f64>, &[Var<f64>]) -> Result<Var<f64>>>);

fn draw(op: &str, rng: &mut SeededRng) -> Result<Case> {
    let case: Case = match op {
        "conv2d" => {
            let (n, ci, co) = (range(rng, 1, 2), range(rng, 1, 3), range(rng, 1, 3));
            let (h, w) = (range(rng, 3, 6), range(rng, 3, 6));
            let (stride, pad) = (range(rng, 1, 2), range(rng, 0, 1));
            let k = range(rng, 1, 3);
            let x = uniform(&[n, ci, h, w], rng);
            let wt = uniform(&[co, ci, k, k], rng);
            let b = uniform(&[co], rng);
            let out = crate::ops::Conv2dGeometry::new(x.shape(), wt.shape(), stride, pad)?.output_shape();
            let r = uniform(&out, rng);
            (
                alloc::vec![x, wt, b],
                alloc::boxed::Box::new(move |tape: &mut Tape<f64>, v: &[Var<f64>]| {
                    let y = tape.conv2d(&v[0], &v[1], Some(&v[2]), stride, pad)?;
                    weighted_sum(tape, &y, &r)
                }),
            )
        }
        "causal_conv1d" => {
            let (n, ci, co) = (range(rng, 1, 2), range(rng, 1, 3), range(rng, 1, 3));
            let (len, k, d) = (range(rng, 3, 8), range(rng, 1, 3), range(rng, 1, 3));
            let x = uniform(&[n, ci, len], rng);
            let wt = uniform(&[co, ci, k], rng);
            let b = uniform(&[co], rng);
            let r = uniform(&[n, co, len], rng);
            (
                alloc::vec![x, wt, b],
                alloc::boxed::Box::new(move |tape: &mut Tape<f64>, v: &[Var<f64>]| {
                    let y = tape.causal_conv1d(&v[0], &v[1], Some(&v[2]), d)?;
                    weighted_sum(tape, &y, &r)
                }),
            )
        }
        "batchnorm2d" => {
            let (n, c) = (range(rng, 2, 3), range(rng, 1, 3));
            let (h, w) = (range(rng, 1, 3), range(rng, 2, 3));
            let x = uniform(&[n, c, h, w], rng);
            let gamma = Tensor::from_fn([c], |_| rng.uniform_range(0.5, 1.5));
            let beta = uniform(&[c], rng);
            let r = uniform(&[n, c, h, w], rng);
            let (rm, rv) = (Tensor::zeros([c]), Tensor::ones([c]));
            (
                alloc::vec![x, gamma, beta],
                alloc::boxed::Box::new(move |tape: &mut Tape<f64>, v: &[Var<f64>]| {
                    let opts = BatchNormOptions { training: true, ..BatchNormOptions::default() };
                    let (y, _) = tape.batch_norm2d(&v[0], &v[1], &v[2], &rm, &rv, opts)?;
                    weighted_sum(tape, &y, &r)
                }),
            )
        }
        "linear" => {
            let (n, f, o) = (range(rng, 1, 3), range(rng, 1, 5), range(rng, 1, 4));
            let x = uniform(&[n, f], rng);
            let wt = uniform(&[o, f], rng);
            let b = uniform(&[o], rng);
            let r = uniform(&[n, o], rng);
            (
                alloc::vec![x, wt, b],
                alloc::boxed::Box::new(move |tape: &mut Tape<f64>, v: &[Var<f64>]| {
                    let y = tape.linear(&v[0], &v[1], Some(&v[2]))?;
                    weighted_sum(tape, &y, &r)
                }),
            )
        }
        "softmax_ce" => {
            let (b, k) = (range(rng, 1, 4), range(rng, 2, 5));
            let x = Tensor::from_fn([b, k], |_| rng.uniform_range(-3.0, 3.0));
            let targets: Vec<usize> = (0..b).map(|_| rng.below(k)).collect();
            let weights: Vec<f64> = (0..k).map(|_| rng.uniform_range(0.2, 3.0)).collect();
            let r = uniform(&[b, k], rng);
            (
                alloc::vec![x],
                alloc::boxed::Box::new(move |tape: &mut Tape<f64>, v: &[Var<f64>]| {
                    let ce = tape.weighted_cross_entropy(&v[0], &targets, &weights)?;
                    let p = tape.softmax(&v[0])?;
                    let s = weighted_sum(tape, &p, &r)?;
                    tape.add(&ce, &s)
                }),
            )
        }
        "temporal_block" => {
            let spec = TemporalBlockSpec {
                in_channels: range(rng, 1, 3),
                out_channels: range(rng, 1, 3),
                kernel: range(rng, 1, 3),
                dilation: 1 << rng.below(3),
                dropout: 0.25,
            };
            let (n, len) = (range(rng, 1, 2), range(rng, 3, 8));
            let mut store = ParamStore::new();
            init_temporal_block(&mut store, "b", &spec, rng)?;
            randomize(&mut store, rng);
            let x = uniform(&[n, spec.in_channels, len], rng);
            let r = uniform(&[n, spec.out_channels, len], rng);
            let mask_seed = rng.below(1 << 30) as u64;
            block_case(store, x, move |ctx, x| {
                let y = temporal_block(ctx, x, &spec, "b")?;
                let y = weighted_sum(ctx.tape, &y, &r)?;
                Ok(y)
            }, mask_seed)?
        }
        "basic_block2d" => {
            // a 1x1 projection from one channel feeds batch norm a single
            // scaled copy of x, which batch norm cancels: its weight has a
            // gradient of order epsilon only, below what differences resolve
            let (ci, co, stride) = (range(rng, 2, 3), range(rng, 1, 3), range(rng, 1, 2));
            let (h, w) = (range(rng, 3, 5), range(rng, 3, 5));
            let mut store = ParamStore::new();
            init_basic_block(&mut store, "l", ci, co, stride, rng)?;
            randomize(&mut store, rng);
            let x = uniform(&[2, ci, h, w], rng);
            let out = [2, co, (h - 1) / stride + 1, (w - 1) / stride + 1];
            let r = uniform(&out, rng);
            block_case(store, x, move |ctx, x| {
                let y = basic_block2d(ctx, x, "l", stride)?;
                weighted_sum(ctx.tape, &y, &r)
            }, 0)?
        }
        other => return Err(Error::param("op", format!("`{other}` is not in the gradient suite"))),
    };
    Ok(case)
}

/// Non-degenerate parameters: He draws are fine for weights, but zero
/// biases and unit gains would hide their gradients' structure.
fn randomize(store: &mut ParamStore<f64>, rng: &mut SeededRng) {
    let names: Vec<String> = store.trainable_names();
    for name in names {
        if let Some(t) = store.get_mut(&name) {
            if name.ends_with(".bias") || name.ends_with("bn1.weight") || name.ends_with("bn2.weight") {
                let base = if name.ends_with(".weight") { 1.0 } else { 0.0 };
                for v in t.data_mut() {
                    *v = base + rng.uniform_range(-0.5, 0.5);
                }
            }
        }
    }
}

/// Differentiates a block with respect to its input and every trainable
/// parameter. Dropout masks are reproduced on every call from `mask_seed`.
fn block_case<F>(store: ParamStore<f64>, x: Tensor<f64>, mut body: F, mask_seed: u64) -> Result<Case>
where
    F: FnMut(&mut Forward<'_, f64>, &Var<f64>) -> Result<Var<f64>> + 'static,
{
    let names = store.trainable_names();
    let mut inputs = alloc::vec![x];
    inputs.extend(names.iter().filter_map(|n| store.get(n).cloned()));
    Ok((
        inputs,
        alloc::boxed::Box::new(move |tape: &mut Tape<f64>, v: &[Var<f64>]| {
            let mut local = store.clone();
            let mut rng = SeededRng::new(mask_seed);
            let mut ctx = Forward::new(tape, &mut local, Mode::Train, &mut rng);
            for (name, var) in names.iter().zip(&v[1..]) {
                ctx.bind(name, var.clone());
            }
            body(&mut ctx, &v[0])
        }),
    ))
}

/// Checks `op` on `cases` random draws and returns the worst error.
pub fn check_op(op: &'static str, cases: usize, seed: u64, eps: f64) -> Result<OpReport> {
    let index = SUITE_OPS
        .iter()
        .position(|&o| o == op)
        .ok_or_else(|| Error::param("op", format!("`{op}` is not in the gradient suite")))?;
    let mut report = OpReport { op, cases: 0, coordinates: 0, max_rel_error: 0.0, redraws: 0, worst: None };
    let mut stream = (index as u64) << 32;
    while report.cases < cases {
        if report.redraws > MAX_DRAWS * cases.max(1) {
            return Err(Error::Contract(format!("{op}: no draw clears the kink margin")));
        }
        stream += 1;
        let mut rng = SeededRng::with_stream(seed, stream);
        let (inputs, mut f) = draw(op, &mut rng)?;
        let mut probe = Tape::new();
        let leaves: Vec<Var<f64>> = inputs.iter().map(|t| probe.leaf(t.clone())).collect();
        f(&mut probe, &leaves)?;
        if probe.kink_margin() < KINK_MARGIN {
            report.redraws += 1;
            continue;
        }
        let r = gradcheck(&mut f, &inputs, eps)?;
        if r.max_rel_error >= report.max_rel_error {
            if let Some((i, j)) = r.worst {
                report.worst = Some((report.cases, i, j, r.worst_values.0, r.worst_values.1));
            }
            report.max_rel_error = r.max_rel_error;
        }
        report.cases += 1;
        report.coordinates += r.coordinates;
    }
    Ok(report)
}

/// The whole suite.
pub fn gradient_suite(cases: usize, seed: u64, eps: f64) -> Result<Vec<OpReport>> {
    SUITE_OPS.iter().map(|&op| check_op(op, cases, seed, eps)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_op_passes_a_few_cases() {
        for r in gradient_suite(3, 7, 1e-5).unwrap() {
            assert!(r.max_rel_error < 1e-4, "{r:?}");
            assert!(r.coordinates > 0);
        }
    }

    #[test]
    fn unknown_op_rejected() {
        assert!(check_op("lstm", 1, 0, 1e-5).is_err());
    }
}

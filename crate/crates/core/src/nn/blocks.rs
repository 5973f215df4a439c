//! The two residual building blocks: the ResNet basic block and the dilated
//! causal temporal block.

use alloc::format;

use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::nn::layers::{init_batch_norm, init_causal_conv1d, init_conv2d, Forward};
use crate::nn::params::ParamStore;
use crate::rng::SeededRng;
use crate::tensor::Scalar;

/// Registers the parameters of a basic block under `prefix`.
pub fn init_basic_block<T: Scalar>(
    store: &mut ParamStore<T>,
    prefix: &str,
    in_channels: usize,
    out_channels: usize,
    stride: usize,
    rng: &mut SeededRng,
) -> Result<()> {
    init_conv2d(store, &format!("{prefix}.conv1"), in_channels, out_channels, 3, false, rng)?;
    init_batch_norm(store, &format!("{prefix}.bn1"), out_channels)?;
    init_conv2d(store, &format!("{prefix}.conv2"), out_channels, out_channels, 3, false, rng)?;
    init_batch_norm(store, &format!("{prefix}.bn2"), out_channels)?;
    if stride != 1 || in_channels != out_channels {
        init_conv2d(store, &format!("{prefix}.downsample.0"), in_channels, out_channels, 1, false, rng)?;
        init_batch_norm(store, &format!("{prefix}.downsample.1"), out_channels)?;
    }
    Ok(())
}

/// Trainable parameter count of a basic block.
pub fn basic_block_param_count(in_channels: usize, out_channels: usize, stride: usize) -> usize {
    let mut n = in_channels * out_channels * 9 + out_channels * out_channels * 9 + 4 * out_channels;
    if stride != 1 || in_channels != out_channels {
        n += in_channels * out_channels + 2 * out_channels;
    }
    n
}

/// `relu(bn2(conv2(relu(bn1(conv1(x))))) + shortcut(x))`.
pub fn basic_block2d<T: Scalar>(ctx: &mut Forward<'_, T>, x: &Var<T>, prefix: &str, stride: usize) -> Result<Var<T>> {
    let conv1 = format!("{prefix}.conv1.weight");
    let out_channels = *ctx
        .shape_of(&conv1)?
        .first()
        .ok_or_else(|| Error::Config(format!("`{conv1}` has no extents")))?;
    let in_channels = x.shape().get(1).copied().unwrap_or(0);
    let projected = ctx.has(&format!("{prefix}.downsample.0.weight"));
    if (stride != 1 || in_channels != out_channels) && !projected {
        return Err(Error::Config(format!(
            "block `{prefix}` maps {in_channels} channels at stride {stride} to {out_channels} but has no projection shortcut"
        )));
    }

    let h = ctx.conv2d(x, &format!("{prefix}.conv1"), stride, 1)?;
    let h = ctx.batch_norm(&h, &format!("{prefix}.bn1"))?;
    let h = ctx.relu(&h);
    let h = ctx.conv2d(&h, &format!("{prefix}.conv2"), 1, 1)?;
    let h = ctx.batch_norm(&h, &format!("{prefix}.bn2"))?;

    let shortcut = if projected {
        let s = ctx.conv2d(x, &format!("{prefix}.downsample.0"), stride, 0)?;
        ctx.batch_norm(&s, &format!("{prefix}.downsample.1"))?
    } else {
        x.clone()
    };
    let y = ctx.tape.add(&h, &shortcut)?;
    Ok(ctx.relu(&y))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalBlockSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub dropout: f64,
}

impl TemporalBlockSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 {
            return Err(Error::param("kernel", "must be at least 1"));
        }
        if self.dilation == 0 {
            return Err(Error::param("dilation", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::param("dropout", format!("{} is outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    pub fn needs_downsample(&self) -> bool {
        self.in_channels != self.out_channels
    }

    /// Trainable parameter count.
    pub fn param_count(&self) -> usize {
        let (i, o, k) = (self.in_channels, self.out_channels, self.kernel);
        let mut n = i * o * k + o + o * o * k + o;
        if self.needs_downsample() {
            n += i * o + o;
        }
        n
    }

    /// How many trailing steps can influence one output step.
    pub fn receptive_field(&self) -> usize {
        1 + 2 * (self.kernel - 1) * self.dilation
    }
}

pub fn init_temporal_block<T: Scalar>(
    store: &mut ParamStore<T>,
    prefix: &str,
    spec: &TemporalBlockSpec,
    rng: &mut SeededRng,
) -> Result<()> {
    spec.validate()?;
    init_causal_conv1d(store, &format!("{prefix}.conv1"), spec.in_channels, spec.out_channels, spec.kernel, rng)?;
    init_causal_conv1d(store, &format!("{prefix}.conv2"), spec.out_channels, spec.out_channels, spec.kernel, rng)?;
    if spec.needs_downsample() {
        init_causal_conv1d(store, &format!("{prefix}.downsample"), spec.in_channels, spec.out_channels, 1, rng)?;
    }
    Ok(())
}

/// `relu(dropout(relu(conv2(dropout(relu(conv1(x)))))) + match(x))` with
/// both convolutions causal at the block dilation.
pub fn temporal_block<T: Scalar>(
    ctx: &mut Forward<'_, T>,
    x: &Var<T>,
    spec: &TemporalBlockSpec,
    prefix: &str,
) -> Result<Var<T>> {
    spec.validate()?;
    let in_channels = x.shape().get(1).copied().unwrap_or(0);
    if in_channels != spec.in_channels {
        return Err(Error::dim("temporal_block", "channels", spec.in_channels, in_channels));
    }
    let projected = ctx.has(&format!("{prefix}.downsample.weight"));
    if spec.needs_downsample() && !projected {
        return Err(Error::Config(format!(
            "block `{prefix}` maps {} channels to {} but has no downsample convolution",
            spec.in_channels, spec.out_channels
        )));
    }

    let h = ctx.causal_conv1d(x, &format!("{prefix}.conv1"), spec.dilation)?;
    let h = ctx.relu(&h);
    let h = ctx.dropout(&h, spec.dropout)?;
    let h = ctx.causal_conv1d(&h, &format!("{prefix}.conv2"), spec.dilation)?;
    let h = ctx.relu(&h);
    let h = ctx.dropout(&h, spec.dropout)?;

    let residual = if projected {
        ctx.causal_conv1d(x, &format!("{prefix}.downsample"), 1)?
    } else {
        x.clone()
    };
    let y = ctx.tape.add(&h, &residual)?;
    Ok(ctx.relu(&y))
}

//! Forward-pass context and the parameterized layers built on it.
//!
//! Parameters are looked up by dotted name in a [`ParamStore`]. Tensor names
//! follow the torchvision ResNet convention (`conv1.weight`, `bn1.bias`,
//! `downsample.0.weight`, ...) so converted checkpoints map one-to-one.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::nn::init::he_init;
use crate::nn::params::{ParamKind, ParamStore};
use crate::ops::BatchNormOptions;
use crate::rng::SeededRng;
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Everything one forward pass needs: the tape, the parameters, the mode and
/// the generator that drives dropout masks.
pub struct Forward<'a, T: Scalar> {
    pub tape: &'a mut Tape<T>,
    store: &'a mut ParamStore<T>,
    bound: BTreeMap<String, Var<T>>,
    mode: Mode,
    rng: &'a mut SeededRng,
    bn: BatchNormOptions,
}

impl<'a, T: Scalar> Forward<'a, T> {
    pub fn new(tape: &'a mut Tape<T>, store: &'a mut ParamStore<T>, mode: Mode, rng: &'a mut SeededRng) -> Self {
        Forward {
            tape,
            store,
            bound: BTreeMap::new(),
            mode,
            rng,
            bn: BatchNormOptions::default(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn training(&self) -> bool {
        self.mode == Mode::Train
    }

    pub fn has(&self, name: &str) -> bool {
        self.store.contains(name)
    }

    pub fn shape_of(&self, name: &str) -> Result<&[usize]> {
        self.store
            .get(name)
            .map(|t| t.shape())
            .ok_or_else(|| Error::Config(format!("missing parameter `{name}`")))
    }

    /// Uses `var` for parameter `name` in this pass instead of registering a
    /// fresh leaf, so callers can differentiate with respect to their own
    /// variables.
    pub fn bind(&mut self, name: &str, var: Var<T>) {
        self.bound.insert(name.to_string(), var);
    }

    /// The variable for a trainable parameter, registered on the tape once
    /// per pass.
    pub fn param(&mut self, name: &str) -> Result<Var<T>> {
        if let Some(v) = self.bound.get(name) {
            return Ok(v.clone());
        }
        let value = self
            .store
            .shared(name)
            .cloned()
            .ok_or_else(|| Error::Config(format!("missing parameter `{name}`")))?;
        let var = match self.store.kind(name) {
            Some(ParamKind::Trainable) => self.tape.leaf(value),
            _ => Var::constant(value),
        };
        self.bound.insert(name.to_string(), var.clone());
        Ok(var)
    }

    fn buffer(&self, name: &str) -> Result<Arc<Tensor<T>>> {
        self.store
            .shared(name)
            .cloned()
            .ok_or_else(|| Error::Config(format!("missing buffer `{name}`")))
    }

    pub fn rng(&mut self) -> &mut SeededRng {
        self.rng
    }

    /// Parameter variables used during the pass, by name.
    pub fn into_bindings(self) -> BTreeMap<String, Var<T>> {
        self.bound
    }

    pub fn conv2d(&mut self, x: &Var<T>, prefix: &str, stride: usize, padding: usize) -> Result<Var<T>> {
        let w = self.param(&format!("{prefix}.weight"))?;
        let bias_name = format!("{prefix}.bias");
        let b = if self.has(&bias_name) { Some(self.param(&bias_name)?) } else { None };
        self.tape.conv2d(x, &w, b.as_ref(), stride, padding)
    }

    pub fn causal_conv1d(&mut self, x: &Var<T>, prefix: &str, dilation: usize) -> Result<Var<T>> {
        let w = self.param(&format!("{prefix}.weight"))?;
        let bias_name = format!("{prefix}.bias");
        let b = if self.has(&bias_name) { Some(self.param(&bias_name)?) } else { None };
        self.tape.causal_conv1d(x, &w, b.as_ref(), dilation)
    }

    pub fn linear(&mut self, x: &Var<T>, prefix: &str) -> Result<Var<T>> {
        let w = self.param(&format!("{prefix}.weight"))?;
        let bias_name = format!("{prefix}.bias");
        let b = if self.has(&bias_name) { Some(self.param(&bias_name)?) } else { None };
        self.tape.linear(x, &w, b.as_ref())
    }

    /// Batch norm; in training mode also advances the running buffers.
    pub fn batch_norm(&mut self, x: &Var<T>, prefix: &str) -> Result<Var<T>> {
        let gamma = self.param(&format!("{prefix}.weight"))?;
        let beta = self.param(&format!("{prefix}.bias"))?;
        let mean_name = format!("{prefix}.running_mean");
        let var_name = format!("{prefix}.running_var");
        let rm = self.buffer(&mean_name)?;
        let rv = self.buffer(&var_name)?;
        let opts = BatchNormOptions {
            training: self.training(),
            ..self.bn
        };
        let (y, stats) = self.tape.batch_norm2d(x, &gamma, &beta, &rm, &rv, opts)?;
        drop((rm, rv));
        if let Some(stats) = stats {
            let mut mean = self.buffer(&mean_name)?.as_ref().clone();
            let mut var = self.buffer(&var_name)?.as_ref().clone();
            stats.update_running(&mut mean, &mut var, self.bn.momentum);
            self.store.set(&mean_name, mean)?;
            self.store.set(&var_name, var)?;
        }
        Ok(y)
    }

    pub fn relu(&mut self, x: &Var<T>) -> Var<T> {
        self.tape.relu(x)
    }

    pub fn dropout(&mut self, x: &Var<T>, p: f64) -> Result<Var<T>> {
        let training = self.training();
        self.tape.dropout(x, p, self.rng, training)
    }
}

pub fn init_conv2d<T: Scalar>(
    store: &mut ParamStore<T>,
    prefix: &str,
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    bias: bool,
    rng: &mut SeededRng,
) -> Result<()> {
    let fan_in = in_channels * kernel * kernel;
    let w = he_init(&[out_channels, in_channels, kernel, kernel], fan_in, rng)?;
    store.insert(format!("{prefix}.weight"), ParamKind::Trainable, w)?;
    if bias {
        store.insert(format!("{prefix}.bias"), ParamKind::Trainable, Tensor::zeros([out_channels]))?;
    }
    Ok(())
}

pub fn init_causal_conv1d<T: Scalar>(
    store: &mut ParamStore<T>,
    prefix: &str,
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    rng: &mut SeededRng,
) -> Result<()> {
    let w = he_init(&[out_channels, in_channels, kernel], in_channels * kernel, rng)?;
    store.insert(format!("{prefix}.weight"), ParamKind::Trainable, w)?;
    store.insert(format!("{prefix}.bias"), ParamKind::Trainable, Tensor::zeros([out_channels]))
}

pub fn init_batch_norm<T: Scalar>(store: &mut ParamStore<T>, prefix: &str, channels: usize) -> Result<()> {
    store.insert(format!("{prefix}.weight"), ParamKind::Trainable, Tensor::ones([channels]))?;
    store.insert(format!("{prefix}.bias"), ParamKind::Trainable, Tensor::zeros([channels]))?;
    store.insert(format!("{prefix}.running_mean"), ParamKind::Buffer, Tensor::zeros([channels]))?;
    store.insert(format!("{prefix}.running_var"), ParamKind::Buffer, Tensor::ones([channels]))
}

pub fn init_linear<T: Scalar>(
    store: &mut ParamStore<T>,
    prefix: &str,
    in_features: usize,
    out_features: usize,
    rng: &mut SeededRng,
) -> Result<()> {
    let w = he_init(&[out_features, in_features], in_features, rng)?;
    store.insert(format!("{prefix}.weight"), ParamKind::Trainable, w)?;
    store.insert(format!("{prefix}.bias"), ParamKind::Trainable, Tensor::zeros([out_features]))
}

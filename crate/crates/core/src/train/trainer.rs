//! The epoch loop over a clip source.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::autograd::Tape;
use crate::data::{stratified_batches, uniform_batches};
use crate::error::{Error, Result};
use crate::model::{argmax, EngagementModel};
use crate::nn::Mode;
use crate::rng::SeededRng;
use crate::tensor::{Scalar, Tensor};
use crate::train::metrics::ConfusionMatrix;
use crate::train::sgd::Sgd;

/// Labelled clips, loaded on demand and already preprocessed to the model's
/// `[L, C, H, W]` extents.
pub trait ClipSource<T: Scalar> {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn label(&self, index: usize) -> usize;

    fn load(&mut self, index: usize) -> Result<Tensor<T>>;

    fn labels(&self) -> Vec<usize> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }
}

/// Clips held in memory.
#[derive(Debug, Clone)]
pub struct MemorySource<T: Scalar> {
    pub clips: Vec<Tensor<T>>,
    pub labels: Vec<usize>,
}

impl<T: Scalar> ClipSource<T> for MemorySource<T> {
    fn len(&self) -> usize {
        self.clips.len()
    }

    fn label(&self, index: usize) -> usize {
        self.labels[index]
    }

    fn load(&mut self, index: usize) -> Result<Tensor<T>> {
        self.clips
            .get(index)
            .cloned()
            .ok_or(Error::Index { what: "clip", index, bound: self.clips.len() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Uniform,
    Stratified,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Uniform => "uniform",
            SamplerKind::Stratified => "stratified",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uniform" => Some(SamplerKind::Uniform),
            "stratified" => Some(SamplerKind::Stratified),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub sampler: SamplerKind,
    pub seed: u64,
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            momentum: 0.0,
            batch_size: 5,
            epochs: 1,
            sampler: SamplerKind::Uniform,
            seed: 0,
            deterministic: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr {} must be positive", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} is outside [0, 1)", self.momentum)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.sampler == SamplerKind::Stratified && self.batch_size < num_classes {
            return Err(Error::Config(format!(
                "stratified batches of {} cannot hold {num_classes} classes",
                self.batch_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Mean batch loss.
    pub loss: f64,
    /// Fraction of training samples classified correctly during the epoch.
    pub train_acc: f64,
}

/// Owns the model, optimizer and generator of one training run.
#[derive(Debug, Clone)]
pub struct Trainer<T: Scalar> {
    pub model: EngagementModel<T>,
    pub sgd: Sgd<T>,
    pub rng: SeededRng,
    /// Completed epochs.
    pub epoch: usize,
    pub config: TrainConfig,
    pub weights: Vec<f64>,
}

impl<T: Scalar> Trainer<T> {
    /// `weights` are per-class loss weights; `None` means unit weights.
    pub fn new(model: EngagementModel<T>, config: TrainConfig, weights: Option<Vec<f64>>) -> Result<Self> {
        let k = model.config.num_classes;
        config.validate(k)?;
        let weights = weights.unwrap_or_else(|| vec![1.0; k]);
        if weights.len() != k {
            return Err(Error::dim("Trainer", "class weights", k, weights.len()));
        }
        Ok(Trainer {
            sgd: Sgd::new(config.lr, config.momentum)?,
            rng: SeededRng::with_stream(config.seed, 1),
            model,
            epoch: 0,
            config,
            weights,
        })
    }

    pub fn batches(&mut self, labels: &[usize]) -> Result<Vec<Vec<usize>>> {
        match self.config.sampler {
            SamplerKind::Uniform => uniform_batches(labels.len(), self.config.batch_size, &mut self.rng),
            SamplerKind::Stratified => stratified_batches(labels, self.config.batch_size, &mut self.rng),
        }
    }

    /// One optimizer step on the given clips. Returns the loss and the number
    /// of correct train-mode predictions.
    pub fn step(&mut self, clips: &[Tensor<T>], labels: &[usize]) -> Result<(f64, usize)> {
        let batch = Tensor::stack(clips)?;
        self.model.set_mode(Mode::Train);
        let mut tape = Tape::new();
        let pass = self.model.forward(&mut tape, &batch, &mut self.rng)?;
        let loss = tape.weighted_cross_entropy(&pass.logits, labels, &self.weights)?;
        let value = loss.value().item()?.as_f64();
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("loss {value}")));
        }
        let k = self.model.config.num_classes;
        let correct = pass
            .logits
            .value()
            .data()
            .chunks_exact(k)
            .zip(labels)
            .filter(|(row, &y)| argmax(row) == y)
            .count();
        let grads = tape.backward(&loss)?;
        let mut by_name: BTreeMap<String, Tensor<T>> = BTreeMap::new();
        for (name, var) in &pass.params {
            if var.is_tracked() {
                by_name.insert(name.clone(), grads.get_or_zeros(var));
            }
        }
        drop(pass);
        self.sgd.step(&mut self.model.params, &by_name)?;
        self.model.set_mode(Mode::Eval);
        Ok((value, correct))
    }

    /// One pass over `source` in sampler order.
    pub fn run_epoch(&mut self, source: &mut dyn ClipSource<T>) -> Result<EpochStats> {
        if source.is_empty() {
            return Err(Error::Source("training set is empty".into()));
        }
        let labels = source.labels();
        let batches = self.batches(&labels)?;
        let epoch = self.epoch + 1;
        let (mut loss_sum, mut correct, mut seen) = (0.0, 0, 0);
        for (b, idx) in batches.iter().enumerate() {
            let clips = idx.iter().map(|&i| source.load(i)).collect::<Result<Vec<_>>>()?;
            let targets: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let (loss, ok) = self.step(&clips, &targets).map_err(|e| match e {
                Error::NonFinite(what) => Error::NonFinite(format!("{what} at epoch {epoch}, batch {b}")),
                other => other,
            })?;
            loss_sum += loss;
            correct += ok;
            seen += idx.len();
        }
        self.epoch = epoch;
        Ok(EpochStats {
            epoch,
            loss: loss_sum / batches.len() as f64,
            train_acc: correct as f64 / seen as f64,
        })
    }
}

/// Eval-mode predictions for every clip, one clip at a time.
pub fn evaluate<T: Scalar>(model: &mut EngagementModel<T>, source: &mut dyn ClipSource<T>) -> Result<ConfusionMatrix> {
    let previous = model.mode();
    model.set_mode(Mode::Eval);
    let mut m = ConfusionMatrix::new(model.config.num_classes);
    let result = (0..source.len()).try_for_each(|i| {
        let clip = source.load(i)?;
        let pred = model.predict(&clip)?;
        m.record(source.label(i), pred)
    });
    model.set_mode(previous);
    result.map(|_| m)
}

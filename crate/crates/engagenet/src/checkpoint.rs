//! Training snapshots.
//!
//! Layout (little-endian): `ENGK`, u8 version, u8 dtype code, u32 length +
//! UTF-8 `key=value` block (run configuration and class weights), u64
//! completed epochs, generator state (32-byte key, u64 stream, u128 word
//! position), u32 parameter count then per parameter u16 name length, name,
//! u8 flag (1 trainable, 0 buffer) and a TNSR record, then u32 momentum
//! buffer count and per buffer u16 name length, name and a TNSR record.

use std::path::Path;

use engagenet_core::model::EngagementModel;
use engagenet_core::nn::{ParamKind, ParamStore};
use engagenet_core::train::{Sgd, Trainer};
use engagenet_core::{RngState, Scalar, SeededRng, Tensor};

use crate::bytes::Reader;
use crate::error::{read_file, write_file, Result};
use crate::experiment::ExperimentConfig;
use crate::{kv, tnsr};

pub const MAGIC: &[u8; 4] = b"ENGK";
pub const VERSION: u8 = 1;
const WEIGHTS_KEY: &str = "class_weights.values";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T: Scalar> {
    pub experiment: ExperimentConfig,
    /// Per-class loss weights in use.
    pub weights: Vec<f64>,
    pub epoch: usize,
    pub rng: RngState,
    pub params: ParamStore<T>,
    pub velocity: Vec<(String, Tensor<T>)>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn from_trainer(trainer: &Trainer<T>, experiment: &ExperimentConfig) -> Self {
        let mut experiment = experiment.clone();
        experiment.model = trainer.model.config.clone();
        experiment.train = trainer.config.clone();
        Checkpoint {
            experiment,
            weights: trainer.weights.clone(),
            epoch: trainer.epoch,
            rng: trainer.rng.state(),
            params: trainer.model.params.clone(),
            velocity: trainer.sgd.velocity().to_vec(),
        }
    }

    pub fn into_trainer(self) -> Result<Trainer<T>> {
        let model = EngagementModel::from_params(self.experiment.model.clone(), self.params)?;
        let mut trainer = Trainer::new(model, self.experiment.train.clone(), Some(self.weights))?;
        let mut sgd = Sgd::new(trainer.config.lr, trainer.config.momentum)?;
        sgd.set_velocity(self.velocity);
        trainer.sgd = sgd;
        trainer.rng = SeededRng::from_state(&self.rng);
        trainer.epoch = self.epoch;
        Ok(trainer)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(T::DTYPE.code());
        let mut pairs = self.experiment.to_pairs();
        pairs.push((
            WEIGHTS_KEY.to_string(),
            self.weights.iter().map(|w| format!("{w}")).collect::<Vec<_>>().join(","),
        ));
        let text = kv::render(&pairs);
        out.extend_from_slice(&(text.len() as u32).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
        out.extend_from_slice(&(self.epoch as u64).to_le_bytes());
        out.extend_from_slice(&self.rng.seed);
        out.extend_from_slice(&self.rng.stream.to_le_bytes());
        out.extend_from_slice(&self.rng.word_pos.to_le_bytes());
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (name, kind, t) in self.params.iter() {
            put_name(&mut out, name);
            out.push(kind.flag());
            tnsr::encode(t, &mut out);
        }
        out.extend_from_slice(&(self.velocity.len() as u32).to_le_bytes());
        for (name, t) in &self.velocity {
            put_name(&mut out, name);
            tnsr::encode(t, &mut out);
        }
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader::new(bytes, path);
        r.magic(MAGIC)?;
        let at = r.offset();
        let version = r.u8("version")?;
        if version != VERSION {
            return Err(r.fail(at, format!("unsupported checkpoint version {version}")));
        }
        let at = r.offset();
        let code = r.u8("dtype")?;
        if code != T::DTYPE.code() {
            return Err(r.fail(at, format!("checkpoint dtype code {code}, expected {}", T::DTYPE.code())));
        }
        let len = r.u32("config length")? as usize;
        let at = r.offset();
        let text = r.string(len, "config block")?;
        let mut pairs = kv::parse(&text, path)?;
        let weights_at = pairs.iter().position(|(k, _)| k == WEIGHTS_KEY);
        let weights: Vec<f64> = match weights_at.map(|i| pairs.remove(i)) {
            Some((_, v)) => v
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|_| r.fail(at, format!("bad class weight `{s}`"))))
                .collect::<Result<_>>()?,
            None => return Err(r.fail(at, "config block has no class weights")),
        };
        let experiment = ExperimentConfig::from_pairs(ExperimentConfig::preset("desk")?, &pairs)
            .map_err(|e| r.fail(at, format!("config block: {e}")))?;
        let epoch = r.u64("epoch")? as usize;
        let seed: [u8; 32] = r.take(32, "rng key")?.try_into().expect("32 bytes");
        let stream = r.u64("rng stream")?;
        let word_pos = r.u128("rng position")?;
        let count = r.u32("parameter count")?;
        let mut params = ParamStore::new();
        for _ in 0..count {
            let name = get_name(&mut r)?;
            let at = r.offset();
            let flag = r.u8("flag")?;
            let kind = ParamKind::from_flag(flag).ok_or_else(|| r.fail(at, format!("bad flag {flag}")))?;
            let t = read_tensor::<T>(&mut r)?;
            params.insert(name, kind, t).map_err(|e| r.fail(at, e.to_string()))?;
        }
        let count = r.u32("momentum count")?;
        let mut velocity = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let name = get_name(&mut r)?;
            velocity.push((name, read_tensor::<T>(&mut r)?));
        }
        r.finish()?;
        Ok(Checkpoint {
            experiment,
            weights,
            epoch,
            rng: RngState { seed, stream, word_pos },
            params,
            velocity,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.encode())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&read_file(path)?, path)
    }
}

fn put_name(out: &mut Vec<u8>, name: &str) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
}

fn get_name(r: &mut Reader<'_>) -> Result<String> {
    let len = r.u16("name length")? as usize;
    r.string(len, "name")
}

fn read_tensor<T: Scalar>(r: &mut Reader<'_>) -> Result<Tensor<T>> {
    let at = r.offset();
    let t = tnsr::decode(r)?;
    if t.dtype() != T::DTYPE {
        return Err(r.fail(at, format!("tensor dtype {} in a {} checkpoint", t.dtype().name(), T::DTYPE.name())));
    }
    Ok(t.into_tensor())
}

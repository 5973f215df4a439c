//! Everything a run needs besides data paths, as flat `key=value` pairs.

use std::path::Path;

use engagenet_core::data::Normalization;
use engagenet_core::model::ModelConfig;
use engagenet_core::train::{SamplerKind, TrainConfig};

use crate::error::{Error, Result};
use crate::kv;

/// Which splits the class weights are counted over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightSource {
    None,
    Train,
    TrainVal,
}

impl WeightSource {
    pub fn name(self) -> &'static str {
        match self {
            WeightSource::None => "none",
            WeightSource::Train => "train",
            WeightSource::TrainVal => "train+val",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(WeightSource::None),
            "train" => Some(WeightSource::Train),
            "train+val" => Some(WeightSource::TrainVal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: String,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub class_weights: WeightSource,
    pub normalization: Normalization,
}

impl ExperimentConfig {
    /// `paper`: ResNet18+TCN on 50×3×224×224, lr 0.001, batch 5, plain SGD.
    /// `desk`: the small model, trained with lr 0.01 and momentum 0.9.
    pub fn preset(name: &str) -> Result<Self> {
        let model = ModelConfig::preset(name).ok_or_else(|| Error::Usage(format!("unknown preset `{name}` (desk, paper)")))?;
        let train = match name {
            "paper" => TrainConfig { lr: 0.001, momentum: 0.0, epochs: 10, ..TrainConfig::default() },
            _ => TrainConfig { lr: 0.01, momentum: 0.9, epochs: 30, ..TrainConfig::default() },
        };
        let train = TrainConfig { batch_size: 5, deterministic: false, ..train };
        Ok(ExperimentConfig {
            preset: name.to_string(),
            model,
            train,
            class_weights: WeightSource::None,
            normalization: Normalization::default(),
        })
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        let t = &self.train;
        let mut out = vec![("preset".to_string(), self.preset.clone())];
        out.extend(self.model.to_pairs());
        out.extend(
            [
                ("train.lr", format!("{}", t.lr)),
                ("train.momentum", format!("{}", t.momentum)),
                ("train.batch_size", t.batch_size.to_string()),
                ("train.epochs", t.epochs.to_string()),
                ("train.sampler", t.sampler.name().to_string()),
                ("train.seed", t.seed.to_string()),
                ("train.deterministic", t.deterministic.to_string()),
                ("train.class_weights", self.class_weights.name().to_string()),
                ("data.mean", list(&self.normalization.mean)),
                ("data.std", list(&self.normalization.std)),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v)),
        );
        out
    }

    /// Sets one key. Unknown keys are a usage error.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        if self.model.apply(key, value)? {
            return Ok(());
        }
        let bad = || Error::Usage(format!("invalid value `{value}` for `{key}`"));
        let float = || value.parse::<f64>().map_err(|_| bad());
        let floats = || -> Result<Vec<f64>> { value.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect() };
        let t = &mut self.train;
        match key {
            "preset" => {
                let p = ExperimentConfig::preset(value)?;
                *self = p;
            }
            "train.lr" => t.lr = float()?,
            "train.momentum" => t.momentum = float()?,
            "train.batch_size" => t.batch_size = value.parse().map_err(|_| bad())?,
            "train.epochs" => t.epochs = value.parse().map_err(|_| bad())?,
            "train.sampler" => t.sampler = SamplerKind::parse(value).ok_or_else(bad)?,
            "train.seed" => t.seed = value.parse().map_err(|_| bad())?,
            "train.deterministic" => t.deterministic = value.parse().map_err(|_| bad())?,
            "train.class_weights" => self.class_weights = WeightSource::parse(value).ok_or_else(bad)?,
            "data.mean" => self.normalization.mean = floats()?,
            "data.std" => self.normalization.std = floats()?,
            _ => return Err(Error::Usage(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Starts from `base` (or the preset named in the pairs, which must then
    /// come first) and applies every pair in order.
    pub fn from_pairs(base: ExperimentConfig, pairs: &[(String, String)]) -> Result<Self> {
        let mut c = base;
        for (k, v) in pairs {
            c.apply(k, v)?;
        }
        Ok(c)
    }

    pub fn read(path: &Path, base: ExperimentConfig) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_pairs(base, &kv::parse(&text, path)?)
    }

    pub fn render(&self) -> String {
        kv::render(&self.to_pairs())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate(self.model.num_classes)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_text() {
        for name in ["desk", "paper"] {
            let mut c = ExperimentConfig::preset(name).unwrap();
            c.train.seed = 99;
            c.train.lr = 0.0123;
            c.class_weights = WeightSource::TrainVal;
            c.normalization.mean = vec![0.4, 0.5, 0.6];
            let text = c.render();
            let back = ExperimentConfig::from_pairs(ExperimentConfig::preset("desk").unwrap(), &kv::parse(&text, Path::new("c")).unwrap()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn presets_expand() {
        let p = ExperimentConfig::preset("paper").unwrap();
        assert_eq!((p.model.clip_len, p.model.frame_height, p.train.lr, p.train.batch_size), (50, 224, 0.001, 5));
        assert_eq!((p.model.tcn.levels, p.model.tcn.hidden, p.model.tcn.kernel, p.model.tcn.dropout), (8, 128, 7, 0.25));
        assert!(ExperimentConfig::preset("huge").is_err());
    }

    #[test]
    fn unknown_key_is_usage_error() {
        let mut c = ExperimentConfig::preset("desk").unwrap();
        let e = c.apply("train.warmup", "3").unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }
}

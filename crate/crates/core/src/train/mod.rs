//! Loss, optimizer, metrics and the training loop.

pub mod loss;
pub mod metrics;
pub mod sgd;
pub mod trainer;

pub use metrics::ConfusionMatrix;
pub use sgd::Sgd;
pub use trainer::{evaluate, ClipSource, EpochStats, MemorySource, SamplerKind, TrainConfig, Trainer};

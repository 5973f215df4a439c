//! Parameter registry, initialization, layers and the two residual blocks.

pub mod blocks;
pub mod init;
pub mod layers;
pub mod params;

pub use blocks::{basic_block2d, basic_block_param_count, init_basic_block, init_temporal_block, temporal_block, TemporalBlockSpec};
pub use init::he_init;
pub use layers::{Forward, Mode};
pub use params::{ParamKind, ParamStore};

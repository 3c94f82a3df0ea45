//! The network topology, its passes and model files.

mod check;
mod config;
mod io;
mod model;

pub use check::check_network;
pub use config::{
    tiny_variant_config, ConvSpec, NetworkConfig, ParamCounts, PoolKind, SectionConfig,
    SectionTrace,
};
pub use io::{from_bytes, load, save, to_bytes, MODEL_MAGIC, MODEL_VERSION};
pub use model::{Fingerprint, ForwardCache, Gradients, GroupKind, Model, Section};

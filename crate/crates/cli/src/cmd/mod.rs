pub mod evaluate;
pub mod gradcheck;
pub mod inspect;
pub mod predict;
pub mod prepare;
pub mod split;
pub mod synth;
pub mod train;

use wenet_core::NetworkConfig;

use crate::UsageError;

pub(crate) fn architecture(tiny: bool) -> NetworkConfig {
    if tiny {
        NetworkConfig::tiny()
    } else {
        NetworkConfig::canonical()
    }
}

pub(crate) fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

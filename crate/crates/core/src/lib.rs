//! Waveform evaluation networks.
//!
//! A no-reference estimator of speech quality and intelligibility that runs a
//! stack of 1-D convolutional sections directly on 8 kHz waveforms, followed
//! by a small dense head. The crate contains everything needed to go from WAV
//! files to a trained model:
//!
//! * [`dsp`]: WAV decoding, active speech level measurement, level
//!   normalization and segment mining.
//! * [`nn`]: numeric kernels with hand-written backward passes, Kaiming
//!   initialization, the Adam optimizer and finite-difference checks.
//! * [`net`]: the five-section network topology, its forward/backward
//!   passes, parameter accounting and the `WENET1` model file.
//! * [`corpus`]: manifests, dataset splits, inverse phase augmentation,
//!   target mapping, batching and synthetic fixtures.
//! * [`train`]: the training loop, plateau learning-rate schedule and
//!   evaluation metrics.

pub mod corpus;
pub mod dsp;
mod error;
pub mod net;
pub mod nn;
pub mod train;

pub use error::{Error, Result};

pub use corpus::{Manifest, ManifestEntry, Metric, SplitAssignment, SplitLabel, TargetMapper};
pub use dsp::{ActivityReport, AudioClip, Segment};
pub use net::{Model, NetworkConfig};
pub use nn::{Exec, Scalar, Tensor};
pub use train::{EpochLog, EvalReport, TrainConfig};

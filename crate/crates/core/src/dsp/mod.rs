//! Audio input, speech activity measurement and segment mining.

mod activity;
mod segment;
mod store;
mod wav;

pub use activity::{measure_activity, ActivityReport, FRAME_LEN, HANGOVER_FRAMES, MARGIN_DB};
pub use segment::{
    extract_segments, invert_phase, normalize_to_level, Normalized, ScanConfig, Segment,
    DEFAULT_LEVEL_DB, MAX_OFFSET_MS,
};
pub use store::{read_store, write_store, StoreReader, StoreWriter, SEGMENT_MAGIC};
pub use wav::{load_wav, write_wav};

use crate::{Error, Result};

/// The only sample rate the network accepts.
pub const SAMPLE_RATE: u32 = 8000;

/// Samples in one network input (3 s at 8 kHz).
pub const SEGMENT_LEN: usize = 24_000;

/// Mono 8 kHz waveform.
///
/// Decoded clips lie in `[-1, 1)`. Normalization may hard-clip to exactly
/// `+1.0`, so the constructor accepts the closed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate: u32,
    source_id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, source_id: impl Into<String>) -> Result<Self> {
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !(-1.0..=1.0).contains(*s))
        {
            return Err(Error::SampleOutOfRange { index, value });
        }
        Ok(Self {
            samples,
            sample_rate: SAMPLE_RATE,
            source_id: source_id.into(),
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

//! Frame-based active speech level measurement.
//!
//! The envelope is an exponentially smoothed absolute amplitude (30 ms time
//! constant), run forwards and backwards over the signal and combined with a
//! pointwise minimum so that it does not smear into neighbouring silence.
//! A frame is active when its peak envelope lies within [`MARGIN_DB`] of the
//! active level, which itself is the RMS over active frames; the pair is
//! solved by fixed-point iteration on the threshold. Inactive gaps of at most
//! [`HANGOVER_FRAMES`] between active frames are bridged.
//!
//! Every step is homogeneous in the signal amplitude, so scaling a clip by
//! `g` shifts the measured level by exactly `20 log10 g` and leaves the mask
//! unchanged. The measurement only looks at magnitudes.

use super::{AudioClip, SAMPLE_RATE};
use crate::{Error, Result};

/// 10 ms at 8 kHz.
pub const FRAME_LEN: usize = 80;

/// Distance in dB between the active level and the activity threshold.
pub const MARGIN_DB: f64 = 15.9;

/// Longest gap (200 ms) that stays active when surrounded by active frames.
pub const HANGOVER_FRAMES: usize = 20;

const TIME_CONSTANT_S: f64 = 0.03;

/// Frames whose envelope is below this absolute level are never active.
const FLOOR_DB: f64 = -100.0;

const MAX_ITERATIONS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct ActivityReport {
    /// Active speech level in dBov; `None` when no frame is active.
    pub active_level_db: Option<f64>,
    pub activity_factor: f64,
    /// One flag per 10 ms frame; a trailing partial frame counts as a frame.
    pub active_mask: Vec<bool>,
}

impl ActivityReport {
    pub fn active_frames(&self) -> usize {
        self.active_mask.iter().filter(|&&a| a).count()
    }
}

pub fn measure_activity(clip: &AudioClip) -> Result<ActivityReport> {
    measure_samples(clip.samples())
}

pub(crate) fn measure_samples(samples: &[f32]) -> Result<ActivityReport> {
    if samples.is_empty() {
        return Err(Error::EmptyClip);
    }
    let frames = FrameStats::compute(samples);
    let n = frames.len();

    let audible: Vec<bool> = frames.env_db.iter().map(|&e| e > FLOOR_DB).collect();
    if !audible.iter().any(|&a| a) {
        return Ok(ActivityReport {
            active_level_db: None,
            activity_factor: 0.0,
            active_mask: vec![false; n],
        });
    }

    let mut mask = audible;
    let mut level = frames.level_db(&mask);
    for _ in 0..MAX_ITERATIONS {
        let threshold = level - MARGIN_DB;
        let mut next: Vec<bool> = frames
            .env_db
            .iter()
            .map(|&e| e > FLOOR_DB && e > threshold)
            .collect();
        bridge_gaps(&mut next, HANGOVER_FRAMES);
        if !next.iter().any(|&a| a) || next == mask {
            break;
        }
        mask = next;
        level = frames.level_db(&mask);
    }

    let active = mask.iter().filter(|&&a| a).count();
    Ok(ActivityReport {
        active_level_db: Some(level),
        activity_factor: active as f64 / n as f64,
        active_mask: mask,
    })
}

struct FrameStats {
    /// Peak envelope per frame in dB.
    env_db: Vec<f64>,
    sum_sq: Vec<f64>,
    count: Vec<usize>,
}

impl FrameStats {
    fn compute(samples: &[f32]) -> Self {
        let decay = (-1.0 / (TIME_CONSTANT_S * f64::from(SAMPLE_RATE))).exp();
        let mut forward = vec![0.0f64; samples.len()];
        let mut state = 0.0;
        for (f, &s) in forward.iter_mut().zip(samples) {
            state = decay * state + (1.0 - decay) * f64::from(s).abs();
            *f = state;
        }
        let mut envelope = forward;
        state = 0.0;
        for (e, &s) in envelope.iter_mut().zip(samples).rev() {
            state = decay * state + (1.0 - decay) * f64::from(s).abs();
            *e = e.min(state);
        }

        let n = samples.len().div_ceil(FRAME_LEN);
        let mut env_db = Vec::with_capacity(n);
        let mut sum_sq = Vec::with_capacity(n);
        let mut count = Vec::with_capacity(n);
        for (env, frame) in envelope.chunks(FRAME_LEN).zip(samples.chunks(FRAME_LEN)) {
            let peak = env.iter().copied().fold(0.0, f64::max);
            env_db.push(amplitude_db(peak));
            sum_sq.push(frame.iter().map(|&s| f64::from(s) * f64::from(s)).sum());
            count.push(frame.len());
        }
        Self {
            env_db,
            sum_sq,
            count,
        }
    }

    fn len(&self) -> usize {
        self.env_db.len()
    }

    fn level_db(&self, mask: &[bool]) -> f64 {
        let (energy, samples) = mask
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .fold((0.0, 0usize), |(e, c), (i, _)| {
                (e + self.sum_sq[i], c + self.count[i])
            });
        power_db(energy / samples.max(1) as f64)
    }
}

fn amplitude_db(a: f64) -> f64 {
    if a > 0.0 {
        20.0 * a.log10()
    } else {
        f64::NEG_INFINITY
    }
}

fn power_db(p: f64) -> f64 {
    if p > 0.0 {
        10.0 * p.log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// Marks interior inactive runs of length `<= max_gap` as active.
fn bridge_gaps(mask: &mut [bool], max_gap: usize) {
    let mut last_active: Option<usize> = None;
    for i in 0..mask.len() {
        if mask[i] {
            if let Some(prev) = last_active {
                let gap = i - prev - 1;
                if gap > 0 && gap <= max_gap {
                    mask[prev + 1..i].iter_mut().for_each(|m| *m = true);
                }
            }
            last_active = Some(i);
        }
    }
}

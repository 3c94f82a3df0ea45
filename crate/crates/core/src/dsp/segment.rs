use std::collections::HashSet;

use rand::Rng;

use super::activity::measure_samples;
use super::{measure_activity, AudioClip, SAMPLE_RATE, SEGMENT_LEN};
use crate::{Error, Result};

/// Normalization target: 26 dB below the clipping point.
pub const DEFAULT_LEVEL_DB: f64 = -26.0;

/// Upper bound of the per-window random start offset.
pub const MAX_OFFSET_MS: f64 = 250.0;

const SAMPLES_PER_MS: f64 = SAMPLE_RATE as f64 / 1000.0;

/// A fixed-length network input cut from a normalized clip.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub samples: Vec<f32>,
    pub activity_factor: f32,
    pub gain_applied_db: f32,
    pub offset_ms: u16,
    pub source_id: String,
    pub phase_inverted: bool,
}

impl Segment {
    pub fn new(
        samples: Vec<f32>,
        activity_factor: f32,
        gain_applied_db: f32,
        offset_ms: u16,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if samples.len() != SEGMENT_LEN {
            return Err(Error::Shape(format!(
                "segment has {} samples, expected {SEGMENT_LEN}",
                samples.len()
            )));
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !(-1.0..=1.0).contains(*s))
        {
            return Err(Error::SampleOutOfRange { index, value });
        }
        Ok(Self {
            samples,
            activity_factor,
            gain_applied_db,
            offset_ms,
            source_id: source_id.into(),
            phase_inverted: false,
        })
    }
}

/// A clip scaled to a target active level.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub clip: AudioClip,
    pub gain_db: f64,
    /// Samples that exceeded ±1 after scaling and were hard-clipped.
    pub clipped: usize,
}

pub fn normalize_to_level(clip: &AudioClip, target_db: f64) -> Result<Normalized> {
    let report = measure_activity(clip)?;
    let level = match report.active_level_db {
        Some(level) if report.activity_factor > 0.0 => level,
        _ => return Err(Error::Silent),
    };
    let gain_db = target_db - level;
    let gain = 10f64.powf(gain_db / 20.0);
    let mut clipped = 0;
    let samples = clip
        .samples()
        .iter()
        .map(|&s| {
            let v = f64::from(s) * gain;
            if v.abs() > 1.0 {
                clipped += 1;
            }
            v.clamp(-1.0, 1.0) as f32
        })
        .collect();
    if clipped > 0 {
        log::debug!("{}: clipped {clipped} samples", clip.source_id());
    }
    Ok(Normalized {
        clip: AudioClip::new(samples, clip.source_id())?,
        gain_db,
        clipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanConfig {
    pub min_activity: f64,
    pub passes: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            min_activity: 0.75,
            passes: 1,
        }
    }
}

/// Mines 3 s segments from non-overlapping nominal windows.
///
/// Each pass draws an independent start offset, uniform in `[0, 250]` ms,
/// for every nominal window. Windows that overrun the clip, fall below
/// `min_activity`, or start on an already-emitted sample are skipped.
pub fn extract_segments<R: Rng + ?Sized>(
    normalized: &Normalized,
    config: &ScanConfig,
    rng: &mut R,
) -> Result<Vec<Segment>> {
    if !(0.0..=1.0).contains(&config.min_activity) {
        return Err(Error::Config(format!(
            "min_activity {} outside [0, 1]",
            config.min_activity
        )));
    }
    if config.passes == 0 {
        return Err(Error::Config("passes must be at least 1".into()));
    }
    let samples = normalized.clip.samples();
    let nominal = samples.len() / SEGMENT_LEN;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for _ in 0..config.passes {
        for window in 0..nominal {
            let offset_ms: f64 = rng.gen_range(0.0..=MAX_OFFSET_MS);
            let offset = (offset_ms * SAMPLES_PER_MS).floor() as usize;
            let start = window * SEGMENT_LEN + offset;
            let end = start + SEGMENT_LEN;
            if end > samples.len() || !seen.insert(start) {
                continue;
            }
            let chunk = &samples[start..end];
            let factor = measure_samples(chunk)?.activity_factor;
            if factor < config.min_activity {
                continue;
            }
            out.push(Segment {
                samples: chunk.to_vec(),
                activity_factor: factor as f32,
                gain_applied_db: normalized.gain_db as f32,
                offset_ms: (offset / SAMPLES_PER_MS as usize) as u16,
                source_id: normalized.clip.source_id().to_string(),
                phase_inverted: false,
            });
        }
    }
    Ok(out)
}

pub fn invert_phase(segment: &Segment) -> Segment {
    Segment {
        samples: segment.samples.iter().map(|&s| -s).collect(),
        phase_inverted: !segment.phase_inverted,
        ..segment.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square(amplitude: f32, len: usize) -> Vec<f32> {
        (0..len)
            .map(|i| {
                if (i / 16) % 2 == 0 {
                    amplitude
                } else {
                    -amplitude
                }
            })
            .collect()
    }

    fn normalized(samples: Vec<f32>) -> Normalized {
        Normalized {
            clip: AudioClip::new(samples, "clip").unwrap(),
            gain_db: 0.0,
            clipped: 0,
        }
    }

    #[test]
    fn already_at_target_is_unchanged() {
        // square wave level is 20 log10(a); pick a so that it is -26 dBov
        let a = 10f64.powf(-26.0 / 20.0) as f32;
        let clip = AudioClip::new(square(a, 8000), "x").unwrap();
        let n = normalize_to_level(&clip, DEFAULT_LEVEL_DB).unwrap();
        assert!(n.gain_db.abs() < 1e-6, "{}", n.gain_db);
        for (x, y) in clip.samples().iter().zip(n.clip.samples()) {
            assert!((x - y).abs() <= f32::EPSILON * x.abs());
        }
    }

    #[test]
    fn twenty_db_gain() {
        let a = 10f64.powf(-46.0 / 20.0) as f32;
        let clip = AudioClip::new(square(a, 8000), "x").unwrap();
        let n = normalize_to_level(&clip, DEFAULT_LEVEL_DB).unwrap();
        assert!((n.gain_db - 20.0).abs() < 1e-4, "{}", n.gain_db);
        let ratio = n.clip.samples()[0] / clip.samples()[0];
        assert!((ratio - 10.0).abs() < 1e-3);
        let level = measure_activity(&n.clip).unwrap().active_level_db.unwrap();
        assert!((level + 26.0).abs() < 0.1);
    }

    #[test]
    fn silence_is_rejected() {
        let clip = AudioClip::new(vec![0.0; 8000], "x").unwrap();
        assert!(matches!(
            normalize_to_level(&clip, DEFAULT_LEVEL_DB),
            Err(Error::Silent)
        ));
    }

    #[test]
    fn overshoot_is_clipped_and_counted() {
        let mut s = square(0.01, 8000);
        s[100] = 0.9;
        let clip = AudioClip::new(s, "x").unwrap();
        let n = normalize_to_level(&clip, -3.0).unwrap();
        assert!(n.clipped >= 1);
        assert!(n.clip.samples().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn one_window_fits_in_three_and_a_quarter_seconds() {
        let clip = normalized(square(0.05, 26_000));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let segs = extract_segments(&clip, &ScanConfig::default(), &mut rng).unwrap();
        assert_eq!(segs.len(), 1);
        assert!(segs[0].offset_ms <= 250);
        assert_eq!(segs[0].samples.len(), SEGMENT_LEN);
        assert_eq!(segs[0].activity_factor, 1.0);
    }

    #[test]
    fn silent_clip_yields_nothing() {
        let clip = normalized(vec![0.0; 26_000]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let segs = extract_segments(&clip, &ScanConfig::default(), &mut rng).unwrap();
        assert!(segs.is_empty());
    }

    #[test]
    fn short_clip_yields_nothing() {
        let clip = normalized(square(0.05, 20_000));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let segs = extract_segments(&clip, &ScanConfig::default(), &mut rng).unwrap();
        assert!(segs.is_empty());
    }

    /// Direct re-scan with the same generator stream.
    fn oracle_starts(len: usize, passes: usize, seed: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut starts: Vec<usize> = Vec::new();
        for _ in 0..passes {
            for w in 0..len / 24_000 {
                let ms: f64 = rng.gen_range(0.0..=250.0);
                let s = w * 24_000 + (ms * 8.0).floor() as usize;
                if s + 24_000 <= len && !starts.contains(&s) {
                    starts.push(s);
                }
            }
        }
        starts
    }

    #[test]
    fn two_passes_match_oracle() {
        let samples: Vec<f32> = (0..80_000)
            .map(|i| ((i % 37) as f32 - 18.0) * 0.003)
            .collect();
        let clip = normalized(samples.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let config = ScanConfig {
            min_activity: 0.75,
            passes: 2,
        };
        let segs = extract_segments(&clip, &config, &mut rng).unwrap();
        let starts = oracle_starts(80_000, 2, 42);
        assert_eq!(segs.len(), starts.len());
        assert_eq!(segs.len(), 6);
        for (seg, &start) in segs.iter().zip(&starts) {
            assert_eq!(seg.samples, samples[start..start + 24_000]);
            assert_eq!(usize::from(seg.offset_ms), (start % 24_000) / 8);
        }
    }

    #[test]
    fn emitted_segments_meet_activity_gate() {
        let mut s = square(0.1, 30_000);
        s.extend(vec![0.0; 20_000]);
        s.extend(square(0.1, 30_000));
        let clip = normalized(s);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let config = ScanConfig {
            min_activity: 0.75,
            passes: 4,
        };
        let segs = extract_segments(&clip, &config, &mut rng).unwrap();
        for seg in &segs {
            let f = measure_samples(&seg.samples).unwrap().activity_factor;
            assert!(f >= 0.75);
            assert_eq!(f as f32, seg.activity_factor);
        }
    }

    #[test]
    fn bad_scan_config() {
        let clip = normalized(square(0.1, 30_000));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bad = ScanConfig {
            min_activity: 1.5,
            passes: 1,
        };
        assert!(extract_segments(&clip, &bad, &mut rng).is_err());
        let bad = ScanConfig {
            min_activity: 0.5,
            passes: 0,
        };
        assert!(extract_segments(&clip, &bad, &mut rng).is_err());
    }

    fn segment(samples: Vec<f32>) -> Segment {
        Segment {
            samples,
            activity_factor: 0.8,
            gain_applied_db: 3.0,
            offset_ms: 12,
            source_id: "s".into(),
            phase_inverted: false,
        }
    }

    #[test]
    fn inversion_negates() {
        let s = segment(vec![0.5, -0.25, 0.0, -1.0]);
        let inv = invert_phase(&s);
        assert_eq!(inv.samples, vec![-0.5, 0.25, 0.0, 1.0]);
        assert!(inv.phase_inverted);
        assert_eq!(inv.offset_ms, 12);
        assert_eq!(inv.gain_applied_db, 3.0);
        let back = invert_phase(&inv);
        assert_eq!(back, s);
        assert!(back
            .samples
            .iter()
            .zip(&s.samples)
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn inversion_preserves_activity() {
        let mut v = square(0.2, 12_000);
        v.extend(vec![0.0; 12_000]);
        v.iter_mut()
            .enumerate()
            .for_each(|(i, s)| *s *= 1.0 + (i % 7) as f32 * 0.01);
        let s = segment(v);
        let a = measure_samples(&s.samples).unwrap();
        let b = measure_samples(&invert_phase(&s).samples).unwrap();
        assert_eq!(a, b);
    }
}

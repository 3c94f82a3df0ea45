//! Synthetic pseudo-speech with SNR-derived targets, for desk-scale runs.
//!
//! A clip is a sum of 2 to 4 harmonics of a fundamental in 100..300 Hz,
//! amplitude modulated by a 2..8 Hz syllabic envelope, plus white noise at an
//! SNR drawn uniformly from [`SNR_RANGE_DB`]. Targets are linear in SNR and
//! clamped to the metric ranges.

use std::f64::consts::TAU;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Manifest, ManifestEntry};
use crate::dsp::{
    measure_activity, normalize_to_level, AudioClip, Segment, StoreWriter, DEFAULT_LEVEL_DB,
    SAMPLE_RATE, SEGMENT_LEN,
};
use crate::Result;

pub const SNR_RANGE_DB: (f64, f64) = (-5.0, 40.0);

/// Source datasets the fixture alternates between.
pub const SYNTH_DATASETS: [&str; 2] = ["synth-a", "synth-b"];

fn position(snr_db: f64) -> f64 {
    (snr_db + 5.0) / 45.0
}

pub fn quality_target(snr_db: f64) -> f64 {
    (1.0 + 3.5 * position(snr_db)).clamp(1.0, 4.5)
}

pub fn intelligibility_target(snr_db: f64) -> f64 {
    (0.45 + 0.5 * position(snr_db)).clamp(0.0, 1.0)
}

/// A 3 s noisy pseudo-speech clip (peak 0.5, not level normalized) and its
/// SNR in dB.
pub fn synth_clip<R: Rng + ?Sized>(rng: &mut R, id: &str) -> Result<(AudioClip, f64)> {
    let fs = f64::from(SAMPLE_RATE);
    let f0 = rng.gen_range(100.0..300.0);
    let harmonics = rng.gen_range(2..=4);
    let partials: Vec<(f64, f64)> = (1..=harmonics)
        .map(|k| (rng.gen_range(0.3..1.0) / k as f64, rng.gen_range(0.0..TAU)))
        .collect();
    let am_rate = rng.gen_range(2.0..8.0);
    let am_phase = rng.gen_range(0.0..TAU);
    let snr = rng.gen_range(SNR_RANGE_DB.0..=SNR_RANGE_DB.1);

    let speech: Vec<f64> = (0..SEGMENT_LEN)
        .map(|n| {
            let t = n as f64 / fs;
            let env = 0.25 + 0.75 * (0.5 - 0.5 * (TAU * am_rate * t + am_phase).cos());
            let tone: f64 = partials
                .iter()
                .enumerate()
                .map(|(k, &(a, ph))| a * (TAU * (k + 1) as f64 * f0 * t + ph).sin())
                .sum();
            env * tone
        })
        .collect();
    let power = speech.iter().map(|s| s * s).sum::<f64>() / speech.len() as f64;
    let noise_std = (power / 10f64.powf(snr / 10.0)).sqrt();
    let mixed: Vec<f64> = speech
        .iter()
        .map(|s| {
            let z: f64 = StandardNormal.sample(rng);
            s + noise_std * z
        })
        .collect();
    let peak = mixed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let samples = mixed.iter().map(|v| (0.5 * v / peak) as f32).collect();
    Ok((AudioClip::new(samples, id)?, snr))
}

/// A level-normalized synthetic segment and its SNR in dB.
pub fn synth_segment<R: Rng + ?Sized>(rng: &mut R, id: &str) -> Result<(Segment, f64)> {
    let (clip, snr) = synth_clip(rng, id)?;
    let norm = normalize_to_level(&clip, DEFAULT_LEVEL_DB)?;
    let activity = measure_activity(&norm.clip)?.activity_factor;
    let segment = Segment::new(
        norm.clip.into_samples(),
        activity as f32,
        norm.gain_db as f32,
        0,
        id,
    )?;
    Ok((segment, snr))
}

/// Writes `n` synthetic segments to `dir/synth.weseg` and their manifest
/// (all three targets) to `dir/manifest.csv`.
pub fn synth_fixture<R: Rng + ?Sized>(rng: &mut R, n: usize, dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    let store = dir.join("synth.weseg");
    let mut writer = StoreWriter::create(&store)?;
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let (segment, snr) = synth_segment(rng, &format!("synth-{i:05}"))?;
        let record_index = writer.push(&segment)?;
        let q = quality_target(snr);
        entries.push(ManifestEntry {
            segment_path: store.clone(),
            record_index,
            source_dataset: SYNTH_DATASETS[i % SYNTH_DATASETS.len()].into(),
            pesq: Some(q),
            polqa: Some(q),
            stoi: Some(intelligibility_target(snr)),
        });
    }
    writer.finish()?;
    let manifest = Manifest::new(entries)?;
    manifest.save(dir.join("manifest.csv"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn target_endpoints() {
        assert_eq!(quality_target(40.0), 4.5);
        assert_eq!(quality_target(-5.0), 1.0);
        assert_eq!(quality_target(60.0), 4.5);
        assert_eq!(quality_target(-20.0), 1.0);
        assert_eq!(intelligibility_target(-5.0), 0.45);
        assert_eq!(intelligibility_target(40.0), 0.95);
        assert!((quality_target(17.5) - 2.75).abs() < 1e-12);
    }

    #[test]
    fn segments_are_valid_and_active() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..20 {
            let (s, snr) = synth_segment(&mut rng, "x").unwrap();
            assert!((SNR_RANGE_DB.0..=SNR_RANGE_DB.1).contains(&snr));
            assert_eq!(s.samples.len(), SEGMENT_LEN);
            assert!(s.activity_factor > 0.75, "clip {i}: {}", s.activity_factor);
            let again = Segment::new(
                s.samples.clone(),
                s.activity_factor,
                s.gain_applied_db,
                0,
                "x",
            );
            assert!(again.is_ok());
        }
    }

    #[test]
    fn fixture_files() {
        let dir = tempfile::tempdir().unwrap();
        let m = synth_fixture(&mut ChaCha8Rng::seed_from_u64(1), 5, dir.path()).unwrap();
        assert_eq!(m.len(), 5);
        let back = Manifest::load(dir.path().join("manifest.csv")).unwrap();
        assert_eq!(back, m);
        assert_eq!(m.entries[1].source_dataset, "synth-b");
        let segs = crate::dsp::read_store(dir.path().join("synth.weseg")).unwrap();
        assert_eq!(segs.len(), 5);
        let again =
            synth_fixture(&mut ChaCha8Rng::seed_from_u64(1), 5, &dir.path().join("b")).unwrap();
        assert_eq!(
            std::fs::read(dir.path().join("synth.weseg")).unwrap(),
            std::fs::read(dir.path().join("b/synth.weseg")).unwrap()
        );
        assert_eq!(again.entries[4].pesq, m.entries[4].pesq);
    }
}

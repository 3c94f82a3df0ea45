use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wenet_core::corpus::synth::synth_clip;
use wenet_core::dsp::{
    extract_segments, load_wav, measure_activity, normalize_to_level, read_store, write_store,
    write_wav, ScanConfig, DEFAULT_LEVEL_DB, SEGMENT_LEN,
};
use wenet_core::{AudioClip, Error};

#[test]
fn wav_to_store_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (clip, _) = synth_clip(&mut rng, "a").unwrap();
    let mut long = clip.samples().to_vec();
    long.extend_from_slice(clip.samples());
    long.extend_from_slice(clip.samples());
    let wav = dir.path().join("a.wav");
    write_wav(&wav, &long).unwrap();

    let loaded = load_wav(&wav).unwrap();
    assert_eq!(loaded.len(), long.len());
    let norm = normalize_to_level(&loaded, DEFAULT_LEVEL_DB).unwrap();
    let segs = extract_segments(
        &norm,
        &ScanConfig {
            min_activity: 0.0,
            passes: 2,
        },
        &mut rng,
    )
    .unwrap();
    assert!(!segs.is_empty());
    assert!(segs.iter().all(|s| s.samples.len() == SEGMENT_LEN));

    let store = dir.path().join("s.weseg");
    write_store(&store, &segs).unwrap();
    assert_eq!(read_store(&store).unwrap(), segs);
}

#[test]
fn normalization_hits_the_target_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..20 {
        let (clip, _) = synth_clip(&mut rng, &format!("c{i}")).unwrap();
        let n = normalize_to_level(&clip, DEFAULT_LEVEL_DB).unwrap();
        let level = measure_activity(&n.clip).unwrap().active_level_db.unwrap();
        assert!((level - DEFAULT_LEVEL_DB).abs() < 0.1, "clip {i}: {level}");
    }
}

#[test]
fn silence_is_rejected() {
    let clip = AudioClip::new(vec![0.0; SEGMENT_LEN], "zero").unwrap();
    assert!(matches!(
        normalize_to_level(&clip, DEFAULT_LEVEL_DB),
        Err(Error::Silent)
    ));
}

use std::path::Path;

use super::{AudioClip, SAMPLE_RATE};
use crate::{Error, Result};

/// Decodes a mono 16-bit PCM WAV file at 8 kHz. Integer samples map to
/// `v / 32768`.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedChannels(spec.channels));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedFormat(format!(
            "{:?} {}-bit",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::UnsupportedSampleRate(spec.sample_rate));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f32::from(v) / 32768.0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| wav_error(path, e))?;
    AudioClip::new(samples, path.display().to_string())
}

/// Writes samples as mono 16-bit PCM at 8 kHz, saturating at the integer range.
pub fn write_wav(path: impl AsRef<Path>, samples: &[f32]) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| wav_error(path, e))?;
    for &s in samples {
        let v = (f64::from(s) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(|e| wav_error(path, e))?;
    }
    writer.finalize().map_err(|e| wav_error(path, e))
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(source) => Error::io(path, source),
        hound::Error::FormatError(msg) => Error::MalformedWav(msg.to_string()),
        hound::Error::Unsupported => Error::UnsupportedFormat("codec".into()),
        other => Error::MalformedWav(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw(path: &Path, channels: u16, rate: u32, values: &[i16]) {
        let spec = hound::WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for &v in values {
            w.write_sample(v).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn integer_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        write_raw(&path, 1, 8000, &[16384, -32768, 0, 32767]);
        let clip = load_wav(&path).unwrap();
        assert_eq!(clip.samples()[0], 0.5);
        assert_eq!(clip.samples()[1], -1.0);
        assert_eq!(clip.samples()[2], 0.0);
        assert!(clip.samples()[3] < 1.0);
        assert_eq!(clip.sample_rate(), 8000);
        assert!(clip.source_id().ends_with("a.wav"));
    }

    #[test]
    fn rejects_stereo() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.wav");
        write_raw(&path, 2, 8000, &[1, 2, 3, 4]);
        let err = load_wav(&path).unwrap_err();
        assert!(
            err.to_string().contains("unsupported channel count"),
            "{err}"
        );
    }

    #[test]
    fn rejects_other_rates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.wav");
        write_raw(&path, 1, 16000, &[1, 2]);
        assert!(matches!(
            load_wav(&path),
            Err(Error::UnsupportedSampleRate(16000))
        ));
    }

    #[test]
    fn rejects_garbage_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.wav");
        std::fs::write(&path, b"RIFX\0\0\0\0WAVEjunk").unwrap();
        assert!(matches!(load_wav(&path), Err(Error::MalformedWav(_))));
    }

    #[test]
    fn rejects_float_samples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        w.write_sample(0.25f32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(load_wav(&path), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.wav");
        write_wav(&path, &[0.5, -0.25, -1.0]).unwrap();
        let clip = load_wav(&path).unwrap();
        assert_eq!(clip.samples(), &[0.5, -0.25, -1.0]);
    }
}

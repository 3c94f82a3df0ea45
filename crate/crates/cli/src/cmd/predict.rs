use std::path::{Path, PathBuf};

use wenet_core::dsp::{load_wav, normalize_to_level, DEFAULT_LEVEL_DB, SEGMENT_LEN};
use wenet_core::net;
use wenet_core::nn::Scalar;
use wenet_core::{Model, Tensor};

use crate::{Globals, Precision};

#[derive(Debug, clap::Args)]
pub struct Args {
    pub model: PathBuf,
    #[arg(required = true)]
    pub wavs: Vec<PathBuf>,
}

/// Score of every whole 3 s window of `path`, in native units.
pub fn score_file<T: Scalar>(model: &Model<T>, path: &Path) -> wenet_core::Result<Vec<f64>> {
    let clip = load_wav(path)?;
    let windows = clip.len() / SEGMENT_LEN;
    if windows == 0 {
        return Err(wenet_core::Error::Invalid(format!(
            "{:.2} s of audio, at least 3 s needed",
            clip.duration_secs()
        )));
    }
    let samples = normalize_to_level(&clip, DEFAULT_LEVEL_DB)?
        .clip
        .into_samples();
    let len = model.input_length();
    let mut data = Vec::with_capacity(windows * len);
    for w in 0..windows {
        let start = w * SEGMENT_LEN;
        data.extend(
            samples[start..start + len]
                .iter()
                .map(|&s| T::of(f64::from(s))),
        );
    }
    let x = Tensor::new(&[windows, 1, len], data)?;
    Ok(model
        .predict(&x)?
        .iter()
        .map(|p| model.mapper.unmap(p.f64()))
        .collect())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn report<T: Scalar>(model: &Model<T>, wavs: &[PathBuf]) -> anyhow::Result<()> {
    println!("file,segment,{},error", model.metric);
    let mut failures = 0;
    for path in wavs {
        let file = csv_field(&path.display().to_string());
        match score_file(model, path) {
            Ok(scores) => {
                for (i, s) in scores.iter().enumerate() {
                    println!("{file},{i},{s:.4},");
                }
                let mean = scores.iter().sum::<f64>() / scores.len() as f64;
                println!("{file},mean,{mean:.4},");
            }
            Err(e) => {
                failures += 1;
                log::warn!("{}: {e}", path.display());
                println!("{file},,,{}", csv_field(&e.to_string()));
            }
        }
    }
    if failures == wavs.len() {
        anyhow::bail!(wenet_core::Error::Invalid("no file could be scored".into()));
    }
    Ok(())
}

pub fn run(g: &Globals, a: Args) -> anyhow::Result<()> {
    match g.precision {
        Precision::F32 => report(&net::load::<f32>(&a.model)?, &a.wavs),
        Precision::F64 => report(&net::load::<f64>(&a.model)?, &a.wavs),
    }
}

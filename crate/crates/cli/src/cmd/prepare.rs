use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use wenet_core::dsp::{
    extract_segments, load_wav, normalize_to_level, ScanConfig, StoreWriter, DEFAULT_LEVEL_DB,
};
use wenet_core::{Manifest, ManifestEntry};

use crate::Globals;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Directory of 8 kHz mono WAV files.
    pub wav_dir: PathBuf,
    /// Output directory; receives `segments.weseg` and `manifest.csv`.
    #[arg(long)]
    pub out: PathBuf,
    /// Minimum activity factor of a kept segment.
    #[arg(long, default_value_t = 0.75)]
    pub min_activity: f64,
    /// Scans per file, each with fresh random offsets.
    #[arg(long, default_value_t = 1)]
    pub passes: usize,
    /// CSV with a `file` column and any of `pesq`, `polqa`, `stoi`,
    /// `source_dataset`. Targets apply to every segment of the file.
    #[arg(long)]
    pub targets: Option<PathBuf>,
    /// Dataset label for files without one in the targets CSV. Defaults to
    /// the name of the WAV directory.
    #[arg(long)]
    pub dataset: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
struct TargetRow {
    file: String,
    pesq: Option<f64>,
    polqa: Option<f64>,
    stoi: Option<f64>,
    source_dataset: Option<String>,
}

fn read_targets(path: &Path) -> anyhow::Result<HashMap<String, TargetRow>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening targets {}", path.display()))?;
    let mut out = HashMap::new();
    for row in reader.deserialize() {
        let row: TargetRow = row.with_context(|| format!("reading {}", path.display()))?;
        out.insert(row.file.clone(), row);
    }
    Ok(out)
}

pub(crate) fn wav_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    Ok(files)
}

pub fn run(g: &Globals, a: Args) -> anyhow::Result<()> {
    let scan = ScanConfig {
        min_activity: a.min_activity,
        passes: a.passes,
    };
    if !(0.0..=1.0).contains(&scan.min_activity) || scan.passes == 0 {
        return Err(super::usage(
            "--min-activity must lie in [0, 1] and --passes be positive",
        ));
    }
    let targets = match &a.targets {
        Some(p) => read_targets(p)?,
        None => HashMap::new(),
    };
    let default_dataset = a.dataset.clone().unwrap_or_else(|| {
        a.wav_dir
            .canonicalize()
            .ok()
            .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "default".into())
    });
    let files = wav_files(&a.wav_dir)?;
    std::fs::create_dir_all(&a.out)?;
    let store = a.out.join("segments.weseg");
    let mut writer = StoreWriter::create(&store)?;
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let mut entries = Vec::new();
    let mut activity = 0.0;
    let mut used = 0;
    for path in &files {
        let name = path
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        let segments = load_wav(path)
            .and_then(|clip| normalize_to_level(&clip, DEFAULT_LEVEL_DB))
            .and_then(|n| extract_segments(&n, &scan, &mut rng));
        let segments = match segments {
            Ok(s) => s,
            Err(e) => {
                log::warn!("skipping {name}: {e}");
                continue;
            }
        };
        if segments.is_empty() {
            log::info!("{name}: no segment passed the activity threshold");
            continue;
        }
        used += 1;
        let t = targets.get(&name).cloned().unwrap_or_default();
        if a.targets.is_some() && t.file.is_empty() {
            log::warn!("{name}: no row in the targets CSV");
        }
        for seg in &segments {
            activity += f64::from(seg.activity_factor);
            entries.push(ManifestEntry {
                segment_path: store.clone(),
                record_index: writer.push(seg)?,
                source_dataset: t
                    .source_dataset
                    .clone()
                    .unwrap_or_else(|| default_dataset.clone()),
                pesq: t.pesq,
                polqa: t.polqa,
                stoi: t.stoi,
            });
        }
    }
    writer.finish()?;
    if entries.is_empty() {
        let _ = std::fs::remove_file(&store);
        return Err(wenet_core::Error::Manifest(format!(
            "no segments extracted from {} files in {}",
            files.len(),
            a.wav_dir.display()
        ))
        .into());
    }
    let n = entries.len();
    let manifest = Manifest::new(entries)?;
    manifest.save(a.out.join("manifest.csv"))?;
    println!(
        "{n} segments from {used} of {} files, mean activity factor {:.3}",
        files.len(),
        activity / n as f64
    );
    Ok(())
}

use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use wenet_core::corpus::{fit_mapper, EntrySet, SegmentLoader};
use wenet_core::net;
use wenet_core::nn::Scalar;
use wenet_core::train::{train, TrainConfig};
use wenet_core::{EpochLog, Manifest, Metric, Model, SplitAssignment, SplitLabel};

use crate::{Globals, Precision};

#[derive(Debug, clap::Args)]
pub struct Args {
    pub manifest: PathBuf,
    pub split: PathBuf,
    /// Target metric: pesq, polqa or stoi.
    #[arg(long)]
    pub metric: Metric,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch CSV log.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Train the reduced desk-scale variant.
    #[arg(long)]
    pub tiny: bool,
    /// Split whose segments drive the per-epoch validation pass. `train`
    /// turns the run into a capacity (overfit) check.
    #[arg(long, default_value = "validation")]
    pub validate_on: SplitLabel,
    /// Also train on the phase-inverted twin of every training and
    /// validation segment.
    #[arg(long)]
    pub ipa: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub l2: Option<f64>,
    /// Exclude batch-norm scale/shift and PReLU slopes from L2.
    #[arg(long)]
    pub no_l2_affine: bool,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub decay: Option<f64>,
    /// Reset the best validation loss after each decay.
    #[arg(long)]
    pub reset_best: bool,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Read segments from disk every epoch instead of keeping them in memory.
    #[arg(long)]
    pub no_cache: bool,
    /// Train on a fresh seeded window of each segment every epoch (models
    /// whose input is shorter than a segment).
    #[arg(long)]
    pub random_crops: bool,
}

impl Args {
    pub fn train_config(&self, g: &Globals) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            learning_rate: self.lr.unwrap_or(d.learning_rate),
            l2: self.l2.unwrap_or(d.l2),
            l2_on_affine: !self.no_l2_affine,
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            plateau_threshold: self.threshold.unwrap_or(d.plateau_threshold),
            plateau_patience: self.patience.unwrap_or(d.plateau_patience),
            lr_decay_factor: self.decay.unwrap_or(d.lr_decay_factor),
            reset_best_on_decay: self.reset_best,
            seed: g.seed,
            deterministic: g.deterministic,
            random_crops: self.random_crops,
            ..d
        }
    }
}

pub fn run(g: &Globals, a: Args) -> anyhow::Result<()> {
    let config = a.train_config(g);
    config.validate().map_err(|e| super::usage(e.to_string()))?;
    let mut arch = super::architecture(a.tiny);
    if let Some(p) = a.dropout {
        if !(0.0..1.0).contains(&p) {
            return Err(super::usage("--dropout must lie in [0, 1)"));
        }
        arch.dropout_p = p;
    }
    let manifest = Manifest::load(&a.manifest)?;
    let split = SplitAssignment::load(&a.split)?;
    if split.len() != manifest.len() {
        return Err(wenet_core::Error::Manifest(format!(
            "split has {} labels for {} manifest entries",
            split.len(),
            manifest.len()
        ))
        .into());
    }
    let mut train_set = EntrySet::from_split(&split, SplitLabel::Train);
    let mut val_set = EntrySet::from_split(&split, a.validate_on);
    let train_values = targets(&manifest, &train_set, a.metric)?;
    targets(&manifest, &val_set, a.metric)?;
    if a.ipa {
        train_set = train_set.apply_ipa()?;
        val_set = val_set.apply_ipa()?;
    }
    let mapper = fit_mapper(a.metric, &train_values)?;
    let model = Model::<f32>::build(arch, g.seed)?.with_target(a.metric, mapper);
    log::info!(
        "training {} on {} segments, validating on {}",
        a.metric,
        train_set.len(),
        val_set.len()
    );
    match g.precision {
        Precision::F32 => fit(model, &manifest, &train_set, &val_set, &config, &a),
        Precision::F64 => fit(
            model.cast::<f64>(),
            &manifest,
            &train_set,
            &val_set,
            &config,
            &a,
        ),
    }
}

/// Native-unit targets of `set`; every entry must carry `metric`.
pub(crate) fn targets(
    manifest: &Manifest,
    set: &EntrySet,
    metric: Metric,
) -> anyhow::Result<Vec<f64>> {
    set.items
        .iter()
        .map(|item| {
            manifest.entries[item.entry].target(metric).ok_or_else(|| {
                wenet_core::Error::MissingTarget {
                    metric: metric.name().into(),
                    entry: item.entry,
                }
                .into()
            })
        })
        .collect()
}

fn fit<T: Scalar>(
    mut model: Model<T>,
    manifest: &Manifest,
    train_set: &EntrySet,
    val_set: &EntrySet,
    config: &TrainConfig,
    a: &Args,
) -> anyhow::Result<()> {
    let mut loader = SegmentLoader::new(manifest, model.input_length())?;
    if !a.no_cache {
        loader = loader.cached();
    }
    let mut log_file = match &a.log {
        Some(path) => {
            let mut f = std::fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            writeln!(f, "{}", EpochLog::HEADER)?;
            Some(f)
        }
        None => None,
    };
    let mut write_err = None;
    let logs = train(&mut model, &mut loader, train_set, val_set, config, |l| {
        log::info!(
            "epoch {} train {:.4} val {:.4} rho {} lr {:e}",
            l.epoch,
            l.train_rmse,
            l.val_rmse,
            l.val_rho.map_or("-".into(), |r| format!("{r:.4}")),
            l.lr
        );
        if let Some(f) = log_file.as_mut() {
            if let Err(e) = writeln!(f, "{}", l.csv_row()).and_then(|_| f.flush()) {
                write_err.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(anyhow::Error::new(e).context("writing the epoch log"));
    }
    net::save(&model, &a.out)?;
    if let Some(last) = logs.last() {
        println!("{}", EpochLog::HEADER);
        println!("{}", last.csv_row());
    }
    Ok(())
}

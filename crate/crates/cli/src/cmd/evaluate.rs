use std::path::PathBuf;

use wenet_core::corpus::{EntrySet, SegmentLoader};
use wenet_core::net;
use wenet_core::nn::Scalar;
use wenet_core::train::{evaluate, COMBINED};
use wenet_core::{EvalReport, Manifest, SplitAssignment, SplitLabel};

use crate::{Globals, Precision};

#[derive(Debug, clap::Args)]
pub struct Args {
    pub model: PathBuf,
    pub manifest: PathBuf,
    /// Split CSV; without it every manifest entry is scored.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, default_value = "test", requires = "split")]
    pub set: SplitLabel,
    /// Also score the phase-inverted twin of every segment.
    #[arg(long)]
    pub ipa: bool,
    /// Directory for metrics.csv, pairs.csv and histogram.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
}

pub fn run(g: &Globals, a: Args) -> anyhow::Result<()> {
    if a.bins == 0 || a.batch_size == 0 {
        return Err(super::usage("--bins and --batch-size must be positive"));
    }
    let report = match g.precision {
        Precision::F32 => score(net::load::<f32>(&a.model)?, &a)?,
        Precision::F64 => score(net::load::<f64>(&a.model)?, &a)?,
    };
    std::fs::create_dir_all(&a.out_dir)?;
    report.write_metrics(a.out_dir.join("metrics.csv"))?;
    report.write_pairs(a.out_dir.join("pairs.csv"))?;
    report.write_histogram(a.out_dir.join("histogram.csv"), a.bins)?;
    println!("dataset,n,rho,rmse");
    for m in report.datasets.iter().chain([&report.combined]) {
        let rho = m.rho.map(|r| format!("{r:.4}")).unwrap_or_default();
        println!("{},{},{rho},{:.4}", m.dataset, m.n, m.rmse);
    }
    debug_assert_eq!(report.combined.dataset, COMBINED);
    Ok(())
}

fn score<T: Scalar>(model: wenet_core::Model<T>, a: &Args) -> anyhow::Result<EvalReport> {
    let manifest = Manifest::load(&a.manifest)?;
    if !manifest.has_metric(model.metric) {
        return Err(wenet_core::Error::Manifest(format!(
            "model predicts {} but the manifest has no {} column values",
            model.metric, model.metric
        ))
        .into());
    }
    let mut set = match &a.split {
        Some(path) => {
            let split = SplitAssignment::load(path)?;
            if split.len() != manifest.len() {
                return Err(wenet_core::Error::Manifest(format!(
                    "split has {} labels for {} manifest entries",
                    split.len(),
                    manifest.len()
                ))
                .into());
            }
            EntrySet::from_split(&split, a.set)
        }
        None => EntrySet::from_ids(0..manifest.len()),
    };
    super::train::targets(&manifest, &set, model.metric)?;
    if a.ipa {
        set = set.apply_ipa()?;
    }
    let mut loader = SegmentLoader::new(&manifest, model.input_length())?;
    Ok(evaluate(&model, &mut loader, &set, a.batch_size)?)
}

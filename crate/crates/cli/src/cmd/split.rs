use std::path::PathBuf;

use wenet_core::corpus::{split, write_ipa_corpus, DEFAULT_FRACTIONS};
use wenet_core::{Manifest, SplitLabel};

use crate::Globals;

#[derive(Debug, clap::Args)]
pub struct Args {
    pub manifest: PathBuf,
    /// Split CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Train, test and validation fractions.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_FRACTIONS)]
    pub fractions: Vec<f64>,
    /// Also write a phase-augmented corpus (store, manifest and split) here.
    #[arg(long)]
    pub ipa: Option<PathBuf>,
}

pub fn run(g: &Globals, a: Args) -> anyhow::Result<()> {
    let fractions: [f64; 3] = a
        .fractions
        .as_slice()
        .try_into()
        .map_err(|_| super::usage("--fractions takes three values"))?;
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f))
        || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(super::usage("--fractions must be in [0, 1] and sum to 1"));
    }
    let manifest = Manifest::load(&a.manifest)?;
    let assignment = split(&manifest, fractions, g.seed)?;
    assignment.save(&a.out)?;
    let counts = |s: &wenet_core::SplitAssignment| {
        [SplitLabel::Train, SplitLabel::Test, SplitLabel::Validation]
            .map(|l| format!("{l}={}", s.count(l)))
            .join(" ")
    };
    println!("{}", counts(&assignment));
    if let Some(dir) = &a.ipa {
        std::fs::create_dir_all(dir)?;
        let (aug, aug_split) = write_ipa_corpus(&manifest, &assignment, &dir.join("ipa.weseg"))?;
        aug.save(dir.join("manifest.csv"))?;
        aug_split.save(dir.join("split.csv"))?;
        println!("ipa {}", counts(&aug_split));
    }
    Ok(())
}

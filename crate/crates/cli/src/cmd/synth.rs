use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wenet_core::corpus::synth::synth_fixture;

use crate::Globals;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Output directory for the store and manifest.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub count: usize,
}

pub fn run(g: &Globals, a: Args) -> anyhow::Result<()> {
    if a.count == 0 {
        return Err(super::usage("--count must be positive"));
    }
    std::fs::create_dir_all(&a.out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let manifest = synth_fixture(&mut rng, a.count, &a.out)?;
    println!(
        "wrote {} segments to {}",
        manifest.len(),
        a.out.join("manifest.csv").display()
    );
    Ok(())
}

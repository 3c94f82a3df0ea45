use std::path::PathBuf;

use wenet_core::net::{self, NetworkConfig};

use crate::Globals;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Describe the canonical architecture (the default).
    #[arg(long, conflicts_with_all = ["tiny", "model"])]
    pub arch: bool,
    /// Describe the reduced desk-scale variant.
    #[arg(long, conflicts_with = "model")]
    pub tiny: bool,
    /// Describe a saved model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

pub fn run(_: &Globals, a: Args) -> anyhow::Result<()> {
    let config = match &a.model {
        Some(path) => {
            let model = net::load::<f32>(path)?;
            println!("model,{}", path.display());
            println!("metric,{}", model.metric);
            println!("mapping,{}", model.mapper.kind());
            println!("seed,{}", model.fingerprint.seed);
            println!("config_hash,{:08x}", model.fingerprint.config_hash);
            println!();
            model.config
        }
        None => super::architecture(a.tiny),
    };
    print!("{}", report(&config)?);
    Ok(())
}

/// Shape trace, dense chain and parameter table as CSV blocks separated by
/// blank lines.
pub fn report(config: &NetworkConfig) -> anyhow::Result<String> {
    use std::fmt::Write;
    let trace = config.trace()?;
    let counts = config.param_counts()?;
    let mut s = String::new();
    writeln!(
        s,
        "section,convs,pool,in_channels,out_channels,rate_hz,spacing_ms,l_in,l_out"
    )?;
    for (i, (sec, t)) in config.sections.iter().zip(&trace).enumerate() {
        let convs: Vec<String> = sec
            .convs
            .iter()
            .map(|c| format!("C-{}-{}", c.filters, c.length))
            .collect();
        writeln!(
            s,
            "S{},{},{}{},{},{},{},{},{},{}",
            i + 1,
            convs.join("+"),
            sec.pool.tag(),
            sec.pool_k,
            t.in_channels,
            t.out_channels,
            t.rate_hz,
            t.spacing_ms,
            t.l_in,
            t.l_out
        )?;
    }
    writeln!(s)?;
    writeln!(s, "layer,in,out")?;
    for (i, (fan_in, fan_out)) in config.dense_dims()?.into_iter().enumerate() {
        writeln!(s, "L{},{fan_in},{fan_out}", i + 1)?;
    }
    writeln!(s)?;
    writeln!(s, "group,params")?;
    for (name, n) in &counts.rows {
        writeln!(s, "{name},{n}")?;
    }
    writeln!(s)?;
    writeln!(s, "conv_extractor,{}", counts.conv_extractor)?;
    writeln!(s, "first_dense,{}", counts.first_dense)?;
    writeln!(s, "dense_head,{}", counts.dense_head)?;
    writeln!(s, "total,{}", counts.total)?;
    Ok(s)
}

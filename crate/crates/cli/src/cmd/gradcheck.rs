use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wenet_core::net::{check_network, NetworkConfig};
use wenet_core::nn::gradcheck::{check_all_layers, Fault, GradReport};

use crate::{Globals, NumericalFailure};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Flip the sign of every analytic gradient; the check must then fail.
    #[arg(long)]
    pub inject_fault: bool,
    /// Accepted for symmetry with the other commands; the end-to-end check
    /// always runs on the desk-scale variant.
    #[arg(long)]
    pub tiny: bool,
    /// Batch size of the end-to-end check.
    #[arg(long, default_value_t = 4)]
    pub batch: usize,
    /// Sampled elements per parameter group.
    #[arg(long, default_value_t = 12)]
    pub per_group: usize,
}

pub fn run(g: &Globals, a: Args) -> anyhow::Result<()> {
    if a.tolerance.is_nan() || a.tolerance <= 0.0 {
        return Err(super::usage("--tolerance must be positive"));
    }
    let fault = if a.inject_fault {
        Fault::FlipSign
    } else {
        Fault::None
    };
    let report = full_report(g.seed, a.batch, a.per_group, fault)?;
    println!("group,checked,max_rel_error,status");
    for c in &report.groups {
        let status = if c.max_rel_error < a.tolerance {
            "ok"
        } else {
            "FAIL"
        };
        println!("{},{},{:.3e},{status}", c.name, c.checked, c.max_rel_error);
    }
    let worst = report.max_rel_error();
    if report.passed(a.tolerance) {
        println!("PASS max relative error {worst:.3e} < {:e}", a.tolerance);
        Ok(())
    } else {
        println!("FAIL max relative error {worst:.3e} >= {:e}", a.tolerance);
        Err(NumericalFailure(format!("gradient check failed ({worst:.3e})")).into())
    }
}

/// Every layer kernel on random shapes, then the tiny network end to end.
pub fn full_report(
    seed: u64,
    batch: usize,
    per_group: usize,
    fault: Fault,
) -> anyhow::Result<GradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = check_all_layers(&mut rng, fault);
    let mut e2e = check_network(&NetworkConfig::tiny(), seed, batch, per_group, fault)?;
    for c in &mut e2e.groups {
        c.name = format!("net.{}", c.name);
    }
    report.extend(e2e);
    Ok(report)
}

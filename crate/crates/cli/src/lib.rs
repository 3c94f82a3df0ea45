//! The `wenet` command line: prepare, split, train, evaluate, predict,
//! inspect, gradcheck and synth.

use std::ffi::OsString;
use std::fmt;

use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

mod cmd;

pub const DEFAULT_SEED: u64 = 0;
pub const SEED_ENV: &str = "WENET_SEED";

#[derive(Debug, Parser)]
#[command(name = "wenet", version, about = "Waveform speech quality estimation")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Precision::F32)]
    pub precision: Precision,

    /// Bitwise reproducible outputs: logs record no wall times. Kernels are
    /// bitwise identical in serial and parallel modes either way.
    #[arg(long, global = true)]
    pub deterministic: bool,

    #[arg(short, long, global = true, conflicts_with = "verbose")]
    pub quiet: bool,

    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mine level-normalized 3 s segments from a directory of WAV files.
    Prepare(cmd::prepare::Args),
    /// Assign entries to train/test/validation, optionally with phase inversion.
    Split(cmd::split::Args),
    /// Train a model for one target metric.
    Train(cmd::train::Args),
    /// Score a labeled set and write metric, pair and histogram CSVs.
    Evaluate(cmd::evaluate::Args),
    /// Score WAV files.
    Predict(cmd::predict::Args),
    /// Print the shape trace and parameter counts.
    Inspect(cmd::inspect::Args),
    /// Compare analytic gradients with finite differences.
    Gradcheck(cmd::gradcheck::Args),
    /// Write a synthetic fixture corpus.
    Synth(cmd::synth::Args),
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Usage = 1,
    Data = 2,
    Numerical = 3,
}

/// Bad flag values detected after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A check or run that finished but failed numerically.
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

pub fn classify(err: &anyhow::Error) -> Exit {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return Exit::Usage;
        }
        if cause.is::<NumericalFailure>() {
            return Exit::Numerical;
        }
        if let Some(e) = cause.downcast_ref::<wenet_core::Error>() {
            return if e.is_numerical() {
                Exit::Numerical
            } else {
                Exit::Data
            };
        }
    }
    Exit::Data
}

/// Global settings shared by every command.
#[derive(Debug, Clone, Copy)]
pub struct Globals {
    pub seed: u64,
    pub precision: Precision,
    pub deterministic: bool,
}

fn init_logging(cli: &Cli) {
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}

pub fn run(cli: Cli, matches: &ArgMatches) -> anyhow::Result<()> {
    init_logging(&cli);
    if matches.value_source("seed") == Some(ValueSource::EnvVariable) {
        log::warn!("seed {} taken from {SEED_ENV}", cli.seed);
    }
    let g = Globals {
        seed: cli.seed,
        precision: cli.precision,
        deterministic: cli.deterministic,
    };
    match cli.command {
        Command::Prepare(a) => cmd::prepare::run(&g, a),
        Command::Split(a) => cmd::split::run(&g, a),
        Command::Train(a) => cmd::train::run(&g, a),
        Command::Evaluate(a) => cmd::evaluate::run(&g, a),
        Command::Predict(a) => cmd::predict::run(&g, a),
        Command::Inspect(a) => cmd::inspect::run(&g, a),
        Command::Gradcheck(a) => cmd::gradcheck::run(&g, a),
        Command::Synth(a) => cmd::synth::run(&g, a),
    }
}

/// Parses `args`, runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Exit::Usage as i32
            } else {
                Exit::Ok as i32
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return Exit::Usage as i32;
        }
    };
    match run(cli, &matches) {
        Ok(()) => Exit::Ok as i32,
        Err(e) => {
            eprintln!("error: {e:#}");
            classify(&e) as i32
        }
    }
}

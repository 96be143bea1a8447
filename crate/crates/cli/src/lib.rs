//! Experiment runner for thermal-drift sampling.
//!
//! Each subcommand reads a flat TOML config (optional), applies flag overrides,
//! runs one experiment and writes CSV/JSON into the output directory.
//! Outputs depend only on the config and seed, not on the thread count.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

pub use config::{Experiment, Overrides, Settings};
pub use error::{CliError, CliResult};

pub const THREADS_ENV: &str = "THERMALDRIFT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "thermaldrift", version, about = "Thermal-drift sampling experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw labelled thermal samples.
    Sample(Overrides),
    /// Trace-distance error against β for several step exponents.
    Scaling(Overrides),
    /// Empirical against theoretical marginal of one coefficient.
    Marginal(Overrides),
    /// Precision against label range as the step exponent varies.
    Tradeoff(Overrides),
    /// Modular gap-ratio statistics of initial and output states.
    Levelstats(Overrides),
    /// Gate-level dilation circuit against the closed-form instrument.
    VerifyCircuit(Overrides),
}

impl Command {
    pub fn split(&self) -> (Experiment, &Overrides) {
        match self {
            Command::Sample(o) => (Experiment::Sample, o),
            Command::Scaling(o) => (Experiment::Scaling, o),
            Command::Marginal(o) => (Experiment::Marginal, o),
            Command::Tradeoff(o) => (Experiment::Tradeoff, o),
            Command::Levelstats(o) => (Experiment::Levelstats, o),
            Command::VerifyCircuit(o) => (Experiment::VerifyCircuit, o),
        }
    }
}

/// Thread count from the flag, else the environment variable.
fn thread_count(flag: Option<usize>) -> CliResult<Option<usize>> {
    if let Some(t) = flag {
        return match t {
            0 => Err(CliError::Validation("--threads: must be at least 1".into())),
            t => Ok(Some(t)),
        };
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(CliError::Validation(format!("{THREADS_ENV}: expected a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

/// Resolves settings and runs the experiment on a dedicated pool.
pub fn run_command(command: &Command) -> CliResult<String> {
    let (experiment, flags) = command.split();
    let settings = Settings::resolve(experiment, flags)?;
    if settings.paper_scale {
        eprintln!("warning: paper-scale step counts can take hours or days per sweep point");
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = thread_count(flags.threads)? {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    pool.install(|| experiments::execute(&settings))
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run_command(&cli.command) {
        Ok(report) => {
            println!("{report}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

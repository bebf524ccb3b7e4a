//! `xsel`: run the simulation experiments, score models on CSV data and
//! check the extra-sample identities by Monte Carlo.
//!
//! Exit codes: 0 success, 1 a verification claim failed, 2 usage or
//! configuration error, 3 runtime failure.

mod error;
mod experiments;
mod select;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "xsel", version, about = "Extra-sample model selection for linear models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Polynomial regression experiment on one input.
    Univariate(experiments::UnivariateArgs),
    /// All-subsets regression experiment on six inputs.
    Multivariate(experiments::MultivariateArgs),
    /// Score candidate models fitted to a CSV dataset.
    Select(select::SelectArgs),
    /// Monte Carlo checks of the extra-sample identities and kappa growth.
    Verify(verify::VerifyArgs),
}

/// Options shared by every subcommand.
#[derive(Debug, Args)]
struct Common {
    /// Random seed; falls back to XSEL_SEED, then the config file, then 7.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl Common {
    fn seed(&self, from_config: Option<u64>) -> Result<u64, CliError> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        if let Ok(v) = std::env::var("XSEL_SEED") {
            return v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("XSEL_SEED is not an unsigned integer: '{v}'")));
        }
        Ok(from_config.unwrap_or(xsel_core::sim::DEFAULT_SEED))
    }

    fn init_threads(&self) -> Result<(), CliError> {
        if let Some(t) = self.threads {
            if t == 0 {
                return Err(CliError::Usage("--threads must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        Ok(())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Univariate(a) => experiments::univariate(a),
        Command::Multivariate(a) => experiments::multivariate(a),
        Command::Select(a) => select::run(a),
        Command::Verify(a) => verify::run(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

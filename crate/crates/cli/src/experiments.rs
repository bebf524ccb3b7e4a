use std::path::PathBuf;
use std::process::ExitCode;

use clap::Args;

use xsel_core::report::{
    multivariate_risk_csv, multivariate_selections_csv, risk_svg, univariate_risk_csv,
    univariate_selections_csv, univariate_summary_csv, Metadata,
};
use xsel_core::sim::{
    run_multivariate, run_univariate, MultivariateConfig, TrainDist, TrainSetting, TruthFn,
    UnivariateConfig, XaicRegime,
};

use crate::error::{read_config, write_outputs, CliError};
use crate::Common;

fn parse_truth(s: &str) -> Result<TruthFn, String> {
    s.parse().map_err(|e: xsel_core::Error| e.to_string())
}

fn parse_train_dist(s: &str) -> Result<TrainDist, String> {
    s.parse().map_err(|e: xsel_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct UnivariateArgs {
    #[command(flatten)]
    common: Common,
    /// True regression function: f1 (linear) or f2 (sinusoid).
    #[arg(long, value_parser = parse_truth)]
    truth: Option<TruthFn>,
    #[arg(long)]
    repeats: Option<usize>,
    /// JSON file with any `UnivariateConfig` fields; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also report the Akaike-weighted FAICc curve.
    #[arg(long)]
    faic_weighted: bool,
}

pub fn univariate(args: UnivariateArgs) -> Result<ExitCode, CliError> {
    let (mut config, file_seed) = match &args.config {
        Some(path) => {
            let c: UnivariateConfig = read_config(path)?;
            let seed = c.seed;
            (c, Some(seed))
        }
        None => (UnivariateConfig::default(), None),
    };
    if let Some(t) = args.truth {
        config.truth = t;
    }
    if let Some(r) = args.repeats {
        config.repeats = r;
    }
    if args.faic_weighted {
        config.faic_weighted = true;
    }
    config.seed = args.common.seed(file_seed)?;
    config.validate().map_err(CliError::usage)?;
    args.common.init_threads()?;

    let report = run_univariate(&config).map_err(CliError::runtime)?;
    if report.redraws > 0 {
        log::warn!("{} degenerate training sets were redrawn", report.redraws);
    }
    let meta = Metadata::for_run(config.seed, &config).map_err(CliError::runtime)?;
    let title = format!("Squared risk, truth {}", config.truth);
    write_outputs(
        &args.common.out,
        &[
            ("risk_curve.csv", univariate_risk_csv(&report, &meta).map_err(CliError::runtime)?),
            ("selections.csv", univariate_selections_csv(&report, &meta).map_err(CliError::runtime)?),
            ("risk_summary.csv", univariate_summary_csv(&report, &meta).map_err(CliError::runtime)?),
            ("figure.svg", risk_svg(&report, &title)),
        ],
    )?;
    for s in report.selections.iter().filter(|s| s.x.is_none()) {
        println!("{:<7} mean selected index {:.2}", s.method, s.mean_index);
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Args)]
pub struct MultivariateArgs {
    #[command(flatten)]
    common: Common,
    /// Run a single setting with this training distribution
    /// (gaussian, uniform or spike-slab).
    #[arg(long, value_parser = parse_train_dist)]
    train_dist: Option<TrainDist>,
    /// Training set size of the single setting.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Use the empirical training distribution as XAICc's test distribution.
    #[arg(long)]
    empirical: bool,
    /// JSON file with any `MultivariateConfig` fields; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn multivariate(args: MultivariateArgs) -> Result<ExitCode, CliError> {
    let (mut config, file_seed) = match &args.config {
        Some(path) => {
            let c: MultivariateConfig = read_config(path)?;
            let seed = c.seed;
            (c, Some(seed))
        }
        None => (MultivariateConfig::default(), None),
    };
    if args.train_dist.is_some() || args.n.is_some() {
        config.settings = vec![TrainSetting {
            dist: args.train_dist.unwrap_or(TrainDist::Gaussian),
            n: args.n.unwrap_or(60),
        }];
    }
    if let Some(r) = args.repeats {
        config.repeats = r;
    }
    if args.empirical {
        config.xaic_regime = XaicRegime::Empirical;
    }
    config.seed = args.common.seed(file_seed)?;
    config.validate().map_err(CliError::usage)?;
    args.common.init_threads()?;

    let report = run_multivariate(&config).map_err(CliError::runtime)?;
    let meta = Metadata::for_run(config.seed, &config).map_err(CliError::runtime)?;
    write_outputs(
        &args.common.out,
        &[
            ("risk_table.csv", multivariate_risk_csv(&report, &meta).map_err(CliError::runtime)?),
            ("selections.csv", multivariate_selections_csv(&report, &meta).map_err(CliError::runtime)?),
        ],
    )?;
    let labels: Vec<String> = report.settings.iter().map(|s| s.setting.label()).collect();
    println!("{:<7} {}", "method", labels.join(" "));
    for (m, method) in report.methods.iter().enumerate() {
        let cells: Vec<String> = report
            .settings
            .iter()
            .zip(&labels)
            .map(|(s, l)| format!("{:>w$.4}", s.risk[m], w = l.len()))
            .collect();
        println!("{method:<7} {}", cells.join(" "));
    }
    Ok(ExitCode::SUCCESS)
}

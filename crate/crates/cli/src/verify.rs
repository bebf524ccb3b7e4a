use std::process::ExitCode;

use clap::Args;

use xsel_core::sim::{
    kappa_bias_mc, mc_extra_sample_error, substream, OracleEstimate, OracleOptions, Purpose,
    TrueModel, TruthFn,
};
use xsel_core::{InputDist, ModelSpec, PolyBasis, VarianceMode};

use crate::error::CliError;
use crate::Common;

/// Below this many replicates the standard errors are too wide to be useful.
const MIN_RELIABLE_REPS: usize = 1000;

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Monte Carlo replicates per check.
    #[arg(long, default_value_t = 100_000)]
    reps: usize,
    /// Added to kappa in the extra-sample checks to test their sensitivity.
    #[arg(long, hide = true, default_value_t = 0.0, allow_negative_numbers = true)]
    kappa_offset: f64,
}

struct Claim {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn identity_claim(name: &'static str, est: &OracleEstimate) -> Claim {
    Claim {
        name,
        pass: est.agrees_within(3.0),
        detail: format!(
            "target {:.4} ± {:.4}, criterion {:.4} ± {:.4}, difference {:.4} ± {:.4}",
            est.lhs, est.lhs_se, est.rhs, est.rhs_se, est.diff, est.diff_se
        ),
    }
}

fn extra_sample(
    variance: VarianceMode,
    n: usize,
    args: &VerifyArgs,
    seed: u64,
) -> xsel_core::Result<OracleEstimate> {
    let spec = ModelSpec::polynomial(2, PolyBasis::Hermite, variance);
    let x = InputDist::standard_gaussian(1).sample(n, &mut substream(seed, 0, 0, Purpose::TrainInputs, 0))?;
    let xp = InputDist::gaussian_iid(1, 0.0, 4.0).sample(10, &mut substream(seed, 0, 0, Purpose::TestInputs, 0))?;
    let truth = TrueModel::new(TruthFn::F1, 0.1)?;
    let opts = OracleOptions {
        kappa_offset: args.kappa_offset,
        ..OracleOptions::new(args.reps, seed)
    };
    mc_extra_sample_error(&spec, &x, &xp, &truth, &opts)
}

pub fn run(args: VerifyArgs) -> Result<ExitCode, CliError> {
    if args.reps < 2 {
        return Err(CliError::Usage("--reps must be at least 2".into()));
    }
    if !args.kappa_offset.is_finite() {
        return Err(CliError::Usage("--kappa-offset must be finite".into()));
    }
    if args.reps < MIN_RELIABLE_REPS {
        log::warn!(
            "{} replicates give wide standard errors; use at least {MIN_RELIABLE_REPS} for a meaningful check",
            args.reps
        );
    }
    let seed = args.common.seed(None)?;
    args.common.init_threads()?;

    let mut claims = Vec::new();
    let known = extra_sample(VarianceMode::Known(0.1), 30, &args, seed).map_err(CliError::runtime)?;
    claims.push(identity_claim("known-variance extra-sample identity", &known));
    let unknown = extra_sample(VarianceMode::Unknown, 25, &args, seed).map_err(CliError::runtime)?;
    claims.push(identity_claim("unknown-variance extra-sample identity", &unknown));

    let ladder: Vec<ModelSpec> = (0..4)
        .map(|p| ModelSpec::subset((0..p).collect(), true, VarianceMode::Known(1.0)))
        .collect();
    let bias = kappa_bias_mc(&ladder, &InputDist::standard_gaussian(3), 30, args.reps, seed)
        .map_err(CliError::runtime)?;
    let steps: Vec<String> = bias
        .diff_mean
        .iter()
        .zip(&bias.diff_se)
        .map(|(d, se)| format!("{d:.4} ± {se:.4}"))
        .collect();
    claims.push(Claim {
        name: "kappa grows by more than one per added Gaussian input",
        pass: bias.diff_mean.iter().zip(&bias.diff_se).all(|(d, se)| d - 1.0 >= 3.0 * se),
        detail: format!("steps {}", steps.join(", ")),
    });
    let means: Vec<String> = bias.mean.iter().map(|m| format!("{m:.4}")).collect();
    claims.push(Claim {
        name: "expected kappa is at least the number of mean parameters",
        // The intercept-only model has κ = 1 exactly; the bound is strict beyond it.
        pass: bias.mean.iter().enumerate().skip(1).all(|(i, m)| *m >= (i + 1) as f64),
        detail: format!("means {}", means.join(", ")),
    });
    let single = [ModelSpec::subset(vec![0], false, VarianceMode::Known(1.0))];
    let boundary = kappa_bias_mc(&single, &InputDist::Rademacher { dim: 1 }, 30, args.reps, seed)
        .map_err(CliError::runtime)?;
    claims.push(Claim {
        name: "kappa equals one for a single sign input",
        pass: (boundary.mean[0] - 1.0).abs() <= (3.0 * boundary.se[0]).max(1e-12),
        detail: format!("mean {:.6} ± {:.2e}", boundary.mean[0], boundary.se[0]),
    });

    for c in &claims {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = claims.iter().filter(|c| !c.pass).count();
    println!("{} of {} checks passed (seed {seed}, {} replicates)", claims.len() - failed, claims.len(), args.reps);
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

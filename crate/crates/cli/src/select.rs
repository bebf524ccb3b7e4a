use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Args;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use xsel_core::criteria::{aic, aicc, bic, faic, faicc, gcv, xaic, xaicc};
use xsel_core::report::{csv_document, Metadata};
use xsel_core::{
    akaike_weights, select, Criterion, CriterionScore, Dataset, FittedModel, InputDist, ModelSpec,
    PolyBasis, TestInputSpec, VarianceMode,
};

use crate::error::{write_outputs, CliError};
use crate::Common;

/// Largest input dimension for which all subsets are enumerated.
const MAX_SUBSET_DIM: usize = 12;

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Headered CSV with feature columns followed by the response column.
    train: PathBuf,
    #[command(flatten)]
    common: Common,
    /// Candidate models: `subsets` (every feature subset plus an intercept)
    /// or `poly:D` (polynomials of degree 0..=D in a single feature).
    #[arg(long, default_value = "subsets")]
    models: String,
    /// Polynomial basis for `poly:D` models.
    #[arg(long, default_value = "hermite", value_parser = ["hermite", "monomial"])]
    basis: String,
    /// Known noise variance; estimated per model when absent.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Comma-separated criteria (AIC, AICc, BIC, GCV, XAIC, XAICc, FAIC, FAICc).
    #[arg(long, value_delimiter = ',')]
    criteria: Vec<String>,
    /// CSV of test inputs (feature columns; a trailing response is ignored).
    #[arg(long, group = "regime")]
    test_csv: Option<PathBuf>,
    /// Test-input distribution, `gaussian:mean,var` for iid features.
    #[arg(long, group = "regime")]
    test_dist: Option<String>,
    /// Gaussian matched to the mean and covariance of the training inputs.
    #[arg(long, group = "regime")]
    smoothed: bool,
    /// Empirical training distribution (XAIC then equals AIC).
    #[arg(long, group = "regime")]
    empirical: bool,
    /// Focus point for FAIC/FAICc. With one feature a comma list gives
    /// several points; otherwise each occurrence is one comma-separated point.
    #[arg(long)]
    focus: Vec<String>,
}

#[derive(Debug, Serialize)]
struct SelectConfig {
    train: String,
    models: String,
    basis: String,
    sigma2: Option<f64>,
    criteria: Vec<String>,
    regime: Option<String>,
    focus: Vec<Vec<f64>>,
}

/// Numeric body of a headered CSV file.
fn read_table(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let fail = |msg: String| CliError::Usage(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| fail(e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| fail(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut cells = Vec::new();
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| fail(e.to_string()))?;
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| fail(format!("row {} column '{}': '{cell}' is not a finite number", i + 1, headers[j])))?;
            cells.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(fail("no data rows".into()));
    }
    Ok(DMatrix::from_row_slice(rows, headers.len(), &cells))
}

fn candidate_models(args: &SelectArgs, dim: usize, variance: VarianceMode) -> Result<Vec<ModelSpec>, CliError> {
    if args.models == "subsets" {
        if dim > MAX_SUBSET_DIM {
            return Err(CliError::Usage(format!(
                "{dim} features give too many subsets; at most {MAX_SUBSET_DIM} are supported"
            )));
        }
        return Ok((0..1usize << dim)
            .map(|mask| {
                let cols = (0..dim).filter(|j| mask >> j & 1 == 1).collect();
                ModelSpec::subset(cols, true, variance)
            })
            .collect());
    }
    let degree: usize = args
        .models
        .strip_prefix("poly:")
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| CliError::Usage(format!("--models must be 'subsets' or 'poly:D', got '{}'", args.models)))?;
    if dim != 1 {
        return Err(CliError::Usage(format!("polynomial models need one feature, found {dim}")));
    }
    let kind = if args.basis == "monomial" { PolyBasis::Monomial } else { PolyBasis::Hermite };
    Ok((0..=degree).map(|d| ModelSpec::polynomial(d, kind, variance)).collect())
}

fn parse_focus(values: &[String], dim: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let mut points = Vec::new();
    for v in values {
        let coords: Vec<f64> = v
            .split(',')
            .map(|c| c.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| CliError::Usage(format!("--focus '{v}' is not a list of numbers")))?;
        if dim == 1 {
            points.extend(coords.into_iter().map(|c| vec![c]));
        } else if coords.len() == dim {
            points.push(coords);
        } else {
            return Err(CliError::Usage(format!(
                "--focus '{v}' has {} coordinates, expected {dim}",
                coords.len()
            )));
        }
    }
    Ok(points)
}

fn parse_test_dist(s: &str, dim: usize) -> Result<InputDist, CliError> {
    let bad = || CliError::Usage(format!("--test-dist must look like 'gaussian:mean,var', got '{s}'"));
    let params = s.strip_prefix("gaussian:").ok_or_else(bad)?;
    let nums: Vec<f64> = params
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [mean, var] = nums[..] else { return Err(bad()) };
    let dist = InputDist::gaussian_iid(dim, mean, var);
    dist.validate().map_err(CliError::usage)?;
    Ok(dist)
}

fn test_spec(args: &SelectArgs, dim: usize) -> Result<Option<(TestInputSpec, String)>, CliError> {
    if let Some(path) = &args.test_csv {
        let t = read_table(path)?;
        let cols = t.ncols();
        if cols != dim && cols != dim + 1 {
            return Err(CliError::Usage(format!(
                "{}: expected {dim} feature columns, found {cols}",
                path.display()
            )));
        }
        let raw = t.columns(0, dim).into_owned();
        return Ok(Some((TestInputSpec::Explicit(raw), format!("test-csv:{}", path.display()))));
    }
    if let Some(s) = &args.test_dist {
        return Ok(Some((TestInputSpec::Distribution(parse_test_dist(s, dim)?), s.clone())));
    }
    if args.smoothed {
        return Ok(Some((TestInputSpec::EmpiricalSmoothed, "smoothed".into())));
    }
    if args.empirical {
        return Ok(Some((TestInputSpec::Empirical, "empirical".into())));
    }
    Ok(None)
}

fn score(criterion: Criterion, fit: &xsel_core::FitResult, kappa: Option<f64>) -> xsel_core::Result<CriterionScore> {
    let kappa = || kappa.expect("kappa computed for test-input criteria");
    match criterion {
        Criterion::Aic => Ok(aic(fit)),
        Criterion::Aicc => aicc(fit),
        Criterion::Bic => Ok(bic(fit)),
        Criterion::Gcv => gcv(fit),
        Criterion::Xaic => xaic(fit, kappa()),
        Criterion::Xaicc => xaicc(fit, kappa()),
        Criterion::Faic => faic(fit, kappa()),
        Criterion::Faicc => faicc(fit, kappa()),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn run(args: SelectArgs) -> Result<ExitCode, CliError> {
    let table = read_table(&args.train)?;
    let cols = table.ncols();
    if cols < 2 {
        return Err(CliError::Usage(format!(
            "{}: need at least one feature column and a response column",
            args.train.display()
        )));
    }
    let dim = cols - 1;
    let inputs = table.columns(0, dim).into_owned();
    let response: DVector<f64> = table.column(dim).into_owned();
    let data = Dataset::new(inputs.clone(), response).map_err(CliError::usage)?;

    let variance = match args.sigma2 {
        Some(s2) if s2 > 0.0 && s2.is_finite() => VarianceMode::Known(s2),
        Some(s2) => return Err(CliError::Usage(format!("--sigma2 must be positive, got {s2}"))),
        None => VarianceMode::Unknown,
    };
    let specs = candidate_models(&args, dim, variance)?;
    let focus = parse_focus(&args.focus, dim)?;
    let regime = test_spec(&args, dim)?;

    let criteria: Vec<Criterion> = if args.criteria.is_empty() {
        let mut c = vec![Criterion::Aic, Criterion::Aicc, Criterion::Bic, Criterion::Gcv];
        if regime.is_some() {
            c.extend([Criterion::Xaic, Criterion::Xaicc]);
        }
        if !focus.is_empty() {
            c.extend([Criterion::Faic, Criterion::Faicc]);
        }
        c
    } else {
        args.criteria
            .iter()
            .map(|s| s.parse::<Criterion>().map_err(CliError::usage))
            .collect::<Result<_, _>>()?
    };
    for c in &criteria {
        if c.is_focused() && focus.is_empty() {
            return Err(CliError::Usage(format!("{c} needs at least one --focus point")));
        }
        if c.needs_test_inputs() && !c.is_focused() && regime.is_none() {
            return Err(CliError::Usage(format!(
                "{c} needs a test-input spec: --test-csv, --test-dist, --smoothed or --empirical"
            )));
        }
    }

    let mut fitted: Vec<(usize, FittedModel)> = Vec::new();
    for (id, spec) in specs.iter().enumerate() {
        match spec.fit(&data) {
            Ok(f) => fitted.push((id, f)),
            Err(e) => log::warn!("excluding model {} ({}): {e}", id + 1, spec.label()),
        }
    }
    if fitted.is_empty() {
        return Err(CliError::Runtime("no candidate model could be fitted".into()));
    }

    let headers = [
        "criterion", "focus", "model_id", "model", "k", "neg2_log_lik", "penalty_k", "penalty_kappa",
        "small_sample_term", "value", "akaike_weight", "selected",
    ];
    let mut rows: Vec<Vec<String>> = Vec::new();
    for &criterion in &criteria {
        let points: Vec<Option<&Vec<f64>>> = if criterion.is_focused() {
            focus.iter().map(Some).collect()
        } else {
            vec![None]
        };
        for point in points {
            let mut scored: Vec<(usize, &FittedModel, CriterionScore)> = Vec::new();
            for (id, model) in &fitted {
                let kappa = if let Some(p) = point {
                    Some(TestInputSpec::Focus(p.clone()).kappa(&model.spec, &model.fit, &inputs))
                } else if criterion.needs_test_inputs() {
                    regime.as_ref().map(|(r, _)| r.kappa(&model.spec, &model.fit, &inputs))
                } else {
                    None
                };
                let result = kappa.transpose().and_then(|k| score(criterion, &model.fit, k));
                match result {
                    Ok(s) => scored.push((*id, model, s.with_model(*id))),
                    Err(e) => log::warn!("{criterion}: excluding model {} ({}): {e}", id + 1, model.spec.label()),
                }
            }
            if scored.is_empty() {
                return Err(CliError::Runtime(format!("{criterion}: no model could be scored")));
            }
            let scores: Vec<CriterionScore> = scored.iter().map(|(_, _, s)| s.clone()).collect();
            let best = select(&scores).map_err(CliError::runtime)?;
            let weights = match criterion {
                Criterion::Gcv => None,
                _ => Some(akaike_weights(&scores).map_err(CliError::runtime)?),
            };
            let focus_label = point
                .map(|p| p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"))
                .unwrap_or_default();
            for (i, (id, model, s)) in scored.iter().enumerate() {
                rows.push(vec![
                    criterion.to_string(),
                    focus_label.clone(),
                    (id + 1).to_string(),
                    model.spec.label(),
                    model.fit.k.to_string(),
                    s.neg2_log_lik.to_string(),
                    s.penalty_k.to_string(),
                    fmt_opt(s.penalty_kappa),
                    fmt_opt(s.small_sample_term),
                    s.value.to_string(),
                    fmt_opt(weights.as_ref().map(|w| w[i])),
                    u8::from(*id == best).to_string(),
                ]);
            }
            let label = specs[best].label();
            match point {
                Some(_) => println!("{criterion:<6} at x={focus_label}: model {} ({label})", best + 1),
                None => println!("{criterion:<6} model {} ({label})", best + 1),
            }
        }
    }

    let config = SelectConfig {
        train: args.train.display().to_string(),
        models: args.models.clone(),
        basis: args.basis.clone(),
        sigma2: args.sigma2,
        criteria: criteria.iter().map(|c| c.to_string()).collect(),
        regime: regime.map(|(_, label)| label),
        focus,
    };
    let seed = args.common.seed(None)?;
    let meta = Metadata::for_run(seed, &config).map_err(CliError::runtime)?;
    let doc = csv_document(&meta, &headers, &rows).map_err(CliError::runtime)?;
    write_outputs(&args.common.out, &[("scores.csv", doc)])?;
    Ok(ExitCode::SUCCESS)
}

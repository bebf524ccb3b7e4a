//! Polynomial-degree selection on one standard-Gaussian input, with risk
//! tracked along a grid of test inputs.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    add_noise, gen_inputs, mean_se, redraw_cap, squared_risk, substream, with_redraws, Purpose,
    TruthFn, DEFAULT_NOISE_VARIANCE, DEFAULT_SEED,
};
use crate::bayes::{gaussian_slab_posterior, model_posterior};
use crate::criteria::{aicc, akaike_weights, bic, faicc, gcv, select, xaicc, CriterionScore};
use crate::dist::InputDist;
use crate::error::{Error, Result};
use crate::linear::{FitResult, LeastSquares, ModelSpec, PolyBasis, VarianceMode};
use crate::moments::second_moment_for_spec;

/// Methods that pick one model per training set, in report order.
pub const GLOBAL_METHODS: [&str; 6] = ["XAICc", "XAICc2", "AICc", "BIC", "BMS", "GCV"];

/// `−4.0, −3.9, …, 4.0`
pub fn default_grid() -> Vec<f64> {
    (-40..=40).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnivariateConfig {
    pub truth: TruthFn,
    pub n: usize,
    pub noise_variance: f64,
    /// Candidate models have degrees `0..=max_degree`.
    pub max_degree: usize,
    pub repeats: usize,
    pub seed: u64,
    pub grid: Vec<f64>,
    /// Test-input variance assumed by XAICc2.
    pub wide_test_variance: f64,
    /// Prior variance of the non-constant Hermite coefficients for BMS/BMA.
    pub slab_variance: f64,
    /// Also report FAICcw, the Akaike-weighted FAICc curve.
    pub faic_weighted: bool,
}

impl Default for UnivariateConfig {
    fn default() -> Self {
        Self {
            truth: TruthFn::F1,
            n: 100,
            noise_variance: DEFAULT_NOISE_VARIANCE,
            max_degree: 6,
            repeats: 100,
            seed: DEFAULT_SEED,
            grid: default_grid(),
            wide_test_variance: 4.0,
            slab_variance: 100.0,
            faic_weighted: false,
        }
    }
}

impl UnivariateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.truth.input_dim() != 1 {
            return Err(Error::InvalidArgument(format!(
                "truth {} is not a function of one input",
                self.truth
            )));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidArgument("repeats must be at least 1".into()));
        }
        // AICc for the largest model needs n > k + 1 with k = degree + 2.
        if self.n < self.max_degree + 4 {
            return Err(Error::InsufficientData {
                n: self.n,
                k: self.max_degree + 4,
            });
        }
        if self.grid.is_empty() || self.grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("grid must be non-empty and finite".into()));
        }
        for (name, v) in [
            ("noise_variance", self.noise_variance),
            ("wide_test_variance", self.wide_test_variance),
            ("slab_variance", self.slab_variance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn methods(&self) -> Vec<String> {
        let mut m: Vec<String> = GLOBAL_METHODS.iter().map(|s| s.to_string()).collect();
        m.push("FAICc".into());
        m.push("BMA".into());
        if self.faic_weighted {
            m.push("FAICcw".into());
        }
        m
    }
}

/// Average selected model index (1-based) of one method, either over the
/// whole run or at one test input for focused methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub method: String,
    pub x: Option<f64>,
    pub mean_index: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateReport {
    pub config: UnivariateConfig,
    pub methods: Vec<String>,
    /// `risk[method][grid point]`, averaged over repeats.
    pub risk: Vec<Vec<f64>>,
    pub risk_se: Vec<Vec<f64>>,
    /// Grid risk averaged with standard-normal density weights.
    pub weighted_risk: Vec<f64>,
    pub selections: Vec<SelectionSummary>,
    /// `selected[method][repeat]` for [`GLOBAL_METHODS`], 1-based.
    pub selected: Vec<Vec<usize>>,
    pub redraws: usize,
}

impl UnivariateReport {
    fn method_index(&self, method: &str) -> Option<usize> {
        self.methods.iter().position(|m| m == method)
    }

    pub fn risk_curve(&self, method: &str) -> Option<&[f64]> {
        self.method_index(method).map(|i| self.risk[i].as_slice())
    }

    pub fn weighted_risk_of(&self, method: &str) -> Option<f64> {
        self.method_index(method).map(|i| self.weighted_risk[i])
    }

    /// Summary for `method`; pass the test input for focused methods.
    pub fn selection(&self, method: &str, x: Option<f64>) -> Option<&SelectionSummary> {
        self.selections.iter().find(|s| {
            s.method == method
                && match (s.x, x) {
                    (None, None) => true,
                    (Some(a), Some(b)) => (a - b).abs() < 1e-9,
                    _ => false,
                }
        })
    }

    /// Position of `x` on the grid.
    pub fn grid_index(&self, x: f64) -> Option<usize> {
        self.config.grid.iter().position(|g| (g - x).abs() < 1e-9)
    }
}

struct Replicate {
    risk: Vec<Vec<f64>>,
    global: Vec<usize>,
    focused: Vec<usize>,
    redraws: usize,
}

struct Setup {
    specs: Vec<ModelSpec>,
    grid_designs: Vec<DMatrix<f64>>,
    moment_narrow: Vec<DMatrix<f64>>,
    moment_wide: Vec<DMatrix<f64>>,
    truth_on_grid: Vec<f64>,
}

pub fn run_univariate(config: &UnivariateConfig) -> Result<UnivariateReport> {
    config.validate()?;
    let specs: Vec<ModelSpec> = (0..=config.max_degree)
        .map(|d| ModelSpec::polynomial(d, PolyBasis::Hermite, VarianceMode::Unknown))
        .collect();
    let grid_raw = DMatrix::from_column_slice(config.grid.len(), 1, &config.grid);
    let narrow = InputDist::standard_gaussian(1);
    let wide = InputDist::gaussian_iid(1, 0.0, config.wide_test_variance);
    let setup = Setup {
        grid_designs: specs
            .iter()
            .map(|s| s.design(&grid_raw).map(|d| d.into_matrix()))
            .collect::<Result<_>>()?,
        moment_narrow: specs
            .iter()
            .map(|s| second_moment_for_spec(s, &narrow))
            .collect::<Result<_>>()?,
        moment_wide: specs
            .iter()
            .map(|s| second_moment_for_spec(s, &wide))
            .collect::<Result<_>>()?,
        truth_on_grid: config.grid.iter().map(|x| config.truth.eval(&[*x])).collect(),
        specs,
    };

    let cap = redraw_cap(config.repeats);
    let reps: Vec<Replicate> = (0..config.repeats)
        .into_par_iter()
        .map(|rep| {
            let (mut r, redraws) =
                with_redraws(cap, |attempt| replicate(config, &setup, rep as u64, attempt))?;
            r.redraws = redraws;
            Ok(r)
        })
        .collect::<Result<_>>()?;

    let redraws: usize = reps.iter().map(|r| r.redraws).sum();
    if redraws > cap {
        return Err(Error::RedrawCapExceeded { redraws, cap });
    }
    if redraws > 0 {
        log::warn!("{redraws} replicate(s) redrawn");
    }
    Ok(summarize(config, reps, redraws))
}

fn replicate(config: &UnivariateConfig, setup: &Setup, rep: u64, attempt: u8) -> Result<Replicate> {
    let mut rng = substream(config.seed, rep, attempt, Purpose::TrainInputs, 0);
    let x = gen_inputs(&InputDist::standard_gaussian(1), config.n, &mut rng)?;
    let mut rng = substream(config.seed, rep, attempt, Purpose::TrainNoise, 0);
    let y = add_noise(&config.truth.eval_rows(&x)?, config.noise_variance, &mut rng)?;

    let mut fits: Vec<FitResult> = Vec::with_capacity(setup.specs.len());
    let mut solvers: Vec<LeastSquares> = Vec::with_capacity(setup.specs.len());
    for spec in &setup.specs {
        let ls = LeastSquares::new(spec.design(&x)?)?;
        fits.push(ls.fit(&y, spec.variance)?);
        solvers.push(ls);
    }
    let preds: Vec<DVector<f64>> = setup
        .grid_designs
        .iter()
        .zip(&fits)
        .map(|(g, f)| g * &f.mu_hat)
        .collect();

    let scored = |f: &dyn Fn(usize, &FitResult) -> Result<CriterionScore>| -> Result<Vec<CriterionScore>> {
        fits.iter()
            .enumerate()
            .map(|(i, fit)| f(i, fit).map(|s| s.with_model(i)))
            .collect()
    };
    let xaicc_narrow = select(&scored(&|i, f| xaicc(f, f.kappa_distribution(&setup.moment_narrow[i])?))?)?;
    let xaicc_wide = select(&scored(&|i, f| xaicc(f, f.kappa_distribution(&setup.moment_wide[i])?))?)?;
    let aicc_pick = select(&scored(&|_, f| aicc(f))?)?;
    let bic_pick = select(&scored(&|_, f| Ok(bic(f)))?)?;
    let gcv_pick = select(&scored(&|_, f| gcv(f))?)?;

    let anchor = fits.last().expect("at least one model").sigma2_hat;
    let posteriors = solvers
        .iter()
        .map(|ls| gaussian_slab_posterior(ls, &y, config.slab_variance, &[0], anchor))
        .collect::<Result<Vec<_>>>()?;
    let summary = model_posterior(&posteriors.iter().map(|p| p.log_marginal).collect::<Vec<_>>())?;
    let bayes_preds: Vec<DVector<f64>> = setup
        .grid_designs
        .iter()
        .zip(&posteriors)
        .map(|(g, p)| g * &p.coefficients)
        .collect();
    let bma: DVector<f64> = bayes_preds
        .iter()
        .zip(&summary.weights)
        .fold(DVector::zeros(config.grid.len()), |acc, (p, w)| acc + p * *w);

    let global = vec![xaicc_narrow, xaicc_wide, aicc_pick, bic_pick, summary.map_model, gcv_pick];
    let m = config.methods().len();
    let g = config.grid.len();
    let mut risk = vec![vec![0.0; g]; m];
    let mut focused = vec![0; g];
    for j in 0..g {
        let truth = setup.truth_on_grid[j];
        for (slot, &pick) in global.iter().enumerate() {
            let pred = if slot == 4 { bayes_preds[pick][j] } else { preds[pick][j] };
            risk[slot][j] = squared_risk(pred, truth);
        }
        let focus_scores = scored(&|i, f| {
            let v = setup.grid_designs[i].row(j).transpose();
            faicc(f, f.kappa_focus(&v)?)
        })?;
        let pick = select(&focus_scores)?;
        focused[j] = pick + 1;
        risk[6][j] = squared_risk(preds[pick][j], truth);
        risk[7][j] = squared_risk(bma[j], truth);
        if config.faic_weighted {
            let w = akaike_weights(&focus_scores)?;
            let pred: f64 = w.iter().zip(&preds).map(|(w, p)| w * p[j]).sum();
            risk[8][j] = squared_risk(pred, truth);
        }
    }
    Ok(Replicate {
        risk,
        global: global.into_iter().map(|i| i + 1).collect(),
        focused,
        redraws: 0,
    })
}

fn summarize(config: &UnivariateConfig, reps: Vec<Replicate>, redraws: usize) -> UnivariateReport {
    let methods = config.methods();
    let g = config.grid.len();
    let mut risk = vec![vec![0.0; g]; methods.len()];
    let mut risk_se = vec![vec![0.0; g]; methods.len()];
    let mut column = vec![0.0; reps.len()];
    for m in 0..methods.len() {
        for j in 0..g {
            for (c, r) in column.iter_mut().zip(&reps) {
                *c = r.risk[m][j];
            }
            let (mean, se) = mean_se(&column);
            risk[m][j] = mean;
            risk_se[m][j] = if se.is_nan() { 0.0 } else { se };
        }
    }

    let density: Vec<f64> = config.grid.iter().map(|x| (-0.5 * x * x).exp()).collect();
    let total: f64 = density.iter().sum();
    let weighted_risk = risk
        .iter()
        .map(|curve| curve.iter().zip(&density).map(|(r, w)| r * w).sum::<f64>() / total)
        .collect();

    let selected: Vec<Vec<usize>> = (0..GLOBAL_METHODS.len())
        .map(|m| reps.iter().map(|r| r.global[m]).collect())
        .collect();
    let mut selections: Vec<SelectionSummary> = GLOBAL_METHODS
        .iter()
        .zip(&selected)
        .map(|(name, picks)| index_summary(name, None, picks))
        .collect();
    for (j, x) in config.grid.iter().enumerate() {
        let picks: Vec<usize> = reps.iter().map(|r| r.focused[j]).collect();
        selections.push(index_summary("FAICc", Some(*x), &picks));
    }

    UnivariateReport {
        config: config.clone(),
        methods,
        risk,
        risk_se,
        weighted_risk,
        selections,
        selected,
        redraws,
    }
}

fn index_summary(method: &str, x: Option<f64>, picks: &[usize]) -> SelectionSummary {
    let values: Vec<f64> = picks.iter().map(|&p| p as f64).collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    SelectionSummary {
        method: method.to_string(),
        x,
        mean_index: mean,
        variance,
    }
}

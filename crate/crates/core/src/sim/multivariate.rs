//! All-subsets selection over six inputs, scored by squared risk on a fresh
//! standard-Gaussian test set.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    add_noise, gen_inputs, mean_se, redraw_cap, squared_risk, substream, with_redraws, Purpose,
    TruthFn, DEFAULT_NOISE_VARIANCE, DEFAULT_SEED,
};
use crate::bayes::{jeffreys_from_fit, model_posterior};
use crate::criteria::{aicc, akaike_weights, bic, faicc, gcv, select, xaicc, CriterionScore};
use crate::dist::InputDist;
use crate::error::{Error, Result};
use crate::linear::{FitResult, LeastSquares, ModelSpec, VarianceMode};
use crate::moments::second_moment_for_spec;

pub const METHODS: [&str; 11] = [
    "XAICc", "FAICc", "AICc", "BIC", "BMS", "GCV", "XAICcw", "FAICcw", "AICcw", "BICw", "BMA",
];
/// Methods in [`METHODS`] that select a single model.
pub const SELECTION_METHODS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainDist {
    Gaussian,
    Uniform,
    SpikeSlab,
}

impl TrainDist {
    pub fn name(&self) -> &'static str {
        match self {
            TrainDist::Gaussian => "gaussian",
            TrainDist::Uniform => "uniform",
            TrainDist::SpikeSlab => "spike-slab",
        }
    }

    pub fn input_dist(&self, dim: usize) -> InputDist {
        match self {
            TrainDist::Gaussian => InputDist::standard_gaussian(dim),
            TrainDist::Uniform => InputDist::standardized_uniform(dim),
            TrainDist::SpikeSlab => InputDist::spike_slab(dim),
        }
    }

    pub fn variant(&self) -> u8 {
        *self as u8
    }
}

impl fmt::Display for TrainDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrainDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "gaussian" => Ok(TrainDist::Gaussian),
            "uniform" => Ok(TrainDist::Uniform),
            "spike-slab" | "spike-and-slab" => Ok(TrainDist::SpikeSlab),
            _ => Err(Error::InvalidArgument(format!("unknown training distribution '{s}'"))),
        }
    }
}

/// Training sets of one distribution share a random stream, so a larger `n`
/// extends the smaller set rather than replacing it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainSetting {
    pub dist: TrainDist,
    pub n: usize,
}

impl TrainSetting {
    pub fn label(&self) -> String {
        format!("{}-n{}", self.dist, self.n)
    }
}

/// How XAICc learns about the test inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XaicRegime {
    /// The true test-input distribution.
    Distribution,
    /// The empirical distribution of the training inputs, which makes XAICc
    /// coincide with AICc.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultivariateConfig {
    pub settings: Vec<TrainSetting>,
    pub repeats: usize,
    pub seed: u64,
    pub n_test: usize,
    pub noise_variance: f64,
    pub dim: usize,
    pub xaic_regime: XaicRegime,
}

impl Default for MultivariateConfig {
    fn default() -> Self {
        let s = |dist, n| TrainSetting { dist, n };
        Self {
            settings: vec![
                s(TrainDist::Gaussian, 60),
                s(TrainDist::Uniform, 60),
                s(TrainDist::SpikeSlab, 60),
                s(TrainDist::Gaussian, 100),
            ],
            repeats: 50,
            seed: DEFAULT_SEED,
            n_test: 400,
            noise_variance: DEFAULT_NOISE_VARIANCE,
            dim: 6,
            xaic_regime: XaicRegime::Distribution,
        }
    }
}

impl MultivariateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(TruthFn::FMulti.input_dim()..=10).contains(&self.dim) {
            return Err(Error::InvalidArgument(format!(
                "dim must be between {} and 10, got {}",
                TruthFn::FMulti.input_dim(),
                self.dim
            )));
        }
        if self.settings.is_empty() {
            return Err(Error::InvalidArgument("no training settings".into()));
        }
        if self.repeats == 0 || self.n_test == 0 {
            return Err(Error::InvalidArgument("repeats and n_test must be at least 1".into()));
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise_variance must be positive, got {}",
                self.noise_variance
            )));
        }
        for s in &self.settings {
            // AICc for the full model needs n > k + 1 with k = dim + 2.
            if s.n < self.dim + 4 {
                return Err(Error::InsufficientData { n: s.n, k: self.dim + 4 });
            }
        }
        Ok(())
    }

    /// Every subset of the inputs plus an intercept; model `i` uses the
    /// inputs whose bits are set in `i`.
    pub fn models(&self) -> Vec<ModelSpec> {
        (0..1usize << self.dim)
            .map(|mask| {
                let cols = (0..self.dim).filter(|j| mask >> j & 1 == 1).collect();
                ModelSpec::subset(cols, true, VarianceMode::Unknown)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingReport {
    pub setting: TrainSetting,
    /// Mean squared risk per method, averaged over the test set and repeats.
    pub risk: Vec<f64>,
    pub risk_se: Vec<f64>,
    /// `per_repeat[method][repeat]`: test-set mean squared risk.
    pub per_repeat: Vec<Vec<f64>>,
    /// Mean 1-based model index for the selection methods.
    pub mean_selected_index: Vec<f64>,
    pub redraws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultivariateReport {
    pub config: MultivariateConfig,
    pub methods: Vec<String>,
    pub settings: Vec<SettingReport>,
}

impl MultivariateReport {
    pub fn setting(&self, label: &str) -> Option<&SettingReport> {
        self.settings.iter().find(|s| s.setting.label() == label)
    }

    pub fn risk(&self, label: &str, method: &str) -> Option<f64> {
        let m = self.methods.iter().position(|x| x == method)?;
        self.setting(label).map(|s| s.risk[m])
    }
}

struct TestSet {
    truth: DVector<f64>,
    designs: Vec<DMatrix<f64>>,
}

struct Outcome {
    risk: [f64; METHODS.len()],
    selected: [f64; SELECTION_METHODS],
}

pub fn run_multivariate(config: &MultivariateConfig) -> Result<MultivariateReport> {
    config.validate()?;
    let models = config.models();
    let test_dist = InputDist::standard_gaussian(config.dim);
    let moments: Vec<DMatrix<f64>> = models
        .iter()
        .map(|m| second_moment_for_spec(m, &test_dist))
        .collect::<Result<_>>()?;
    let cap = redraw_cap(config.repeats);

    let per_repeat: Vec<Vec<(Outcome, usize)>> = (0..config.repeats)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(config.seed, rep as u64, 0, Purpose::TestInputs, 0);
            let raw = gen_inputs(&test_dist, config.n_test, &mut rng)?;
            let test = TestSet {
                truth: TruthFn::FMulti.eval_rows(&raw)?,
                designs: models
                    .iter()
                    .map(|m| m.design(&raw).map(|d| d.into_matrix()))
                    .collect::<Result<_>>()?,
            };
            config
                .settings
                .iter()
                .map(|s| {
                    with_redraws(cap, |attempt| {
                        replicate(config, s, &models, &moments, &test, rep as u64, attempt)
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut settings = Vec::with_capacity(config.settings.len());
    for (si, setting) in config.settings.iter().enumerate() {
        let redraws: usize = per_repeat.iter().map(|r| r[si].1).sum();
        if redraws > cap {
            return Err(Error::RedrawCapExceeded { redraws, cap });
        }
        let columns: Vec<Vec<f64>> = (0..METHODS.len())
            .map(|m| per_repeat.iter().map(|r| r[si].0.risk[m]).collect())
            .collect();
        let (risk, risk_se): (Vec<f64>, Vec<f64>) = columns
            .iter()
            .map(|c| {
                let (mean, se) = mean_se(c);
                (mean, if se.is_nan() { 0.0 } else { se })
            })
            .unzip();
        let mean_selected_index = (0..SELECTION_METHODS)
            .map(|m| {
                per_repeat.iter().map(|r| r[si].0.selected[m]).sum::<f64>() / config.repeats as f64
            })
            .collect();
        settings.push(SettingReport {
            setting: *setting,
            risk,
            risk_se,
            per_repeat: columns,
            mean_selected_index,
            redraws,
        });
    }
    Ok(MultivariateReport {
        config: config.clone(),
        methods: METHODS.iter().map(|s| s.to_string()).collect(),
        settings,
    })
}

fn replicate(
    config: &MultivariateConfig,
    setting: &TrainSetting,
    models: &[ModelSpec],
    moments: &[DMatrix<f64>],
    test: &TestSet,
    rep: u64,
    attempt: u8,
) -> Result<Outcome> {
    let variant = setting.dist.variant();
    let mut rng = substream(config.seed, rep, attempt, Purpose::TrainInputs, variant);
    let x = gen_inputs(&setting.dist.input_dist(config.dim), setting.n, &mut rng)?;
    let mut rng = substream(config.seed, rep, attempt, Purpose::TrainNoise, variant);
    let y = add_noise(&TruthFn::FMulti.eval_rows(&x)?, config.noise_variance, &mut rng)?;

    let mut fits: Vec<FitResult> = Vec::with_capacity(models.len());
    let mut log_marginals = Vec::with_capacity(models.len());
    for spec in models {
        let ls = LeastSquares::new(spec.design(&x)?)?;
        let fit = ls.fit(&y, spec.variance)?;
        log_marginals.push(jeffreys_from_fit(&fit, ls.log_det_gram()));
        fits.push(fit);
    }
    let preds: Vec<DVector<f64>> = test.designs.iter().zip(&fits).map(|(d, f)| d * &f.mu_hat).collect();
    let leverages: Vec<DVector<f64>> = test
        .designs
        .iter()
        .zip(&fits)
        .map(|(d, f)| (d * &f.gram_inv).component_mul(d).column_sum())
        .collect();

    let scored = |f: &dyn Fn(usize, &FitResult) -> Result<CriterionScore>| -> Result<Vec<CriterionScore>> {
        fits.iter()
            .enumerate()
            .map(|(i, fit)| f(i, fit).map(|s| s.with_model(i)))
            .collect()
    };
    let xaicc_scores = scored(&|i, f| {
        let kappa = match config.xaic_regime {
            XaicRegime::Distribution => f.kappa_distribution(&moments[i])?,
            XaicRegime::Empirical => f.kappa_empirical(),
        };
        xaicc(f, kappa)
    })?;
    let aicc_scores = scored(&|_, f| aicc(f))?;
    let bic_scores = scored(&|_, f| Ok(bic(f)))?;
    let gcv_scores = scored(&|_, f| gcv(f))?;
    let posterior = model_posterior(&log_marginals)?;

    let picks = [
        select(&xaicc_scores)?,
        select(&aicc_scores)?,
        select(&bic_scores)?,
        posterior.map_model,
        select(&gcv_scores)?,
    ];
    let weights = [
        akaike_weights(&xaicc_scores)?,
        akaike_weights(&aicc_scores)?,
        akaike_weights(&bic_scores)?,
        posterior.weights.clone(),
    ];

    let n_test = test.truth.len();
    let mut risk = [0.0; METHODS.len()];
    let mut faicc_index = 0.0;
    for t in 0..n_test {
        let truth = test.truth[t];
        let focus = scored(&|i, f| faicc(f, f.n as f64 * leverages[i][t] + 1.0))?;
        let focus_pick = select(&focus)?;
        faicc_index += (focus_pick + 1) as f64;
        let focus_weights = akaike_weights(&focus)?;
        let averaged = |w: &[f64]| -> f64 { w.iter().zip(&preds).map(|(w, p)| w * p[t]).sum() };

        let point = [
            preds[picks[0]][t],
            preds[focus_pick][t],
            preds[picks[1]][t],
            preds[picks[2]][t],
            preds[picks[3]][t],
            preds[picks[4]][t],
            averaged(&weights[0]),
            averaged(&focus_weights),
            averaged(&weights[1]),
            averaged(&weights[2]),
            averaged(&weights[3]),
        ];
        for (r, p) in risk.iter_mut().zip(point) {
            *r += squared_risk(p, truth);
        }
    }
    for r in risk.iter_mut() {
        *r /= n_test as f64;
    }
    let index = |p: usize| (p + 1) as f64;
    Ok(Outcome {
        risk,
        selected: [
            index(picks[0]),
            faicc_index / n_test as f64,
            index(picks[1]),
            index(picks[2]),
            index(picks[3]),
            index(picks[4]),
        ],
    })
}

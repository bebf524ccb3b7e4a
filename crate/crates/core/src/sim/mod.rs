//! Seeded data generation, Monte Carlo oracles and experiment runners.
//!
//! Every random draw comes from a ChaCha8 stream selected by
//! `(seed, repeat, attempt, purpose)`, so a replicate's data do not depend on
//! which thread ran it or on how many replicates ran before it.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dist::InputDist;
use crate::error::{Error, Result};

pub mod multivariate;
pub mod oracle;
pub mod univariate;

pub use multivariate::{
    run_multivariate, MultivariateConfig, MultivariateReport, SettingReport, TrainDist,
    TrainSetting, XaicRegime,
};
pub use oracle::{kappa_bias_mc, mc_extra_sample_error, KappaBias, OracleEstimate, OracleOptions};
pub use univariate::{run_univariate, SelectionSummary, UnivariateConfig, UnivariateReport};

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_NOISE_VARIANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruthFn {
    /// `x + 2`
    F1,
    /// `|x|`
    F2,
    /// `2 + u₁ + 0.1u₂ + 0.03u₃ + 0.001u₄ + 0.003u₅`
    FMulti,
}

impl TruthFn {
    pub fn name(&self) -> &'static str {
        match self {
            TruthFn::F1 => "f1",
            TruthFn::F2 => "f2",
            TruthFn::FMulti => "fmulti",
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            TruthFn::F1 | TruthFn::F2 => 1,
            TruthFn::FMulti => 5,
        }
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        match self {
            TruthFn::F1 => u[0] + 2.0,
            TruthFn::F2 => u[0].abs(),
            TruthFn::FMulti => 2.0 + u[0] + 0.1 * u[1] + 0.03 * u[2] + 0.001 * u[3] + 0.003 * u[4],
        }
    }

    /// Truth at every row of `inputs`.
    pub fn eval_rows(&self, inputs: &DMatrix<f64>) -> Result<DVector<f64>> {
        if inputs.ncols() < self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: inputs.ncols(),
            });
        }
        let mut row = vec![0.0; inputs.ncols()];
        Ok(DVector::from_fn(inputs.nrows(), |i, _| {
            for (j, r) in row.iter_mut().enumerate() {
                *r = inputs[(i, j)];
            }
            self.eval(&row)
        }))
    }
}

impl fmt::Display for TruthFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TruthFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f1" => Ok(TruthFn::F1),
            "f2" => Ok(TruthFn::F2),
            "fmulti" => Ok(TruthFn::FMulti),
            _ => Err(Error::InvalidArgument(format!("unknown truth '{s}'"))),
        }
    }
}

/// A regression function plus iid Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueModel {
    pub f: TruthFn,
    pub noise_variance: f64,
}

impl TrueModel {
    pub fn new(f: TruthFn, noise_variance: f64) -> Result<Self> {
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {noise_variance}"
            )));
        }
        Ok(Self { f, noise_variance })
    }
}

/// Tags separating the random streams used within one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    TrainInputs = 1,
    TrainNoise = 2,
    TestInputs = 3,
    TestNoise = 4,
}

/// RNG for one `(repeat, attempt, purpose, variant)` cell under `seed`.
/// `variant` (< 16) distinguishes otherwise identical purposes, such as the
/// training sets of different input distributions.
pub fn substream(seed: u64, repeat: u64, attempt: u8, purpose: Purpose, variant: u8) -> ChaCha8Rng {
    debug_assert!(variant < 16 && repeat < 1 << 48);
    let tag = (purpose as u64) | ((variant as u64) << 4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((repeat << 16) | ((attempt as u64) << 8) | tag);
    rng
}

pub fn gen_inputs<R: rand::Rng + ?Sized>(dist: &InputDist, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    dist.sample(n, rng)
}

pub fn gen_outputs<R: rand::Rng + ?Sized>(
    truth: &TrueModel,
    inputs: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    add_noise(&truth.f.eval_rows(inputs)?, truth.noise_variance, rng)
}

pub(crate) fn add_noise<R: rand::Rng + ?Sized>(
    mean: &DVector<f64>,
    noise_variance: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let noise = Normal::new(0.0, noise_variance.sqrt())
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(mean.map(|m| m + noise.sample(rng)))
}

pub fn squared_risk(prediction: f64, truth_value: f64) -> f64 {
    let d = prediction - truth_value;
    d * d
}

/// Redraw budget for a run of `repeats` replicates: 1%, at least one.
pub fn redraw_cap(repeats: usize) -> usize {
    repeats.div_ceil(100).max(1)
}

/// Runs `attempt` with increasing attempt numbers until it succeeds, giving
/// up after `cap` redraws. Only data-dependent failures trigger a redraw.
pub(crate) fn with_redraws<T>(
    cap: usize,
    mut attempt: impl FnMut(u8) -> Result<T>,
) -> Result<(T, usize)> {
    let mut redraws = 0;
    loop {
        match attempt(redraws as u8) {
            Ok(v) => return Ok((v, redraws)),
            Err(Error::SingularDesign { .. } | Error::DegenerateFit { .. }) if redraws < cap.min(255) => {
                log::warn!("degenerate replicate, redrawing (attempt {})", redraws + 1);
                redraws += 1;
            }
            Err(Error::SingularDesign { .. } | Error::DegenerateFit { .. }) => {
                return Err(Error::RedrawCapExceeded { redraws: redraws + 1, cap })
            }
            Err(e) => return Err(e),
        }
    }
}

/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

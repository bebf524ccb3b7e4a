//! The `κ` penalty in its test-input regimes and the information criteria
//! built on it.
//!
//! For a Gaussian linear model with training design `X` (n × k_μ) and test
//! design `X′` (n′ × k_μ),
//!
//! ```text
//! κ = (n/n′) · trace(X′ᵀX′ (XᵀX)⁻¹)        (+1 when σ² is estimated)
//! ```
//!
//! XAIC is `−2 log L + k + κ`; AIC is the special case `κ = k`, which is what
//! `κ` evaluates to when the test inputs are the training inputs. The
//! small-sample version adds `(k + κ)(k + 1)/(n − k − 1)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dist::{check_psd, InputDist};
use crate::error::{Error, Result};
use crate::linear::{DesignMatrix, FitResult, LeastSquares, ModelSpec, VarianceMode};
use crate::moments::second_moment_for_spec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Aicc,
    Bic,
    Gcv,
    Xaic,
    Xaicc,
    Faic,
    Faicc,
}

impl Criterion {
    pub const ALL: [Criterion; 8] = [
        Criterion::Aic,
        Criterion::Aicc,
        Criterion::Bic,
        Criterion::Gcv,
        Criterion::Xaic,
        Criterion::Xaicc,
        Criterion::Faic,
        Criterion::Faicc,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Criterion::Aic => "AIC",
            Criterion::Aicc => "AICc",
            Criterion::Bic => "BIC",
            Criterion::Gcv => "GCV",
            Criterion::Xaic => "XAIC",
            Criterion::Xaicc => "XAICc",
            Criterion::Faic => "FAIC",
            Criterion::Faicc => "FAICc",
        }
    }

    /// Whether the criterion needs some knowledge of the test inputs.
    pub fn needs_test_inputs(&self) -> bool {
        matches!(
            self,
            Criterion::Xaic | Criterion::Xaicc | Criterion::Faic | Criterion::Faicc
        )
    }

    pub fn is_focused(&self) -> bool {
        matches!(self, Criterion::Faic | Criterion::Faicc)
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown criterion '{s}'")))
    }
}

/// A criterion value with its penalty decomposition.
///
/// For every criterion except GCV,
/// `value = neg2_log_lik + penalty_k + penalty_kappa + small_sample_term`
/// (absent terms count as zero). GCV's value is `(rss/n)/(1 − k_μ/n)²`, and
/// its `penalty_k` records `k_μ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionScore {
    pub criterion: Criterion,
    pub model_id: usize,
    pub value: f64,
    pub neg2_log_lik: f64,
    pub penalty_k: f64,
    pub penalty_kappa: Option<f64>,
    pub small_sample_term: Option<f64>,
    /// `n·log(2πσ²)` for known-variance fits: the offset between
    /// `−2 log L` and `RSS/σ²`.
    pub likelihood_constant: Option<f64>,
    pub known_variance: bool,
}

impl CriterionScore {
    fn base(criterion: Criterion, fit: &FitResult) -> Self {
        let likelihood_constant = match fit.variance {
            VarianceMode::Known(s2) => {
                Some(fit.n as f64 * (2.0 * std::f64::consts::PI * s2).ln())
            }
            VarianceMode::Unknown => None,
        };
        Self {
            criterion,
            model_id: 0,
            value: f64::NAN,
            neg2_log_lik: fit.neg2_log_lik(),
            penalty_k: 0.0,
            penalty_kappa: None,
            small_sample_term: None,
            likelihood_constant,
            known_variance: fit.variance.is_known(),
        }
    }

    pub fn with_model(mut self, model_id: usize) -> Self {
        self.model_id = model_id;
        self
    }
}

fn small_sample_denominator(fit: &FitResult) -> Result<f64> {
    if fit.n <= fit.k + 1 {
        return Err(Error::SmallSample { n: fit.n, k: fit.k });
    }
    Ok((fit.n - fit.k - 1) as f64)
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "kappa must be finite and nonnegative, got {kappa}"
        )));
    }
    Ok(())
}

// The penalty sum `k + κ` is formed first in both AIC and XAIC so that
// κ = k reproduces AIC bit for bit.
fn extra_sample(criterion: Criterion, fit: &FitResult, kappa: f64) -> Result<CriterionScore> {
    check_kappa(kappa)?;
    let k = fit.k as f64;
    let mut score = CriterionScore::base(criterion, fit);
    score.penalty_k = k;
    score.penalty_kappa = Some(kappa);
    score.value = score.neg2_log_lik + (k + kappa);
    Ok(score)
}

fn extra_sample_corrected(
    criterion: Criterion,
    fit: &FitResult,
    kappa: f64,
) -> Result<CriterionScore> {
    check_kappa(kappa)?;
    let denom = small_sample_denominator(fit)?;
    let k = fit.k as f64;
    let penalty = k + kappa;
    let correction = penalty * (k + 1.0) / denom;
    let mut score = CriterionScore::base(criterion, fit);
    score.penalty_k = k;
    score.penalty_kappa = Some(kappa);
    score.small_sample_term = Some(correction);
    score.value = score.neg2_log_lik + penalty + correction;
    Ok(score)
}

/// `−2 log L + k + κ`.
pub fn xaic(fit: &FitResult, kappa: f64) -> Result<CriterionScore> {
    extra_sample(Criterion::Xaic, fit, kappa)
}

/// `−2 log L + k + κ + (k + κ)(k + 1)/(n − k − 1)`.
pub fn xaicc(fit: &FitResult, kappa: f64) -> Result<CriterionScore> {
    extra_sample_corrected(Criterion::Xaicc, fit, kappa)
}

/// XAIC with `κ` taken at a single focus point.
pub fn faic(fit: &FitResult, kappa_at_focus: f64) -> Result<CriterionScore> {
    extra_sample(Criterion::Faic, fit, kappa_at_focus)
}

pub fn faicc(fit: &FitResult, kappa_at_focus: f64) -> Result<CriterionScore> {
    extra_sample_corrected(Criterion::Faicc, fit, kappa_at_focus)
}

/// `−2 log L + 2k`.
pub fn aic(fit: &FitResult) -> CriterionScore {
    let k = fit.k as f64;
    let mut score = CriterionScore::base(Criterion::Aic, fit);
    score.penalty_k = 2.0 * k;
    score.value = score.neg2_log_lik + 2.0 * k;
    score
}

/// `−2 log L + 2k + 2k(k + 1)/(n − k − 1)`.
pub fn aicc(fit: &FitResult) -> Result<CriterionScore> {
    let denom = small_sample_denominator(fit)?;
    let k = fit.k as f64;
    let penalty = 2.0 * k;
    let correction = penalty * (k + 1.0) / denom;
    let mut score = CriterionScore::base(Criterion::Aicc, fit);
    score.penalty_k = penalty;
    score.small_sample_term = Some(correction);
    score.value = score.neg2_log_lik + penalty + correction;
    Ok(score)
}

/// `−2 log L + k·log n`.
pub fn bic(fit: &FitResult) -> CriterionScore {
    let penalty = fit.k as f64 * (fit.n as f64).ln();
    let mut score = CriterionScore::base(Criterion::Bic, fit);
    score.penalty_k = penalty;
    score.value = score.neg2_log_lik + penalty;
    score
}

/// Generalised cross-validation `(rss/n)/(1 − k_μ/n)²`, with `k_μ` the trace
/// of the hat matrix.
pub fn gcv(fit: &FitResult) -> Result<CriterionScore> {
    gcv_value(fit.rss, fit.n, fit.k_mu()).map(|value| {
        let mut score = CriterionScore::base(Criterion::Gcv, fit);
        score.penalty_k = fit.k_mu() as f64;
        score.value = value;
        score
    })
}

pub(crate) fn gcv_value(rss: f64, n: usize, k_mu: usize) -> Result<f64> {
    if n <= k_mu {
        return Err(Error::InsufficientData { n, k: k_mu });
    }
    let nf = n as f64;
    let shrink = 1.0 - k_mu as f64 / nf;
    Ok((rss / nf) / (shrink * shrink))
}

fn variance_offset(variance: VarianceMode) -> f64 {
    variance.extra_params() as f64
}

impl FitResult {
    /// `κ` for an explicit test design.
    pub fn kappa_explicit(&self, xprime: &DesignMatrix) -> Result<f64> {
        if xprime.ncols() != self.k_mu() {
            return Err(Error::DimensionMismatch {
                expected: self.k_mu(),
                found: xprime.ncols(),
            });
        }
        if xprime.nrows() == 0 {
            return Err(Error::InvalidArgument("test design has no rows".into()));
        }
        let xp = xprime.as_matrix();
        let trace = (xp * &self.gram_inv).component_mul(xp).sum();
        Ok(self.n as f64 / xprime.nrows() as f64 * trace + variance_offset(self.variance))
    }

    /// `κ` at a single test design vector: `n·xᵀ(XᵀX)⁻¹x` (+1).
    pub fn kappa_focus(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.n as f64 * self.leverage(x)? + variance_offset(self.variance))
    }

    /// Expected `κ` under a test distribution with design-basis second
    /// moment `E[x xᵀ]`: `n·trace(E[x xᵀ](XᵀX)⁻¹)` (+1).
    pub fn kappa_distribution(&self, second_moment: &DMatrix<f64>) -> Result<f64> {
        if second_moment.nrows() != self.k_mu() || second_moment.ncols() != self.k_mu() {
            return Err(Error::DimensionMismatch {
                expected: self.k_mu(),
                found: second_moment.nrows(),
            });
        }
        check_psd(second_moment)?;
        let trace = second_moment.component_mul(&self.gram_inv).sum();
        Ok(self.n as f64 * trace + variance_offset(self.variance))
    }

    /// `κ` when the test inputs follow the empirical distribution of the
    /// training inputs. `trace(I_kμ) = k_μ` exactly, so this equals `k`.
    pub fn kappa_empirical(&self) -> f64 {
        self.k as f64
    }
}

/// `κ` for an explicit test design, factorising `X` first.
pub fn kappa_explicit(
    design: &DesignMatrix,
    xprime: &DesignMatrix,
    variance: VarianceMode,
) -> Result<f64> {
    let ls = LeastSquares::new(design.clone())?;
    kappa_from_parts(ls.gram_inv(), design.nrows(), variance, |g, n| {
        let xp = xprime.as_matrix();
        if xp.ncols() != g.nrows() {
            return Err(Error::DimensionMismatch {
                expected: g.nrows(),
                found: xp.ncols(),
            });
        }
        if xp.nrows() == 0 {
            return Err(Error::InvalidArgument("test design has no rows".into()));
        }
        Ok(n as f64 / xp.nrows() as f64 * (xp * g).component_mul(xp).sum())
    })
}

pub fn kappa_focus(design: &DesignMatrix, x: &DVector<f64>, variance: VarianceMode) -> Result<f64> {
    let ls = LeastSquares::new(design.clone())?;
    kappa_from_parts(ls.gram_inv(), design.nrows(), variance, |g, n| {
        if x.len() != g.nrows() {
            return Err(Error::DimensionMismatch {
                expected: g.nrows(),
                found: x.len(),
            });
        }
        Ok(n as f64 * x.dot(&(g * x)))
    })
}

pub fn kappa_distribution(
    design: &DesignMatrix,
    second_moment: &DMatrix<f64>,
    variance: VarianceMode,
) -> Result<f64> {
    let ls = LeastSquares::new(design.clone())?;
    kappa_from_parts(ls.gram_inv(), design.nrows(), variance, |g, n| {
        if second_moment.shape() != g.shape() {
            return Err(Error::DimensionMismatch {
                expected: g.nrows(),
                found: second_moment.nrows(),
            });
        }
        check_psd(second_moment)?;
        Ok(n as f64 * second_moment.component_mul(g).sum())
    })
}

fn kappa_from_parts(
    gram_inv: &DMatrix<f64>,
    n: usize,
    variance: VarianceMode,
    trace_term: impl FnOnce(&DMatrix<f64>, usize) -> Result<f64>,
) -> Result<f64> {
    Ok(trace_term(gram_inv, n)? + variance_offset(variance))
}

/// What is known about the test inputs when `κ` is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum TestInputSpec {
    /// The raw test inputs themselves (`n′ × d`).
    Explicit(DMatrix<f64>),
    /// A raw-input distribution, mapped to the design basis in closed form.
    Distribution(InputDist),
    /// `E[x xᵀ]` already expressed in the model's design basis.
    SecondMoment(DMatrix<f64>),
    /// A single raw test point.
    Focus(Vec<f64>),
    /// Moment-matched Gaussian fitted to the raw training inputs.
    EmpiricalSmoothed,
    /// The empirical distribution of the training inputs (recovers AIC).
    Empirical,
}

impl TestInputSpec {
    pub fn kappa(
        &self,
        spec: &ModelSpec,
        fit: &FitResult,
        train_inputs: &DMatrix<f64>,
    ) -> Result<f64> {
        match self {
            TestInputSpec::Explicit(raw) => fit.kappa_explicit(&spec.design(raw)?),
            TestInputSpec::Distribution(dist) => {
                fit.kappa_distribution(&second_moment_for_spec(spec, dist)?)
            }
            TestInputSpec::SecondMoment(m) => fit.kappa_distribution(m),
            TestInputSpec::Focus(point) => fit.kappa_focus(&spec.design_vector(point)?),
            TestInputSpec::EmpiricalSmoothed => {
                let dist = InputDist::moment_matched(train_inputs)?;
                fit.kappa_distribution(&second_moment_for_spec(spec, &dist)?)
            }
            TestInputSpec::Empirical => Ok(fit.kappa_empirical()),
        }
    }
}

fn check_comparable(scores: &[CriterionScore]) -> Result<()> {
    let first = scores
        .first()
        .ok_or_else(|| Error::InvalidArgument("no scores to compare".into()))?;
    for s in scores {
        if s.criterion != first.criterion {
            return Err(Error::IncomparableScores(format!(
                "mixed criteria {} and {}",
                first.criterion, s.criterion
            )));
        }
        if s.known_variance != first.known_variance {
            return Err(Error::IncomparableScores(
                "models with known and estimated variance".into(),
            ));
        }
        if s.value.is_nan() {
            return Err(Error::IncomparableScores(format!(
                "model {} has a NaN score",
                s.model_id
            )));
        }
    }
    Ok(())
}

/// Akaike weights `exp(−Δᵢ/2) / Σⱼ exp(−Δⱼ/2)` with `Δᵢ = valueᵢ − min`.
pub fn akaike_weights(scores: &[CriterionScore]) -> Result<Vec<f64>> {
    check_comparable(scores)?;
    let values: Vec<f64> = scores.iter().map(|s| s.value).collect();
    Ok(weights_from_values(&values))
}

pub(crate) fn weights_from_values(values: &[f64]) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = values.iter().map(|v| (-(v - min) / 2.0).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Model id with the smallest score; ties go to the smallest model id.
pub fn select(scores: &[CriterionScore]) -> Result<usize> {
    check_comparable(scores)?;
    let best = scores
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value).then(a.model_id.cmp(&b.model_id)))
        .expect("non-empty after check");
    Ok(best.model_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{build_polynomial_design, build_subset_design, PolyBasis};
    use nalgebra::DMatrix;

    fn fake_fit(log_lik: f64, k: usize, n: usize) -> FitResult {
        FitResult {
            mu_hat: DVector::zeros(k),
            sigma2_hat: 1.0,
            rss: 1.0,
            log_lik,
            gram_inv: DMatrix::identity(k, k),
            k,
            n,
            variance: VarianceMode::Known(1.0),
        }
    }

    fn unknown_fit(log_lik: f64, k: usize, n: usize) -> FitResult {
        FitResult {
            mu_hat: DVector::zeros(k - 1),
            variance: VarianceMode::Unknown,
            gram_inv: DMatrix::identity(k - 1, k - 1),
            ..fake_fit(log_lik, k, n)
        }
    }

    #[test]
    fn arithmetic_examples() {
        assert_eq!(xaic(&fake_fit(-10.0, 3, 50), 3.0).unwrap().value, 26.0);
        assert_eq!(aic(&fake_fit(-10.0, 3, 50)).value, 26.0);
        let s = xaicc(&unknown_fit(-10.0, 4, 21), 6.0).unwrap();
        assert!((s.value - 33.125).abs() < 1e-12);
        let fit = fake_fit(-10.0, 3, 100);
        assert!((aicc(&fit).unwrap().value - aic(&fit).value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn correction_vanishes_for_large_n() {
        let fit = unknown_fit(-10.0, 4, 1_000_000);
        let gap = xaicc(&fit, 6.0).unwrap().value - xaic(&fit, 6.0).unwrap().value;
        assert!(gap > 0.0 && gap < 1e-4);
    }

    #[test]
    fn bic_examples() {
        let fit = fake_fit(-10.0, 3, 7);
        assert!((bic(&fit).value - (20.0 + 3.0 * 7f64.ln())).abs() < 1e-12);
        assert_eq!(bic(&fake_fit(-10.0, 1, 1)).value, 20.0);
        let fit = fake_fit(-4.2, 5, 37);
        let diff = bic(&fit).value - aic(&fit).value;
        assert!((diff - 5.0 * ((37f64).ln() - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn gcv_examples() {
        assert_eq!(gcv_value(10.0, 10, 0).unwrap(), 1.0);
        assert_eq!(gcv_value(10.0, 10, 5).unwrap(), 4.0);
        assert!(gcv_value(10.0, 5, 5).is_err());
    }

    #[test]
    fn small_sample_errors() {
        let fit = unknown_fit(-1.0, 4, 5);
        assert!(matches!(aicc(&fit), Err(Error::SmallSample { n: 5, k: 4 })));
        assert!(matches!(xaicc(&fit, 1.0), Err(Error::SmallSample { .. })));
        assert!(xaic(&fit, -1.0).is_err());
    }

    #[test]
    fn weights_examples() {
        let s = |v: f64, id| {
            let mut c = aic(&fake_fit(0.0, 1, 10)).with_model(id);
            c.value = v;
            c
        };
        assert_eq!(akaike_weights(&[s(10.0, 0), s(10.0, 1)]).unwrap(), vec![0.5, 0.5]);
        let w = akaike_weights(&[s(10.0, 0), s(12.0, 1)]).unwrap();
        let e = (-1f64).exp();
        assert!((w[0] - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((w[1] - e / (1.0 + e)).abs() < 1e-15);
        assert!((w[0] - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn select_examples() {
        let s = |v: f64, id| {
            let mut c = aic(&fake_fit(0.0, 1, 10)).with_model(id);
            c.value = v;
            c
        };
        assert_eq!(select(&[s(26.0, 1), s(25.0, 2), s(27.0, 3)]).unwrap(), 2);
        assert_eq!(select(&[s(25.0, 1), s(25.0, 2)]).unwrap(), 1);
        assert_eq!(select(&[s(25.0, 2), s(25.0, 1)]).unwrap(), 1);
        assert!(select(&[]).is_err());
    }

    #[test]
    fn mixed_scores_refused() {
        let a = aic(&fake_fit(0.0, 2, 10));
        let b = bic(&fake_fit(0.0, 2, 10)).with_model(1);
        assert!(matches!(select(&[a.clone(), b]), Err(Error::IncomparableScores(_))));
        let c = aic(&unknown_fit(0.0, 2, 10)).with_model(1);
        assert!(matches!(akaike_weights(&[a, c]), Err(Error::IncomparableScores(_))));
    }

    #[test]
    fn kappa_identity_and_focus_agreement() {
        let xs: Vec<f64> = (0..12).map(|i| (i as f64 * 0.77).sin() * 2.0).collect();
        let d = build_polynomial_design(&xs, 2, PolyBasis::Monomial).unwrap();
        let k = kappa_explicit(&d, &d, VarianceMode::Known(1.0)).unwrap();
        assert!((k - 3.0).abs() < 1e-10);
        let k = kappa_explicit(&d, &d, VarianceMode::Unknown).unwrap();
        assert!((k - 4.0).abs() < 1e-10);

        let x = d.row(4);
        let single = DesignMatrix::new(DMatrix::from_row_slice(1, 3, x.as_slice())).unwrap();
        let a = kappa_focus(&d, &x, VarianceMode::Known(1.0)).unwrap();
        let b = kappa_explicit(&d, &single, VarianceMode::Known(1.0)).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert_eq!(kappa_focus(&d, &DVector::zeros(3), VarianceMode::Known(1.0)).unwrap(), 0.0);
        assert_eq!(kappa_focus(&d, &DVector::zeros(3), VarianceMode::Unknown).unwrap(), 1.0);
    }

    #[test]
    fn kappa_at_training_mean_is_one() {
        let xs = [-1.3, 0.2, 0.9, 2.4, -0.7, 1.1];
        let u = DMatrix::from_column_slice(6, 1, &xs);
        let d = build_subset_design(&u, &[0], true).unwrap();
        let mean = xs.iter().sum::<f64>() / 6.0;
        let k = kappa_focus(&d, &DVector::from_vec(vec![1.0, mean]), VarianceMode::Known(1.0))
            .unwrap();
        assert!((k - 1.0).abs() < 1e-10);
    }

    #[test]
    fn kappa_distribution_recovers_k() {
        let xs: Vec<f64> = (0..9).map(|i| (i as f64 * 1.3).cos() * 1.5).collect();
        let d = build_polynomial_design(&xs, 3, PolyBasis::Hermite).unwrap();
        let m = d.gram() / 9.0;
        let k = kappa_distribution(&d, &m, VarianceMode::Known(1.0)).unwrap();
        assert!((k - 4.0).abs() < 1e-10);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
        let d2 = build_polynomial_design(&xs, 1, PolyBasis::Hermite).unwrap();
        assert!(matches!(
            kappa_distribution(&d2, &bad, VarianceMode::Known(1.0)),
            Err(Error::NotPositiveSemidefinite(_))
        ));
    }

    #[test]
    fn singular_design_propagates() {
        let d = DesignMatrix::new(DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]))
            .unwrap();
        assert!(matches!(
            kappa_explicit(&d, &d, VarianceMode::Unknown),
            Err(Error::SingularDesign { .. })
        ));
    }

    #[test]
    fn criterion_names_round_trip() {
        for c in Criterion::ALL {
            assert_eq!(c.name().parse::<Criterion>().unwrap(), c);
        }
        assert!("fic".parse::<Criterion>().is_err());
    }
}

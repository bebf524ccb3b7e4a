//! Bayesian model selection and averaging over Gaussian linear models.
//!
//! Two within-model priors are supported. Under the Jeffreys prior
//! `p(μ, σ²) ∝ σ⁻²` the marginal likelihood has the closed form
//!
//! ```text
//! Γ((n−k_μ)/2) · π^{−(n−k_μ)/2} · |XᵀX|^{−1/2} · rss^{−(n−k_μ)/2}
//! ```
//!
//! and the posterior mean of `μ` is the least-squares estimate. Under the
//! Gaussian-slab prior, selected coefficients get independent `N(0, s²)`
//! priors, the rest are flat, and `σ²` keeps the Jeffreys prior; the `μ`
//! integral is Gaussian and the remaining `σ²` integral is done by adaptive
//! quadrature on `log σ²`.
//!
//! Improper priors leave the marginal likelihood defined only up to a
//! constant per model dimension; the formulas above fix that constant to 1.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linear::{DesignMatrix, FitResult, FittedModel, LeastSquares, ModelSpec, VarianceMode};
use crate::quadrature::{integrate, kronrod_nodes, QuadratureOptions};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Half-width, as a multiplicative factor, of the `σ²` integration window.
pub const SIGMA2_WINDOW: f64 = 1e4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    Jeffreys,
    GaussianSlab {
        slab_variance: f64,
        /// Design columns with an improper flat prior instead of the slab.
        flat_columns: Vec<usize>,
    },
}

impl PriorSpec {
    fn validate(&self, k_mu: usize) -> Result<()> {
        if let PriorSpec::GaussianSlab {
            slab_variance,
            flat_columns,
        } = self
        {
            if !(*slab_variance > 0.0 && slab_variance.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "slab variance must be positive, got {slab_variance}"
                )));
            }
            if let Some(c) = flat_columns.iter().find(|&&c| c >= k_mu) {
                return Err(Error::InvalidArgument(format!(
                    "flat column {c} outside a {k_mu}-column design"
                )));
            }
        }
        Ok(())
    }
}

pub fn log_marginal_jeffreys(design: &DesignMatrix, y: &DVector<f64>) -> Result<f64> {
    let ls = LeastSquares::new(design.clone())?;
    jeffreys_from_parts(&ls, y)
}

pub(crate) fn jeffreys_from_parts(ls: &LeastSquares, y: &DVector<f64>) -> Result<f64> {
    let (n, k) = (ls.n(), ls.k_mu());
    if n <= k {
        return Err(Error::InsufficientData { n, k: k + 1 });
    }
    let fit = ls.fit(y, VarianceMode::Unknown)?;
    Ok(jeffreys_from_fit(&fit, ls.log_det_gram()))
}

pub(crate) fn jeffreys_from_fit(fit: &FitResult, log_det_gram: f64) -> f64 {
    let half_dof = 0.5 * (fit.n - fit.k_mu()) as f64;
    ln_gamma(half_dof)
        - half_dof * std::f64::consts::PI.ln()
        - 0.5 * log_det_gram
        - half_dof * fit.rss.ln()
}

/// Log marginal likelihood and posterior mean coefficients under a
/// Gaussian-slab prior.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabPosterior {
    pub log_marginal: f64,
    pub coefficients: DVector<f64>,
}

/// Log marginal likelihood under `prior`. The Gaussian-slab `σ²` integral is
/// anchored at this model's own `σ̂²`.
pub fn log_marginal_gaussian_slab(
    design: &DesignMatrix,
    y: &DVector<f64>,
    prior: &PriorSpec,
) -> Result<f64> {
    match prior {
        PriorSpec::Jeffreys => log_marginal_jeffreys(design, y),
        PriorSpec::GaussianSlab {
            slab_variance,
            flat_columns,
        } => {
            let ls = LeastSquares::new(design.clone())?;
            let anchor = ls.fit(y, VarianceMode::Unknown)?.sigma2_hat;
            Ok(gaussian_slab_posterior(&ls, y, *slab_variance, flat_columns, anchor)?.log_marginal)
        }
    }
}

/// Gaussian-slab posterior with the `log σ²` integral taken over
/// `[anchor/10⁴, anchor·10⁴]`.
pub fn gaussian_slab_posterior(
    ls: &LeastSquares,
    y: &DVector<f64>,
    slab_variance: f64,
    flat_columns: &[usize],
    sigma2_anchor: f64,
) -> Result<SlabPosterior> {
    let k = ls.k_mu();
    PriorSpec::GaussianSlab {
        slab_variance,
        flat_columns: flat_columns.to_vec(),
    }
    .validate(k)?;
    if !(sigma2_anchor > 0.0 && sigma2_anchor.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "σ² anchor must be positive, got {sigma2_anchor}"
        )));
    }
    let n = ls.n();
    let fit = ls.fit(y, VarianceMode::Unknown)?;
    let integrand = SlabIntegrand::new(ls, &fit, y, slab_variance, flat_columns);

    let lo = (sigma2_anchor / SIGMA2_WINDOW).ln();
    let hi = (sigma2_anchor * SIGMA2_WINDOW).ln();
    let scale = (0..=200)
        .map(|i| integrand.log_density(lo + (hi - lo) * i as f64 / 200.0).0)
        .fold(f64::NEG_INFINITY, f64::max);
    if !scale.is_finite() {
        return Err(Error::QuadratureFailure {
            tolerance: 1e-8,
            estimate: f64::INFINITY,
        });
    }

    let result = integrate(
        |t| (integrand.log_density(t).0 - scale).exp(),
        lo,
        hi,
        QuadratureOptions::default(),
    )?;

    let mut mean = DVector::zeros(k);
    for (t, w) in kronrod_nodes(&result.segments) {
        let (log_h, coef) = integrand.log_density(t);
        mean += coef * (w * (log_h - scale).exp());
    }
    mean /= result.value;
    debug_assert!(n > 0);

    Ok(SlabPosterior {
        log_marginal: scale + result.value.ln(),
        coefficients: mean,
    })
}

struct SlabIntegrand<'a> {
    gram: DMatrix<f64>,
    xty: DVector<f64>,
    mu_hat: &'a DVector<f64>,
    rss: f64,
    precision: DVector<f64>,
    n: usize,
    constant: f64,
}

impl<'a> SlabIntegrand<'a> {
    fn new(
        ls: &LeastSquares,
        fit: &'a FitResult,
        y: &DVector<f64>,
        slab_variance: f64,
        flat_columns: &[usize],
    ) -> Self {
        let k = ls.k_mu();
        let x = ls.design().as_matrix();
        let precision = DVector::from_fn(k, |j, _| {
            if flat_columns.contains(&j) {
                0.0
            } else {
                1.0 / slab_variance
            }
        });
        let slabs = precision.iter().filter(|p| **p > 0.0).count() as f64;
        let n = ls.n();
        Self {
            gram: x.tr_mul(x),
            xty: x.tr_mul(y),
            mu_hat: &fit.mu_hat,
            rss: fit.rss,
            precision,
            n,
            constant: -0.5 * (n - k) as f64 * LN_2PI - 0.5 * slabs * (LN_2PI + slab_variance.ln()),
        }
    }

    /// `log p(Y | σ²)` at `t = log σ²` together with the conditional
    /// posterior mean of `μ`.
    fn log_density(&self, t: f64) -> (f64, DVector<f64>) {
        let s2 = t.exp();
        let k = self.gram.nrows();
        let mut b = self.gram.clone();
        for j in 0..k {
            b[(j, j)] += s2 * self.precision[j];
        }
        let Some(chol) = Cholesky::new(b) else {
            return (f64::NEG_INFINITY, DVector::zeros(k));
        };
        let log_det_b = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let c = chol.solve(&self.xty);
        // ‖y − Xc‖² = rss + (c − μ̂)ᵀXᵀX(c − μ̂)
        let d = &c - self.mu_hat;
        let shrink: f64 = c.iter().zip(self.precision.iter()).map(|(ci, p)| ci * ci * p).sum();
        let q = self.rss + d.dot(&(&self.gram * &d)) + s2 * shrink;
        let half_dof = 0.5 * (self.n - k) as f64;
        let log_h = self.constant - half_dof * t - 0.5 * q / s2 - 0.5 * log_det_b;
        (log_h, c)
    }
}

/// Posterior model probabilities under a uniform model prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub log_marginals: Vec<f64>,
    pub weights: Vec<f64>,
    /// Index of the largest weight; ties go to the smallest index.
    pub map_model: usize,
}

pub fn model_posterior(log_marginals: &[f64]) -> Result<PosteriorSummary> {
    if log_marginals.is_empty() {
        return Err(Error::InvalidArgument("no models".into()));
    }
    if log_marginals.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(Error::InvalidArgument("log marginal likelihoods must not be NaN or +∞".into()));
    }
    let max = log_marginals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::InvalidArgument("every model has zero marginal likelihood".into()));
    }
    let raw: Vec<f64> = log_marginals.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.into_iter().map(|w| w / total).collect();
    let mut map_model = 0;
    for (i, l) in log_marginals.iter().enumerate() {
        if *l > log_marginals[map_model] {
            map_model = i;
        }
    }
    Ok(PosteriorSummary {
        log_marginals: log_marginals.to_vec(),
        weights,
        map_model,
    })
}

/// Point prediction of a single model at a raw input.
pub trait Predictor {
    fn predict_at(&self, raw: &[f64]) -> Result<f64>;
}

impl Predictor for FittedModel {
    fn predict_at(&self, raw: &[f64]) -> Result<f64> {
        self.predict_raw(raw)
    }
}

/// A model whose posterior mean coefficients came from the slab prior.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabModel {
    pub spec: ModelSpec,
    pub posterior: SlabPosterior,
}

impl Predictor for SlabModel {
    fn predict_at(&self, raw: &[f64]) -> Result<f64> {
        let x = self.spec.design_vector(raw)?;
        if x.len() != self.posterior.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.posterior.coefficients.len(),
                found: x.len(),
            });
        }
        Ok(x.dot(&self.posterior.coefficients))
    }
}

/// Posterior-weighted average of the models' posterior predictive means.
pub fn bma_predict<P: Predictor>(models: &[P], weights: &[f64], x: &[f64]) -> Result<f64> {
    if models.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: models.len(),
            found: weights.len(),
        });
    }
    models
        .iter()
        .zip(weights)
        .try_fold(0.0, |acc, (m, w)| Ok(acc + w * m.predict_at(x)?))
}

/// `σ²(1 + xᵀ(XᵀX)⁻¹x)`, the predictive variance of a new response at
/// design vector `x` under a flat prior on `μ` with known `σ²`.
pub fn posterior_predictive_variance(fit: &FitResult, x: &DVector<f64>, sigma2: f64) -> Result<f64> {
    if sigma2.is_nan() || sigma2 <= 0.0 {
        return Err(Error::InvalidArgument(format!("σ² must be positive, got {sigma2}")));
    }
    Ok(sigma2 * (1.0 + fit.leverage(x)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{build_polynomial_design, PolyBasis};

    #[test]
    fn jeffreys_two_point_example() {
        let d = DesignMatrix::new(DMatrix::from_element(2, 1, 1.0)).unwrap();
        let y = DVector::from_vec(vec![-1.0, 1.0]);
        let l = log_marginal_jeffreys(&d, &y).unwrap();
        assert!((l - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn jeffreys_duplicate_column_is_singular() {
        let d = DesignMatrix::new(DMatrix::from_row_slice(
            3,
            2,
            &[1.0, 1.0, 2.0, 2.0, 0.5, 0.5],
        ))
        .unwrap();
        let y = DVector::from_vec(vec![1.0, 0.0, 2.0]);
        assert!(matches!(log_marginal_jeffreys(&d, &y), Err(Error::SingularDesign { .. })));
    }

    #[test]
    fn jeffreys_needs_residual_dof() {
        let d = DesignMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let y = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(log_marginal_jeffreys(&d, &y), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn posterior_examples() {
        let p = model_posterior(&[-3.0, -3.0, -3.0]).unwrap();
        for w in &p.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(p.map_model, 0);
        let p = model_posterior(&[0.0, 9f64.ln()]).unwrap();
        assert!((p.weights[1] - 0.9).abs() < 1e-12);
        assert!((p.weights[0] - 0.1).abs() < 1e-12);
        assert_eq!(p.map_model, 1);
        assert!(model_posterior(&[]).is_err());
        assert!(model_posterior(&[f64::NAN]).is_err());
    }

    #[test]
    fn bma_examples() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let spec = ModelSpec::subset(vec![], true, VarianceMode::Unknown);
        let mk = |c: f64| SlabModel {
            spec: spec.clone(),
            posterior: SlabPosterior {
                log_marginal: 0.0,
                coefficients: DVector::from_vec(vec![c]),
            },
        };
        let models = [mk(2.0), mk(4.0)];
        assert_eq!(bma_predict(&models, &[0.5, 0.5], &[xs[1]]).unwrap(), 3.0);
        assert_eq!(bma_predict(&models[..1], &[1.0], &[0.0]).unwrap(), 2.0);
        assert!(bma_predict(&models, &[1.0], &[0.0]).is_err());
    }

    #[test]
    fn predictive_variance_examples() {
        let n = 4;
        let d = DesignMatrix::new(DMatrix::from_row_slice(
            n,
            2,
            &[1.0, 1.0, 1.0, -1.0, 1.0, 1.0, 1.0, -1.0],
        ))
        .unwrap();
        // XᵀX = 4·I
        let ls = LeastSquares::new(d).unwrap();
        let fit = ls.fit(&DVector::from_vec(vec![1.0, 2.0, 0.0, 3.0]), VarianceMode::Known(0.3)).unwrap();
        assert_eq!(posterior_predictive_variance(&fit, &DVector::zeros(2), 0.3).unwrap(), 0.3);
        // ‖x‖² = n
        let x = DVector::from_vec(vec![2f64.sqrt(), 2f64.sqrt()]);
        let v = posterior_predictive_variance(&fit, &x, 0.3).unwrap();
        assert!((v - 0.6).abs() < 1e-12);
    }

    #[test]
    fn slab_flat_limit_differs_from_jeffreys_by_a_constant() {
        let xs: Vec<f64> = (0..12).map(|i| (i as f64 * 0.9).sin() * 1.7).collect();
        let d = build_polynomial_design(&xs, 2, PolyBasis::Hermite).unwrap();
        let prior = PriorSpec::GaussianSlab {
            slab_variance: 1e8,
            flat_columns: vec![0],
        };
        let y1 = DVector::from_iterator(12, xs.iter().map(|x| x + 2.0 + 0.3 * (7.0 * x).cos()));
        let y2 = DVector::from_iterator(12, xs.iter().map(|x| -x * x + 0.5 * (3.0 * x).sin()));
        let gap = |y: &DVector<f64>| {
            log_marginal_gaussian_slab(&d, y, &prior).unwrap() - log_marginal_jeffreys(&d, y).unwrap()
        };
        let expected = -(LN_2PI + 1e8f64.ln());
        assert!((gap(&y1) - gap(&y2)).abs() < 1e-4);
        assert!((gap(&y1) - expected).abs() < 1e-3);
    }

    #[test]
    fn slab_prior_validation() {
        let d = build_polynomial_design(&[0.0, 1.0, 2.0, 3.0], 1, PolyBasis::Hermite).unwrap();
        let y = DVector::from_vec(vec![0.1, 1.2, 1.9, 3.2]);
        let bad = PriorSpec::GaussianSlab {
            slab_variance: -1.0,
            flat_columns: vec![],
        };
        assert!(log_marginal_gaussian_slab(&d, &y, &bad).is_err());
        let bad = PriorSpec::GaussianSlab {
            slab_variance: 1.0,
            flat_columns: vec![5],
        };
        assert!(log_marginal_gaussian_slab(&d, &y, &bad).is_err());
    }
}

//! Python bindings: OLS fits, kappa variants, criteria, Bayesian marginals
//! and the simulation experiments. Matrices are passed as lists of rows.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use xsel_core::criteria::{aic, aicc, bic, faic, faicc, gcv, xaic, xaicc};
use xsel_core::sim::{
    mc_extra_sample_error as mc_extra, run_multivariate as run_multi, run_univariate as run_uni,
    MultivariateConfig, OracleOptions, TrueModel, TruthFn, UnivariateConfig,
};
use xsel_core::{Criterion, CriterionScore, DesignMatrix, FitResult, LeastSquares, PolyBasis, PriorSpec, VarianceMode};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    if n == 0 || k == 0 {
        return Err(err("matrix must be a non-empty list of non-empty rows"));
    }
    if rows.iter().any(|r| r.len() != k) {
        return Err(err("matrix rows have different lengths"));
    }
    Ok(DMatrix::from_fn(n, k, |i, j| rows[i][j]))
}

fn design(rows: &[Vec<f64>]) -> PyResult<DesignMatrix> {
    DesignMatrix::new(matrix(rows)?).map_err(err)
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn variance(sigma2: Option<f64>) -> VarianceMode {
    sigma2.map_or(VarianceMode::Unknown, VarianceMode::Known)
}

fn json_to_py(py: Python<'_>, value: &impl serde::Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Least-squares fit of a linear-Gaussian model.
#[pyclass(name = "Fit", frozen)]
struct PyFit {
    fit: FitResult,
}

#[pymethods]
impl PyFit {
    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.fit.mu_hat.iter().copied().collect()
    }

    #[getter]
    fn sigma2_hat(&self) -> f64 {
        self.fit.sigma2_hat
    }

    #[getter]
    fn rss(&self) -> f64 {
        self.fit.rss
    }

    #[getter]
    fn log_lik(&self) -> f64 {
        self.fit.log_lik
    }

    /// Parameter count, including σ² when it is estimated.
    #[getter]
    fn k(&self) -> usize {
        self.fit.k
    }

    #[getter]
    fn n(&self) -> usize {
        self.fit.n
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<f64> {
        self.fit.predict(&DVector::from_vec(x)).map_err(err)
    }

    fn leverage(&self, x: Vec<f64>) -> PyResult<f64> {
        self.fit.leverage(&DVector::from_vec(x)).map_err(err)
    }

    fn kappa_explicit(&self, xprime: Vec<Vec<f64>>) -> PyResult<f64> {
        self.fit.kappa_explicit(&design(&xprime)?).map_err(err)
    }

    fn kappa_focus(&self, x: Vec<f64>) -> PyResult<f64> {
        self.fit.kappa_focus(&DVector::from_vec(x)).map_err(err)
    }

    fn kappa_distribution(&self, second_moment: Vec<Vec<f64>>) -> PyResult<f64> {
        self.fit.kappa_distribution(&matrix(&second_moment)?).map_err(err)
    }

    fn kappa_empirical(&self) -> f64 {
        self.fit.kappa_empirical()
    }

    fn __repr__(&self) -> String {
        format!(
            "Fit(n={}, k={}, rss={}, sigma2_hat={})",
            self.fit.n, self.fit.k, self.fit.rss, self.fit.sigma2_hat
        )
    }
}

impl PyFit {
    fn score(&self, criterion: Criterion, kappa: Option<f64>) -> PyResult<CriterionScore> {
        let need = || kappa.ok_or_else(|| err(format!("{criterion} needs kappa")));
        match criterion {
            Criterion::Aic => Ok(aic(&self.fit)),
            Criterion::Aicc => aicc(&self.fit),
            Criterion::Bic => Ok(bic(&self.fit)),
            Criterion::Gcv => gcv(&self.fit),
            Criterion::Xaic => xaic(&self.fit, need()?),
            Criterion::Xaicc => xaicc(&self.fit, need()?),
            Criterion::Faic => faic(&self.fit, need()?),
            Criterion::Faicc => faicc(&self.fit, need()?),
        }
        .map_err(err)
    }
}

/// Fits `y ≈ X μ` by QR least squares. `sigma2` fixes the noise variance;
/// otherwise it is estimated as RSS/n.
#[pyfunction]
#[pyo3(signature = (x, y, sigma2=None))]
fn fit_ols(x: Vec<Vec<f64>>, y: Vec<f64>, sigma2: Option<f64>) -> PyResult<PyFit> {
    let fit = LeastSquares::new(design(&x)?)
        .and_then(|ls| ls.fit(&DVector::from_vec(y), variance(sigma2)))
        .map_err(err)?;
    Ok(PyFit { fit })
}

/// Polynomial design rows `[b_0(x), …, b_degree(x)]` in the monomial or
/// Hermite basis.
#[pyfunction]
#[pyo3(signature = (xs, degree, basis="hermite"))]
fn polynomial_design(xs: Vec<f64>, degree: usize, basis: &str) -> PyResult<Vec<Vec<f64>>> {
    let kind = match basis {
        "hermite" => PolyBasis::Hermite,
        "monomial" => PolyBasis::Monomial,
        _ => return Err(err(format!("unknown basis '{basis}'"))),
    };
    let d = xsel_core::build_polynomial_design(&xs, degree, kind).map_err(err)?;
    Ok(rows_of(d.as_matrix()))
}

/// `(n/n′)·tr(X′ᵀX′ (XᵀX)⁻¹)`, plus one when the variance is estimated.
#[pyfunction]
#[pyo3(signature = (x, xprime, known_variance=true))]
fn kappa_explicit(x: Vec<Vec<f64>>, xprime: Vec<Vec<f64>>, known_variance: bool) -> PyResult<f64> {
    let mode = if known_variance { VarianceMode::Known(1.0) } else { VarianceMode::Unknown };
    xsel_core::criteria::kappa_explicit(&design(&x)?, &design(&xprime)?, mode).map_err(err)
}

/// One criterion value with its penalty decomposition, as a dict.
#[pyfunction]
#[pyo3(signature = (criterion, fit, kappa=None))]
fn score(py: Python<'_>, criterion: &str, fit: &PyFit, kappa: Option<f64>) -> PyResult<Py<PyAny>> {
    let c: Criterion = criterion.parse().map_err(err)?;
    json_to_py(py, &fit.score(c, kappa)?)
}

fn scores(criterion: &str, fits: &[PyRef<'_, PyFit>], kappas: Option<Vec<f64>>) -> PyResult<Vec<CriterionScore>> {
    let c: Criterion = criterion.parse().map_err(err)?;
    if let Some(k) = &kappas {
        if k.len() != fits.len() {
            return Err(err("kappas must have one entry per fit"));
        }
    }
    fits.iter()
        .enumerate()
        .map(|(i, f)| Ok(f.score(c, kappas.as_ref().map(|k| k[i]))?.with_model(i)))
        .collect()
}

/// Index of the fit with the smallest criterion value.
#[pyfunction]
#[pyo3(signature = (criterion, fits, kappas=None))]
fn select(criterion: &str, fits: Vec<PyRef<'_, PyFit>>, kappas: Option<Vec<f64>>) -> PyResult<usize> {
    xsel_core::select(&scores(criterion, &fits, kappas)?).map_err(err)
}

/// Akaike weights of the fits under one criterion.
#[pyfunction]
#[pyo3(signature = (criterion, fits, kappas=None))]
fn akaike_weights(criterion: &str, fits: Vec<PyRef<'_, PyFit>>, kappas: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    xsel_core::akaike_weights(&scores(criterion, &fits, kappas)?).map_err(err)
}

/// Log marginal likelihood under a flat prior on μ and `1/σ²` on σ².
#[pyfunction]
fn log_marginal_jeffreys(x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<f64> {
    xsel_core::log_marginal_jeffreys(&design(&x)?, &DVector::from_vec(y)).map_err(err)
}

/// Log marginal likelihood with `N(0, slab_variance)` on the non-flat
/// coefficients and `1/σ²` on σ².
#[pyfunction]
#[pyo3(signature = (x, y, slab_variance, flat_columns=vec![0]))]
fn log_marginal_gaussian_slab(x: Vec<Vec<f64>>, y: Vec<f64>, slab_variance: f64, flat_columns: Vec<usize>) -> PyResult<f64> {
    let prior = PriorSpec::GaussianSlab { slab_variance, flat_columns };
    xsel_core::log_marginal_gaussian_slab(&design(&x)?, &DVector::from_vec(y), &prior).map_err(err)
}

/// Posterior model probabilities under a uniform model prior, returned as
/// `(weights, map_model)`.
#[pyfunction]
fn model_posterior(log_marginals: Vec<f64>) -> PyResult<(Vec<f64>, usize)> {
    let p = xsel_core::model_posterior(&log_marginals).map_err(err)?;
    Ok((p.weights, p.map_model))
}

/// Monte Carlo estimate of the extra-sample error of a polynomial model
/// together with the matching criterion, as a dict.
#[pyfunction]
#[pyo3(signature = (x, xprime, degree, truth="f1", sigma2=None, noise_variance=0.1, reps=10_000, seed=7, kappa_offset=0.0))]
#[allow(clippy::too_many_arguments)]
fn mc_extra_sample_error(
    py: Python<'_>,
    x: Vec<f64>,
    xprime: Vec<f64>,
    degree: usize,
    truth: &str,
    sigma2: Option<f64>,
    noise_variance: f64,
    reps: usize,
    seed: u64,
    kappa_offset: f64,
) -> PyResult<Py<PyAny>> {
    let spec = xsel_core::ModelSpec::polynomial(degree, PolyBasis::Hermite, variance(sigma2));
    let truth = TrueModel::new(truth.parse::<TruthFn>().map_err(err)?, noise_variance).map_err(err)?;
    let opts = OracleOptions { kappa_offset, ..OracleOptions::new(reps, seed) };
    let col = |v: Vec<f64>| DMatrix::from_column_slice(v.len(), 1, &v);
    let est = py
        .detach(|| mc_extra(&spec, &col(x), &col(xprime), &truth, &opts))
        .map_err(err)?;
    json_to_py(py, &est)
}

/// Runs the univariate polynomial experiment and returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (truth="f1", repeats=100, seed=7))]
fn run_univariate(py: Python<'_>, truth: &str, repeats: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let config = UnivariateConfig {
        truth: truth.parse().map_err(err)?,
        repeats,
        seed,
        ..Default::default()
    };
    config.validate().map_err(err)?;
    let report = py.detach(|| run_uni(&config)).map_err(err)?;
    json_to_py(py, &report)
}

/// Runs the all-subsets experiment and returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (repeats=50, seed=7))]
fn run_multivariate(py: Python<'_>, repeats: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let config = MultivariateConfig { repeats, seed, ..Default::default() };
    config.validate().map_err(err)?;
    let report = py.detach(|| run_multi(&config)).map_err(err)?;
    json_to_py(py, &report)
}

#[pymodule]
fn xsel(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFit>()?;
    m.add_function(wrap_pyfunction!(fit_ols, m)?)?;
    m.add_function(wrap_pyfunction!(polynomial_design, m)?)?;
    m.add_function(wrap_pyfunction!(kappa_explicit, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(select, m)?)?;
    m.add_function(wrap_pyfunction!(akaike_weights, m)?)?;
    m.add_function(wrap_pyfunction!(log_marginal_jeffreys, m)?)?;
    m.add_function(wrap_pyfunction!(log_marginal_gaussian_slab, m)?)?;
    m.add_function(wrap_pyfunction!(model_posterior, m)?)?;
    m.add_function(wrap_pyfunction!(mc_extra_sample_error, m)?)?;
    m.add_function(wrap_pyfunction!(run_univariate, m)?)?;
    m.add_function(wrap_pyfunction!(run_multivariate, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

//! Design matrices, least-squares fitting and the Gaussian likelihood of a
//! single linear model.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative singular-value threshold below which a design is rank deficient.
pub const SINGULARITY_TOL: f64 = 1e-10;

/// Residual sum of squares (relative to `max(1, ‖y‖²)`) below which an
/// unknown-variance fit is degenerate.
pub const DEGENERATE_RSS: f64 = 1e-12;

/// Training data: raw inputs (one row per observation) and responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: DMatrix<f64>,
    response: DVector<f64>,
}

impl Dataset {
    pub fn new(inputs: DMatrix<f64>, response: DVector<f64>) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::InvalidArgument("dataset has no rows".into()));
        }
        if inputs.nrows() != response.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.nrows(),
                found: response.len(),
            });
        }
        if inputs.iter().chain(response.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("dataset contains non-finite values".into()));
        }
        Ok(Self { inputs, response })
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolyBasis {
    Monomial,
    /// Probabilists' Hermite polynomials `He_j`, orthogonal under N(0, 1).
    Hermite,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Univariate polynomial of the given degree (`degree + 1` columns).
    Polynomial { degree: usize, kind: PolyBasis },
    /// Selected raw input columns (0-based), optionally preceded by an
    /// all-ones intercept column.
    Subset { columns: Vec<usize>, intercept: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    Known(f64),
    Unknown,
}

impl VarianceMode {
    pub fn is_known(&self) -> bool {
        matches!(self, VarianceMode::Known(_))
    }

    /// Number of variance parameters counted in `k`.
    pub fn extra_params(&self) -> usize {
        match self {
            VarianceMode::Known(_) => 0,
            VarianceMode::Unknown => 1,
        }
    }
}

/// One candidate linear model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub basis: Basis,
    pub variance: VarianceMode,
}

impl ModelSpec {
    pub fn polynomial(degree: usize, kind: PolyBasis, variance: VarianceMode) -> Self {
        Self {
            basis: Basis::Polynomial { degree, kind },
            variance,
        }
    }

    pub fn subset(columns: Vec<usize>, intercept: bool, variance: VarianceMode) -> Self {
        Self {
            basis: Basis::Subset { columns, intercept },
            variance,
        }
    }

    /// Checks the spec against a raw input dimension.
    pub fn validate(&self, input_dim: usize) -> Result<()> {
        if let VarianceMode::Known(s2) = self.variance {
            if !(s2 > 0.0 && s2.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "known variance must be positive and finite, got {s2}"
                )));
            }
        }
        match &self.basis {
            Basis::Polynomial { .. } => {
                if input_dim != 1 {
                    return Err(Error::InvalidArgument(format!(
                        "polynomial basis needs one input column, got {input_dim}"
                    )));
                }
            }
            Basis::Subset { columns, intercept } => {
                check_subset(columns, input_dim)?;
                if columns.is_empty() && !intercept {
                    return Err(Error::InvalidArgument("model has no design columns".into()));
                }
            }
        }
        Ok(())
    }

    /// Number of mean parameters `k_μ`.
    pub fn mean_params(&self) -> usize {
        match &self.basis {
            Basis::Polynomial { degree, .. } => degree + 1,
            Basis::Subset { columns, intercept } => columns.len() + usize::from(*intercept),
        }
    }

    /// Total parameter count `k` (mean parameters plus σ² when estimated).
    pub fn total_params(&self) -> usize {
        self.mean_params() + self.variance.extra_params()
    }

    pub fn design(&self, inputs: &DMatrix<f64>) -> Result<DesignMatrix> {
        self.validate(inputs.ncols())?;
        match &self.basis {
            Basis::Polynomial { degree, kind } => {
                let xs: Vec<f64> = inputs.column(0).iter().copied().collect();
                build_polynomial_design(&xs, *degree, *kind)
            }
            Basis::Subset { columns, intercept } => build_subset_design(inputs, columns, *intercept),
        }
    }

    /// Design vector for a single raw input point.
    pub fn design_vector(&self, point: &[f64]) -> Result<DVector<f64>> {
        let row = DMatrix::from_row_slice(1, point.len(), point);
        let design = self.design(&row)?;
        Ok(design.row(0))
    }

    pub fn label(&self) -> String {
        match &self.basis {
            Basis::Polynomial { degree, kind } => {
                let kind = match kind {
                    PolyBasis::Monomial => "monomial",
                    PolyBasis::Hermite => "hermite",
                };
                format!("poly{degree}:{kind}")
            }
            Basis::Subset { columns, intercept } => {
                let mut parts: Vec<String> = Vec::new();
                if *intercept {
                    parts.push("1".into());
                }
                let mut sorted = columns.clone();
                sorted.sort_unstable();
                parts.extend(sorted.iter().map(|c| format!("u{}", c + 1)));
                parts.join("+")
            }
        }
    }

    pub fn fit(&self, data: &Dataset) -> Result<FittedModel> {
        let design = self.design(data.inputs())?;
        let fit = fit_ols(&design, data.response(), self)?;
        Ok(FittedModel {
            spec: self.clone(),
            fit,
        })
    }
}

fn check_subset(columns: &[usize], input_dim: usize) -> Result<()> {
    let mut seen = vec![false; input_dim];
    for &c in columns {
        if c >= input_dim {
            return Err(Error::InvalidArgument(format!(
                "column index {c} out of range for {input_dim} inputs"
            )));
        }
        if seen[c] {
            return Err(Error::InvalidArgument(format!("duplicate column index {c}")));
        }
        seen[c] = true;
    }
    Ok(())
}

/// An `n × k_μ` design matrix with finite entries and at least one column.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix(DMatrix<f64>);

impl DesignMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::InvalidArgument("design matrix needs at least one column".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("design matrix has non-finite entries".into()));
        }
        Ok(Self(values))
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    /// Number of mean parameters `k_μ`.
    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.0.row(i).transpose()
    }

    /// `XᵀX`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.0.tr_mul(&self.0)
    }
}

/// Probabilists' Hermite polynomials `He_0(x) ..= He_degree(x)`.
pub(crate) fn hermite_values(x: f64, degree: usize, out: &mut [f64]) {
    out[0] = 1.0;
    if degree >= 1 {
        out[1] = x;
    }
    for j in 1..degree {
        out[j + 1] = x * out[j] - j as f64 * out[j - 1];
    }
}

pub fn build_polynomial_design(xs: &[f64], degree: usize, kind: PolyBasis) -> Result<DesignMatrix> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("polynomial inputs must be finite".into()));
    }
    let cols = degree + 1;
    let mut values = DMatrix::zeros(xs.len(), cols);
    let mut buf = vec![0.0; cols];
    for (i, &x) in xs.iter().enumerate() {
        match kind {
            PolyBasis::Monomial => {
                let mut p = 1.0;
                for b in buf.iter_mut() {
                    *b = p;
                    p *= x;
                }
            }
            PolyBasis::Hermite => hermite_values(x, degree, &mut buf),
        }
        for (j, &b) in buf.iter().enumerate() {
            values[(i, j)] = b;
        }
    }
    DesignMatrix::new(values)
}

/// Intercept column (if requested) followed by the selected raw columns in
/// ascending index order. Indices are 0-based.
pub fn build_subset_design(
    inputs: &DMatrix<f64>,
    subset: &[usize],
    include_intercept: bool,
) -> Result<DesignMatrix> {
    check_subset(subset, inputs.ncols())?;
    let mut columns = subset.to_vec();
    columns.sort_unstable();
    let offset = usize::from(include_intercept);
    let mut values = DMatrix::zeros(inputs.nrows(), columns.len() + offset);
    if include_intercept {
        values.column_mut(0).fill(1.0);
    }
    for (j, &c) in columns.iter().enumerate() {
        values.column_mut(j + offset).copy_from(&inputs.column(c));
    }
    DesignMatrix::new(values)
}

/// Maximum-likelihood fit of one linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub mu_hat: DVector<f64>,
    /// `rss / n` for unknown variance, otherwise the known σ².
    pub sigma2_hat: f64,
    pub rss: f64,
    pub log_lik: f64,
    /// `(XᵀX)⁻¹`.
    pub gram_inv: DMatrix<f64>,
    /// Total parameter count, σ² included when it is estimated.
    pub k: usize,
    pub n: usize,
    pub variance: VarianceMode,
}

impl FitResult {
    pub fn k_mu(&self) -> usize {
        self.mu_hat.len()
    }

    pub fn neg2_log_lik(&self) -> f64 {
        -2.0 * self.log_lik
    }

    pub fn predict(&self, x: &DVector<f64>) -> Result<f64> {
        predict(self, x)
    }

    /// `xᵀ(XᵀX)⁻¹x`.
    pub fn leverage(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.k_mu() {
            return Err(Error::DimensionMismatch {
                expected: self.k_mu(),
                found: x.len(),
            });
        }
        Ok(x.dot(&(&self.gram_inv * x)))
    }
}

/// QR factorisation of a fixed design, reusable across response vectors.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    design: DesignMatrix,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
}

impl LeastSquares {
    pub fn new(design: DesignMatrix) -> Result<Self> {
        let (n, k) = (design.nrows(), design.ncols());
        if n < k {
            return Err(Error::InsufficientData { n, k });
        }
        let qr = design.as_matrix().clone().qr();
        let q = qr.q();
        let r = qr.r();

        let sv = r.singular_values();
        let max = sv.max();
        let min = sv.min();
        let ratio = if max > 0.0 { min / max } else { 0.0 };
        if ratio.is_nan() || ratio <= SINGULARITY_TOL {
            return Err(Error::SingularDesign { ratio });
        }

        let r_inv = r
            .solve_upper_triangular(&DMatrix::identity(k, k))
            .ok_or(Error::SingularDesign { ratio })?;
        let g = &r_inv * r_inv.transpose();
        let gram_inv = (&g + g.transpose()) * 0.5;
        Ok(Self { design, q, r, gram_inv })
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn gram_inv(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    /// `log |XᵀX|` from the diagonal of `R`.
    pub fn log_det_gram(&self) -> f64 {
        2.0 * self.r.diagonal().iter().map(|d| d.abs().ln()).sum::<f64>()
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn k_mu(&self) -> usize {
        self.design.ncols()
    }

    /// Least-squares coefficients only.
    pub fn coefficients(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: y.len(),
            });
        }
        let qty = self.q.tr_mul(y);
        self.r
            .solve_upper_triangular(&qty)
            .ok_or(Error::SingularDesign { ratio: 0.0 })
    }

    pub fn fit(&self, y: &DVector<f64>, variance: VarianceMode) -> Result<FitResult> {
        if let VarianceMode::Known(s2) = variance {
            if !(s2 > 0.0 && s2.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "known variance must be positive and finite, got {s2}"
                )));
            }
        }
        let mu_hat = self.coefficients(y)?;
        let residuals = y - self.design.as_matrix() * &mu_hat;
        let rss = residuals.norm_squared();
        let n = self.n();
        let nf = n as f64;
        let two_pi = 2.0 * std::f64::consts::PI;
        let (sigma2_hat, log_lik) = match variance {
            VarianceMode::Known(s2) => (s2, -0.5 * nf * (two_pi * s2).ln() - rss / (2.0 * s2)),
            VarianceMode::Unknown => {
                if rss <= DEGENERATE_RSS * y.norm_squared().max(1.0) {
                    return Err(Error::DegenerateFit { rss });
                }
                let s2 = rss / nf;
                (s2, -0.5 * nf * ((two_pi * rss / nf).ln() + 1.0))
            }
        };
        Ok(FitResult {
            mu_hat,
            sigma2_hat,
            rss,
            log_lik,
            gram_inv: self.gram_inv.clone(),
            k: self.k_mu() + variance.extra_params(),
            n,
            variance,
        })
    }
}

pub fn fit_ols(design: &DesignMatrix, y: &DVector<f64>, spec: &ModelSpec) -> Result<FitResult> {
    if design.ncols() != spec.mean_params() {
        return Err(Error::DimensionMismatch {
            expected: spec.mean_params(),
            found: design.ncols(),
        });
    }
    LeastSquares::new(design.clone())?.fit(y, spec.variance)
}

/// `xᵀμ̂` for a design vector `x`.
pub fn predict(fit: &FitResult, x: &DVector<f64>) -> Result<f64> {
    if x.len() != fit.k_mu() {
        return Err(Error::DimensionMismatch {
            expected: fit.k_mu(),
            found: x.len(),
        });
    }
    Ok(x.dot(&fit.mu_hat))
}

/// A fit together with the spec that maps raw inputs to design vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub fit: FitResult,
}

impl FittedModel {
    pub fn predict_raw(&self, point: &[f64]) -> Result<f64> {
        let x = self.spec.design_vector(point)?;
        predict(&self.fit, &x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unknown() -> ModelSpec {
        ModelSpec::subset(vec![], true, VarianceMode::Unknown)
    }

    #[test]
    fn monomial_row() {
        let d = build_polynomial_design(&[2.0], 2, PolyBasis::Monomial).unwrap();
        assert_eq!(d.row(0).as_slice(), &[1.0, 2.0, 4.0]);
    }

    #[test]
    fn hermite_rows() {
        let d = build_polynomial_design(&[2.0], 2, PolyBasis::Hermite).unwrap();
        assert_eq!(d.row(0).as_slice(), &[1.0, 2.0, 3.0]);
        // He_j(0) = 0 for odd j, (-1)^{j/2} (j-1)!! for even j
        let d = build_polynomial_design(&[0.0], 6, PolyBasis::Hermite).unwrap();
        assert_eq!(d.row(0).as_slice(), &[1.0, 0.0, -1.0, 0.0, 3.0, 0.0, -15.0]);
    }

    #[test]
    fn non_finite_polynomial_input() {
        assert!(matches!(
            build_polynomial_design(&[f64::NAN], 1, PolyBasis::Monomial),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn subset_columns() {
        let u = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let d = build_subset_design(&u, &[1], true).unwrap();
        assert_eq!(d.row(0).as_slice(), &[1.0, 4.0]);
        let d = build_subset_design(&u, &[], true).unwrap();
        assert_eq!(d.row(0).as_slice(), &[1.0]);
        // ascending order regardless of input order
        let d = build_subset_design(&u, &[1, 0], false).unwrap();
        assert_eq!(d.row(0).as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn subset_full_model_is_intercept_plus_inputs() {
        let u = DMatrix::from_fn(3, 6, |i, j| (i * 7 + j) as f64 * 0.37 - 1.0);
        let d = build_subset_design(&u, &[0, 1, 2, 3, 4, 5], true).unwrap();
        assert_eq!(d.nrows(), 3);
        assert_eq!(d.ncols(), 7);
        for i in 0..3 {
            assert_eq!(d.as_matrix()[(i, 0)], 1.0);
            for j in 0..6 {
                assert_eq!(d.as_matrix()[(i, j + 1)], u[(i, j)]);
            }
        }
    }

    #[test]
    fn subset_rejects_bad_indices() {
        let u = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        assert!(matches!(build_subset_design(&u, &[2], true), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_subset_design(&u, &[1, 1], true), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn mean_of_two_points() {
        let d = DesignMatrix::new(DMatrix::from_row_slice(2, 1, &[1.0, 1.0])).unwrap();
        let y = DVector::from_vec(vec![1.0, 3.0]);
        let spec = ModelSpec::subset(vec![], true, VarianceMode::Known(1.0));
        let fit = fit_ols(&d, &y, &spec).unwrap();
        assert!((fit.mu_hat[0] - 2.0).abs() < 1e-12);
        assert!((fit.rss - 2.0).abs() < 1e-12);
        assert_eq!(fit.k, 1);
        let expected = -(2.0 * std::f64::consts::PI).ln() - 1.0;
        assert!((fit.log_lik - expected).abs() < 1e-12);
    }

    #[test]
    fn saturated_unknown_variance_is_degenerate() {
        let d = DesignMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let y = DVector::from_vec(vec![5.0, 7.0]);
        let spec = ModelSpec::subset(vec![0, 1], false, VarianceMode::Unknown);
        assert!(matches!(fit_ols(&d, &y, &spec), Err(Error::DegenerateFit { .. })));
    }

    #[test]
    fn rank_deficient_and_short_designs() {
        let d = DesignMatrix::new(DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]))
            .unwrap();
        let y = DVector::from_vec(vec![1.0, 2.0, 4.0]);
        let spec = ModelSpec::subset(vec![0, 1], false, VarianceMode::Unknown);
        assert!(matches!(fit_ols(&d, &y, &spec), Err(Error::SingularDesign { .. })));

        let d = DesignMatrix::new(DMatrix::from_row_slice(1, 2, &[1.0, 2.0])).unwrap();
        let y = DVector::from_vec(vec![1.0]);
        assert!(matches!(
            fit_ols(&d, &y, &spec),
            Err(Error::InsufficientData { n: 1, k: 2 })
        ));
    }

    #[test]
    fn predict_dot_product() {
        let d = DesignMatrix::new(DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]))
            .unwrap();
        let spec = ModelSpec::subset(vec![0], true, VarianceMode::Known(1.0));
        let mut fit = fit_ols(&d, &DVector::from_vec(vec![1.0, 2.0, 3.0]), &spec).unwrap();
        fit.mu_hat = DVector::from_vec(vec![2.0, 1.0]);
        assert_eq!(predict(&fit, &DVector::from_vec(vec![1.0, 3.0])).unwrap(), 5.0);
        fit.mu_hat.fill(0.0);
        assert_eq!(predict(&fit, &DVector::from_vec(vec![0.3, -8.0])).unwrap(), 0.0);
        assert!(matches!(
            predict(&fit, &DVector::from_vec(vec![1.0])),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn linear_truth_is_interpolated() {
        let xs = [-1.5, -0.5, 0.0, 0.7, 1.1, 2.0];
        let spec = ModelSpec::polynomial(3, PolyBasis::Monomial, VarianceMode::Known(0.1));
        let inputs = DMatrix::from_column_slice(xs.len(), 1, &xs);
        let y = DVector::from_iterator(xs.len(), xs.iter().map(|x| x + 2.0));
        let model = spec.fit(&Dataset::new(inputs, y).unwrap()).unwrap();
        assert!((model.predict_raw(&[4.0]).unwrap() - 6.0).abs() < 1e-8);
    }

    #[test]
    fn dataset_validation() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        assert!(Dataset::new(x.clone(), DVector::from_vec(vec![1.0])).is_err());
        assert!(Dataset::new(x, DVector::from_vec(vec![1.0, f64::INFINITY])).is_err());
        assert!(Dataset::new(DMatrix::zeros(0, 1), DVector::zeros(0)).is_err());
    }

    #[test]
    fn spec_param_counts() {
        let s = ModelSpec::polynomial(2, PolyBasis::Hermite, VarianceMode::Unknown);
        assert_eq!((s.mean_params(), s.total_params()), (3, 4));
        let s = unknown();
        assert_eq!((s.mean_params(), s.total_params()), (1, 2));
        assert_eq!(ModelSpec::subset(vec![3, 0], true, VarianceMode::Unknown).label(), "1+u1+u4");
    }
}

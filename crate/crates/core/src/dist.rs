//! Raw-input distributions used for test-input moments and data generation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputDist {
    Gaussian {
        mean: Vec<f64>,
        /// Row-major `d × d` covariance.
        covariance: Vec<Vec<f64>>,
    },
    /// Independent uniform coordinates on `[lo_j, hi_j]`.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Equal mixture of `N(0, narrow·I)` and `N(0, wide·I)`.
    SpikeSlab {
        dim: usize,
        narrow_variance: f64,
        wide_variance: f64,
    },
    /// Independent ±1 coordinates.
    Rademacher { dim: usize },
}

impl InputDist {
    pub fn standard_gaussian(dim: usize) -> Self {
        Self::gaussian_iid(dim, 0.0, 1.0)
    }

    pub fn gaussian_iid(dim: usize, mean: f64, variance: f64) -> Self {
        let covariance = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { variance } else { 0.0 }).collect())
            .collect();
        InputDist::Gaussian {
            mean: vec![mean; dim],
            covariance,
        }
    }

    /// Uniform on `[-√3, √3]^dim`: zero mean, unit variance per coordinate.
    pub fn standardized_uniform(dim: usize) -> Self {
        let a = 3f64.sqrt();
        InputDist::UniformBox {
            lo: vec![-a; dim],
            hi: vec![a; dim],
        }
    }

    /// Spike-and-slab mixture with covariances `I/5` and `9I/5`, so the
    /// overall covariance is the identity.
    pub fn spike_slab(dim: usize) -> Self {
        InputDist::SpikeSlab {
            dim,
            narrow_variance: 0.2,
            wide_variance: 1.8,
        }
    }

    /// Gaussian with the sample mean and (unbiased) sample covariance of
    /// the rows of `inputs`.
    pub fn moment_matched(inputs: &DMatrix<f64>) -> Result<Self> {
        let n = inputs.nrows();
        if n == 0 {
            return Err(Error::InvalidArgument("no inputs to smooth".into()));
        }
        let d = inputs.ncols();
        let mean: DVector<f64> = inputs.row_mean().transpose();
        let centered = DMatrix::from_fn(n, d, |i, j| inputs[(i, j)] - mean[j]);
        let cov = centered.tr_mul(&centered) / (n.saturating_sub(1).max(1) as f64);
        Ok(InputDist::Gaussian {
            mean: mean.iter().copied().collect(),
            covariance: (0..d).map(|i| (0..d).map(|j| cov[(i, j)]).collect()).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            InputDist::Gaussian { mean, .. } => mean.len(),
            InputDist::UniformBox { lo, .. } => lo.len(),
            InputDist::SpikeSlab { dim, .. } | InputDist::Rademacher { dim } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InputDist::Gaussian { mean, covariance } => {
                let d = mean.len();
                if covariance.len() != d || covariance.iter().any(|r| r.len() != d) {
                    return Err(Error::InvalidArgument(format!(
                        "gaussian covariance must be {d}×{d}"
                    )));
                }
                check_psd(&self.covariance())?;
            }
            InputDist::UniformBox { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(Error::DimensionMismatch {
                        expected: lo.len(),
                        found: hi.len(),
                    });
                }
                if lo.iter().zip(hi).any(|(l, h)| l.is_nan() || h.is_nan() || l >= h) {
                    return Err(Error::InvalidArgument("uniform box needs lo < hi".into()));
                }
            }
            InputDist::SpikeSlab {
                narrow_variance,
                wide_variance,
                ..
            } => {
                if !(*narrow_variance > 0.0 && *wide_variance > 0.0) {
                    return Err(Error::InvalidArgument(
                        "spike-and-slab variances must be positive".into(),
                    ));
                }
            }
            InputDist::Rademacher { .. } => {}
        }
        if self.dim() == 0 {
            return Err(Error::InvalidArgument("distribution has dimension 0".into()));
        }
        Ok(())
    }

    pub fn mean(&self) -> DVector<f64> {
        match self {
            InputDist::Gaussian { mean, .. } => DVector::from_column_slice(mean),
            InputDist::UniformBox { lo, hi } => {
                DVector::from_iterator(lo.len(), lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)))
            }
            InputDist::SpikeSlab { dim, .. } | InputDist::Rademacher { dim } => {
                DVector::zeros(*dim)
            }
        }
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        match self {
            InputDist::Gaussian { covariance, .. } => {
                let d = covariance.len();
                DMatrix::from_fn(d, d, |i, j| covariance[i][j])
            }
            InputDist::UniformBox { lo, hi } => DMatrix::from_diagonal(&DVector::from_iterator(
                lo.len(),
                lo.iter().zip(hi).map(|(l, h)| (h - l).powi(2) / 12.0),
            )),
            InputDist::SpikeSlab {
                dim,
                narrow_variance,
                wide_variance,
            } => DMatrix::identity(*dim, *dim) * (0.5 * (narrow_variance + wide_variance)),
            InputDist::Rademacher { dim } => DMatrix::identity(*dim, *dim),
        }
    }

    /// Raw moments `E[x^p]` for `p = 0..=max_power` of a one-dimensional
    /// distribution.
    pub fn raw_moments_1d(&self, max_power: usize) -> Result<Vec<f64>> {
        if self.dim() != 1 {
            return Err(Error::InvalidArgument(format!(
                "univariate moments requested from a {}-dimensional distribution",
                self.dim()
            )));
        }
        let moments = match self {
            InputDist::Gaussian { mean, covariance } => {
                gaussian_moments(mean[0], covariance[0][0], max_power)
            }
            InputDist::UniformBox { lo, hi } => {
                let (a, b) = (lo[0], hi[0]);
                (0..=max_power)
                    .map(|p| {
                        let q = p as i32 + 1;
                        (b.powi(q) - a.powi(q)) / (q as f64 * (b - a))
                    })
                    .collect()
            }
            InputDist::SpikeSlab {
                narrow_variance,
                wide_variance,
                ..
            } => {
                let narrow = gaussian_moments(0.0, *narrow_variance, max_power);
                let wide = gaussian_moments(0.0, *wide_variance, max_power);
                narrow.iter().zip(&wide).map(|(a, b)| 0.5 * (a + b)).collect()
            }
            InputDist::Rademacher { .. } => (0..=max_power)
                .map(|p| if p % 2 == 0 { 1.0 } else { 0.0 })
                .collect(),
        };
        Ok(moments)
    }

    /// Draws `n` iid rows.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
        self.validate()?;
        let d = self.dim();
        let mut out = DMatrix::zeros(n, d);
        match self {
            InputDist::Gaussian { .. } => {
                let root = psd_sqrt(&self.covariance());
                let mean = self.mean();
                let mut z = DVector::zeros(d);
                for i in 0..n {
                    for zj in z.iter_mut() {
                        *zj = rng.sample(StandardNormal);
                    }
                    let x = &mean + &root * &z;
                    out.row_mut(i).copy_from(&x.transpose());
                }
            }
            InputDist::UniformBox { lo, hi } => {
                for i in 0..n {
                    for j in 0..d {
                        let u: f64 = rng.random();
                        out[(i, j)] = lo[j] + (hi[j] - lo[j]) * u;
                    }
                }
            }
            InputDist::SpikeSlab {
                narrow_variance,
                wide_variance,
                ..
            } => {
                let (s_narrow, s_wide) = (narrow_variance.sqrt(), wide_variance.sqrt());
                for i in 0..n {
                    let scale = if rng.random::<bool>() { s_wide } else { s_narrow };
                    for j in 0..d {
                        let z: f64 = rng.sample(StandardNormal);
                        out[(i, j)] = scale * z;
                    }
                }
            }
            InputDist::Rademacher { .. } => {
                for v in out.iter_mut() {
                    *v = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
            }
        }
        Ok(out)
    }
}

fn gaussian_moments(mean: f64, variance: f64, max_power: usize) -> Vec<f64> {
    let mut m = Vec::with_capacity(max_power + 1);
    m.push(1.0);
    if max_power >= 1 {
        m.push(mean);
    }
    for p in 2..=max_power {
        let next = mean * m[p - 1] + (p - 1) as f64 * variance * m[p - 2];
        m.push(next);
    }
    m
}

/// Checks symmetry (relative 1e-10) and positive semidefiniteness.
pub(crate) fn check_psd(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotPositiveSemidefinite("matrix is not square".into()));
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > 1e-10 * scale {
        return Err(Error::NotPositiveSemidefinite(format!(
            "asymmetry {asym:.3e} exceeds tolerance"
        )));
    }
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let min = eig.eigenvalues.min();
    if min < -1e-10 * scale {
        return Err(Error::NotPositiveSemidefinite(format!(
            "smallest eigenvalue {min:.3e} is negative"
        )));
    }
    Ok(())
}

/// Symmetric square root of a PSD matrix.
fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose()
}

//! Design-basis second moments `E[x xᵀ]` of a raw-input distribution.

use nalgebra::DMatrix;

use crate::dist::InputDist;
use crate::error::{Error, Result};
use crate::linear::{Basis, ModelSpec, PolyBasis};

/// Coefficients of `He_0 ..= He_degree` in the monomial basis; row `j`
/// holds the coefficients of `He_j`.
fn hermite_coefficients(degree: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(degree + 1, degree + 1);
    c[(0, 0)] = 1.0;
    if degree >= 1 {
        c[(1, 1)] = 1.0;
    }
    for j in 1..degree {
        // He_{j+1} = x·He_j − j·He_{j−1}
        for l in 0..=j {
            c[(j + 1, l + 1)] += c[(j, l)];
        }
        for l in 0..j {
            c[(j + 1, l)] -= j as f64 * c[(j - 1, l)];
        }
    }
    c
}

/// `E[x xᵀ]` where `x` is the design vector of a draw from `dist` under
/// `spec`'s basis. All supported distributions have closed-form moments.
pub fn second_moment_for_spec(spec: &ModelSpec, dist: &InputDist) -> Result<DMatrix<f64>> {
    dist.validate()?;
    match &spec.basis {
        Basis::Polynomial { degree, kind } => {
            let m = dist.raw_moments_1d(2 * degree)?;
            let size = degree + 1;
            let mono = DMatrix::from_fn(size, size, |i, j| m[i + j]);
            Ok(match kind {
                PolyBasis::Monomial => mono,
                PolyBasis::Hermite => {
                    let c = hermite_coefficients(*degree);
                    &c * mono * c.transpose()
                }
            })
        }
        Basis::Subset { columns, intercept } => {
            spec.validate(dist.dim())?;
            let mut cols = columns.clone();
            cols.sort_unstable();
            let mean = dist.mean();
            let cov = dist.covariance();
            let off = usize::from(*intercept);
            let size = cols.len() + off;
            if size == 0 {
                return Err(Error::InvalidArgument("model has no design columns".into()));
            }
            let mut out = DMatrix::zeros(size, size);
            if *intercept {
                out[(0, 0)] = 1.0;
                for (a, &ca) in cols.iter().enumerate() {
                    out[(0, a + 1)] = mean[ca];
                    out[(a + 1, 0)] = mean[ca];
                }
            }
            for (a, &ca) in cols.iter().enumerate() {
                for (b, &cb) in cols.iter().enumerate() {
                    out[(a + off, b + off)] = cov[(ca, cb)] + mean[ca] * mean[cb];
                }
            }
            Ok(out)
        }
    }
}

/// Empirical second moment `(1/n)XᵀX` of a design.
pub fn empirical_second_moment(design: &crate::linear::DesignMatrix) -> DMatrix<f64> {
    design.gram() / design.nrows() as f64
}

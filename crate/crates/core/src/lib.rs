//! Extra-sample (XAIC) and focused (FAIC) variants of Akaike's information
//! criterion for Gaussian linear models.
//!
//! Classical AIC estimates the in-sample error: it scores a fitted model on
//! fresh outputs at the *training* inputs. XAIC replaces one of AIC's two
//! `k` penalty terms by `κ`, a trace term that measures how far the test
//! inputs lie from the training inputs, so the score estimates the error at
//! the inputs where predictions will actually be made. FAIC takes the test
//! input to be the single point being predicted.
//!
//! The crate is organised bottom-up:
//!
//! - [`linear`]: design matrices, QR-based least squares, Gaussian likelihood.
//! - [`dist`] and [`moments`]: input distributions and the design-basis
//!   second moments `E[x xᵀ]` that the distribution form of `κ` needs.
//! - [`criteria`]: `κ` in every test-input regime, XAIC/XAICc/FAIC/FAICc,
//!   AIC/AICc/BIC/GCV, Akaike weights and selection.
//! - [`bayes`]: marginal likelihoods, posterior model weights, BMA.
//! - [`sim`]: seeded data generation, Monte Carlo oracles and the
//!   univariate/multivariate experiment runners.
//! - [`report`]: CSV and SVG emitters for experiment reports.

pub mod bayes;
pub mod criteria;
pub mod dist;
mod error;
pub mod linear;
pub mod moments;
pub mod quadrature;
pub mod report;
pub mod sim;

pub use error::{Error, Result};

pub use bayes::{
    bma_predict, gaussian_slab_posterior, log_marginal_gaussian_slab, log_marginal_jeffreys,
    model_posterior, posterior_predictive_variance, PosteriorSummary, Predictor, PriorSpec,
    SlabModel, SlabPosterior,
};
pub use criteria::{
    akaike_weights, select, Criterion, CriterionScore, TestInputSpec,
};
pub use dist::InputDist;
pub use linear::{
    build_polynomial_design, build_subset_design, fit_ols, predict, Basis, Dataset,
    DesignMatrix, FitResult, FittedModel, LeastSquares, ModelSpec, PolyBasis, VarianceMode,
};

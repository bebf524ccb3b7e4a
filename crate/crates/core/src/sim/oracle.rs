//! Monte Carlo checks of the extra-sample error identities and of the
//! growth of `E κ` along a nested model ladder.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{add_noise, gen_inputs, redraw_cap, substream, with_redraws, Purpose, TrueModel};
use crate::criteria::{kappa_explicit, xaic, xaicc};
use crate::dist::InputDist;
use crate::error::{Error, Result};
use crate::linear::{LeastSquares, ModelSpec, VarianceMode};

const CHUNK: usize = 1024;

/// Per-chunk moments of the κ values and of consecutive differences.
type LadderChunk = (Vec<Moments>, Vec<Moments>, usize);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub reps: usize,
    pub seed: u64,
    /// Added to every `κ` on the right-hand side. Nonzero values exist to
    /// confirm that the check can fail.
    pub kappa_offset: f64,
}

impl OracleOptions {
    pub fn new(reps: usize, seed: u64) -> Self {
        Self {
            reps,
            seed,
            kappa_offset: 0.0,
        }
    }
}

/// Paired Monte Carlo estimate of the extra-sample error (`lhs`) and of the
/// training-data expression that should equal it in expectation (`rhs`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    /// Mean of the per-replicate `lhs − rhs`.
    pub diff: f64,
    pub diff_se: f64,
    /// Mean in-sample `−2 log L`.
    pub neg2_log_lik: f64,
    pub reps: usize,
    pub rejected: usize,
}

impl OracleEstimate {
    /// `|diff| ≤ z·SE(diff)`.
    pub fn agrees_within(&self, z: f64) -> bool {
        self.diff.abs() <= z * self.diff_se
    }
}

#[derive(Default, Clone, Copy)]
struct Moments {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n
    }

    fn se(&self) -> f64 {
        let mean = self.mean();
        let var = ((self.sum_sq - self.n * mean * mean) / (self.n - 1.0)).max(0.0);
        (var / self.n).sqrt()
    }
}

/// Gaussian log-likelihood of `y` under mean `Xμ` and variance `s2`.
fn gaussian_log_lik(design: &DMatrix<f64>, mu: &DVector<f64>, y: &DVector<f64>, s2: f64) -> f64 {
    let rss = (y - design * mu).norm_squared();
    let n = y.len() as f64;
    -0.5 * n * (2.0 * std::f64::consts::PI * s2).ln() - rss / (2.0 * s2)
}

/// Estimates `−2(n/n′)·E log g(Y′ | X′, θ̂(X, Y))` by drawing fresh `(Y, Y′)`
/// pairs from `truth`, fitting on `(X, Y)` and scoring on `(X′, Y′)`.
///
/// The right-hand side is XAIC (known variance) or XAICc (unknown variance)
/// with the explicit `κ` for `X′`, averaged over the same replicates.
pub fn mc_extra_sample_error(
    spec: &ModelSpec,
    x_raw: &DMatrix<f64>,
    xprime_raw: &DMatrix<f64>,
    truth: &TrueModel,
    opts: &OracleOptions,
) -> Result<OracleEstimate> {
    if opts.reps < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 replicates, got {}",
            opts.reps
        )));
    }
    let ls = LeastSquares::new(spec.design(x_raw)?)?;
    let xprime = spec.design(xprime_raw)?;
    let (n, n_test) = (ls.n() as f64, xprime.nrows() as f64);

    let kappa = kappa_explicit(ls.design(), &xprime, spec.variance)? + opts.kappa_offset;

    let truth_train = truth.f.eval_rows(x_raw)?;
    let truth_test = truth.f.eval_rows(xprime_raw)?;
    let cap = redraw_cap(opts.reps);

    let one = |rep: usize| -> Result<([f64; 4], usize)> {
        with_redraws(cap, |attempt| {
            let mut rng = substream(opts.seed, rep as u64, attempt, Purpose::TrainNoise, 0);
            let y = add_noise(&truth_train, truth.noise_variance, &mut rng)?;
            let mut rng = substream(opts.seed, rep as u64, attempt, Purpose::TestNoise, 0);
            let y_test = add_noise(&truth_test, truth.noise_variance, &mut rng)?;

            let fit = ls.fit(&y, spec.variance)?;
            let rhs = match spec.variance {
                VarianceMode::Known(_) => xaic(&fit, kappa)?,
                VarianceMode::Unknown => xaicc(&fit, kappa)?,
            }
            .value;
            let ll_test = gaussian_log_lik(xprime.as_matrix(), &fit.mu_hat, &y_test, fit.sigma2_hat);
            let lhs = -2.0 * (n / n_test) * ll_test;
            Ok([lhs, rhs, lhs - rhs, fit.neg2_log_lik()])
        })
    };

    let chunks: Vec<Result<([Moments; 4], usize)>> = (0..opts.reps.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = [Moments::default(); 4];
            let mut rejected = 0;
            for rep in c * CHUNK..((c + 1) * CHUNK).min(opts.reps) {
                let (vals, r) = one(rep)?;
                rejected += r;
                for (m, v) in acc.iter_mut().zip(vals) {
                    m.push(v);
                }
            }
            Ok((acc, rejected))
        })
        .collect();

    let mut total = [Moments::default(); 4];
    let mut rejected = 0;
    for chunk in chunks {
        let (acc, r) = chunk?;
        rejected += r;
        for (t, a) in total.iter_mut().zip(acc.iter()) {
            t.merge(a);
        }
    }
    if rejected > cap {
        return Err(Error::RedrawCapExceeded { redraws: rejected, cap });
    }
    Ok(OracleEstimate {
        lhs: total[0].mean(),
        lhs_se: total[0].se(),
        rhs: total[1].mean(),
        rhs_se: total[1].se(),
        diff: total[2].mean(),
        diff_se: total[2].se(),
        neg2_log_lik: total[3].mean(),
        reps: opts.reps,
        rejected,
    })
}

/// Monte Carlo `E κ_x` (known variance) along a model ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaBias {
    pub labels: Vec<String>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    /// `E κ` of model `i + 1` minus that of model `i`, from paired replicates.
    pub diff_mean: Vec<f64>,
    pub diff_se: Vec<f64>,
    pub reps: usize,
    pub rejected: usize,
}

/// Draws a training set of size `n` and one test point from `input_dist` per
/// replicate and records `n·xᵀ(XᵀX)⁻¹x` for every model in `ladder`.
pub fn kappa_bias_mc(
    ladder: &[ModelSpec],
    input_dist: &InputDist,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<KappaBias> {
    if ladder.is_empty() {
        return Err(Error::InvalidArgument("empty model ladder".into()));
    }
    if reps < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 replicates, got {reps}")));
    }
    for spec in ladder {
        spec.validate(input_dist.dim())?;
    }
    let m = ladder.len();
    let cap = redraw_cap(reps);

    let one = |rep: usize| -> Result<(Vec<f64>, usize)> {
        with_redraws(cap, |attempt| {
            let mut rng = substream(seed, rep as u64, attempt, Purpose::TrainInputs, 0);
            let x = gen_inputs(input_dist, n, &mut rng)?;
            let mut rng = substream(seed, rep as u64, attempt, Purpose::TestInputs, 0);
            let point = gen_inputs(input_dist, 1, &mut rng)?;
            let point: Vec<f64> = point.iter().copied().collect();
            ladder
                .iter()
                .map(|spec| {
                    let ls = LeastSquares::new(spec.design(&x)?)?;
                    let v = spec.design_vector(&point)?;
                    Ok(n as f64 * v.dot(&(ls.gram_inv() * &v)))
                })
                .collect::<Result<Vec<f64>>>()
        })
    };

    let chunks: Vec<Result<LadderChunk>> = (0..reps.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut level = vec![Moments::default(); m];
            let mut step = vec![Moments::default(); m.saturating_sub(1)];
            let mut rejected = 0;
            for rep in c * CHUNK..((c + 1) * CHUNK).min(reps) {
                let (k, r) = one(rep)?;
                rejected += r;
                for (acc, v) in level.iter_mut().zip(&k) {
                    acc.push(*v);
                }
                for (i, acc) in step.iter_mut().enumerate() {
                    acc.push(k[i + 1] - k[i]);
                }
            }
            Ok((level, step, rejected))
        })
        .collect();

    let mut level = vec![Moments::default(); m];
    let mut step = vec![Moments::default(); m.saturating_sub(1)];
    let mut rejected = 0;
    for chunk in chunks {
        let (l, s, r) = chunk?;
        rejected += r;
        level.iter_mut().zip(&l).for_each(|(a, b)| a.merge(b));
        step.iter_mut().zip(&s).for_each(|(a, b)| a.merge(b));
    }
    if rejected > cap {
        return Err(Error::RedrawCapExceeded { redraws: rejected, cap });
    }
    Ok(KappaBias {
        labels: ladder.iter().map(ModelSpec::label).collect(),
        mean: level.iter().map(Moments::mean).collect(),
        se: level.iter().map(Moments::se).collect(),
        diff_mean: step.iter().map(Moments::mean).collect(),
        diff_se: step.iter().map(Moments::se).collect(),
        reps,
        rejected,
    })
}

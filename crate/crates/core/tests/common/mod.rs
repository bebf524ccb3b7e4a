//! Property checks shared by the property suite and the acceptance gate.
//!
//! Each check draws its own random instances through proptest and returns
//! the failure message of the first counterexample, if any.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use xsel_core::criteria::{aic, aicc, bic, gcv, xaic, xaicc};
use xsel_core::{
    akaike_weights, bma_predict, build_polynomial_design, model_posterior,
    posterior_predictive_variance, select, CriterionScore, Dataset, DesignMatrix, FittedModel,
    LeastSquares, ModelSpec, PolyBasis, Predictor, VarianceMode,
};
use xsel_core::sim::{
    gen_inputs, gen_outputs, mc_extra_sample_error, run_multivariate, run_univariate, substream,
    MultivariateConfig, OracleOptions, Purpose, TrainDist, TrueModel, TruthFn, UnivariateConfig,
    XaicRegime,
};

pub type Check = fn(u32) -> Result<(), String>;

pub const SUITE: &[(&str, Check)] = &[
    ("idempotent refit", idempotent_refit),
    ("nesting monotonicity", nesting_monotonicity),
    ("basis equivalence", basis_equivalence),
    ("unknown-variance log-likelihood", unknown_variance_log_lik),
    ("kappa nonnegativity", kappa_nonnegative),
    ("AIC recovery", aic_recovery),
    ("orthonormal kappa", orthonormal_kappa),
    ("scale invariance of selection", scale_invariance),
    ("Akaike weight shift invariance", akaike_shift_invariance),
    ("posterior weight normalization and shift invariance", posterior_weights),
    ("BMS order invariance", bms_order_invariance),
    ("kappa and predictive variance", kappa_variance_relation),
    ("single-model BMA equals OLS prediction", single_model_bma),
];

pub fn run(cases: u32, check: impl Fn(u64) -> Result<(), TestCaseError>) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&any::<u64>(), check).map_err(|e| e.to_string())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

fn uniform_usize(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> usize {
    use rand::Rng;
    rng.random_range(lo..=hi)
}

/// A random well-conditioned design with intercept, `n × k`.
pub fn random_design(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DesignMatrix {
    let mut m = gaussian_matrix(rng, n, k);
    m.column_mut(0).fill(1.0);
    DesignMatrix::new(m).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub fn idempotent_refit(cases: u32) -> Result<(), String> {
    run(cases, |seed| {
        let mut r = rng(seed);
        let n = uniform_usize(&mut r, 8, 40);
        let degree = uniform_usize(&mut r, 0, 4);
        let x = gaussian_matrix(&mut r, n, 1);
        let y = gaussian_vector(&mut r, n);
        let data = Dataset::new(x, y).unwrap();
        let spec = ModelSpec::polynomial(degree, PolyBasis::Hermite, VarianceMode::Unknown);
        let a = spec.fit(&data).unwrap();
        let b = spec.fit(&data).unwrap();
        ensure(a == b, || "refit differs".into())
    })
}

pub fn nesting_monotonicity(cases: u32) -> Result<(), String> {
    run(cases, |seed| {
        let mut r = rng(seed);
        let n = uniform_usize(&mut r, 10, 50);
        let k = uniform_usize(&mut r, 2, 7);
        let big = random_design(&mut r, n, k);
        let y = gaussian_vector(&mut r, n);
        let mut prev = f64::INFINITY;
        for cols in 1..=k {
            let sub = DesignMatrix::new(big.as_matrix().columns(0, cols).into_owned()).unwrap();
            let rss = LeastSquares::new(sub).unwrap().fit(&y, VarianceMode::Unknown).unwrap().rss;
            ensure(rss <= prev * (1.0 + 1e-12), || format!("rss rose from {prev} to {rss} at {cols} columns"))?;
            prev = rss;
        }
        Ok(())
    })
}

pub fn basis_equivalence(cases: u32) -> Result<(), String> {
    run(cases, |seed| {
        let mut r = rng(seed);
        let n = uniform_usize(&mut r, 12, 60);
        let degree = uniform_usize(&mut r, 0, 6);
        let xs: Vec<f64> = gaussian_vector(&mut r, n).iter().copied().collect();
        let y = gaussian_vector(&mut r, n);
        let fit = |kind| {
            let d = build_polynomial_design(&xs, degree, kind).unwrap();
            LeastSquares::new(d).unwrap().fit(&y, VarianceMode::Unknown).unwrap()
        };
        let (m, h) = (fit(PolyBasis::Monomial), fit(PolyBasis::Hermite));
        ensure(rel_close(m.rss, h.rss, 1e-8), || format!("rss {} vs {}", m.rss, h.rss))?;
        ensure(rel_close(m.log_lik, h.log_lik, 1e-8), || {
            format!("log-likelihood {} vs {}", m.log_lik, h.log_lik)
        })
    })
}

pub fn unknown_variance_log_lik(cases: u32) -> Result<(), String> {
    run(cases, |seed| {
        let mut r = rng(seed);
        let n = uniform_usize(&mut r, 6, 40);
        let k = uniform_usize(&mut r, 1, 4);
        let d = random_design(&mut r, n, k);
        let y = gaussian_vector(&mut r, n);
        let fit = LeastSquares::new(d).unwrap().fit(&y, VarianceMode::Unknown).unwrap();
        let nf = n as f64;
        let expected = -(nf / 2.0) * ((2.0 * std::f64::consts::PI * fit.rss / nf).ln() + 1.0);
        ensure(fit.log_lik == expected, || format!("{} vs {expected}", fit.log_lik))
    })
}

pub fn kappa_nonnegative(cases: u32) -> Result<(), String> {
    run(cases, |seed| {
        let mut r = rng(seed);
        let n = uniform_usize(&mut r, 8, 40);
        let k = uniform_usize(&mut r, 1, 5);
        let d = random_design(&mut r, n, k);
        let m = uniform_usize(&mut r, 1, 10);
        let mut xp = gaussian_matrix(&mut r, m, k);
        let zero_rows = uniform_usize(&mut r, 0, m - 1);
        for i in 0..zero_rows {
            xp.row_mut(i).fill(0.0);
        }
        let y = gaussian_vector(&mut r, n);
        let fit = LeastSquares::new(d).unwrap().fit(&y, VarianceMode::Known(1.0)).unwrap();
        let kappa = fit.kappa_explicit(&DesignMatrix::new(xp).unwrap()).unwrap();
        ensure(kappa > 0.0, || format!("kappa {kappa} with a nonzero test row"))?;
        let zero = DesignMatrix::new(DMatrix::zeros(m, k)).unwrap();
        let k0 = fit.kappa_explicit(&zero).unwrap();
        ensure(k0 == 0.0, || format!("kappa {k0} for all-zero test rows"))
    })
}

pub fn aic_recovery(cases: u32) -> Result<(), String> {
    run(cases, |seed| {
        let mut r = rng(seed);
        let n = uniform_usize(&mut r, 8, 60);
        let k = uniform_usize(&mut r, 1, 5);
        let d = random_design(&mut r, n, k);
        let y = gaussian_vector(&mut r, n);
        let variance = if seed % 2 == 0 { VarianceMode::Unknown } else { VarianceMode::Known(0.7) };
        let fit = LeastSquares::new(d).unwrap().fit(&y, variance).unwrap();
        let x = xaic(&fit, fit.kappa_empirical()).unwrap();
        let a = aic(&fit);
        ensure(x.value.to_bits() == a.value.to_bits(), || format!("{} vs {}", x.value, a.value))?;
        let penalty = x.penalty_k + x.penalty_kappa.unwrap();
        ensure(penalty == a.penalty_k && penalty == 2.0 * fit.k as f64, || {
            format!("penalty {penalty} vs {}", a.penalty_k)
        })?;
        if n > fit.k + 1 {
            let xc = xaicc(&fit, fit.kappa_empirical()).unwrap();
            let ac = aicc(&fit).unwrap();
            ensure(xc.value.to_bits() == ac.value.to_bits(), || format!("{} vs {}", xc.value, ac.value))?;
        }
        Ok(())
    })
}

pub fn orthonormal_kappa(cases: u32) -> Result<(), String> {
    run(cases, |seed| {
        let mut r = rng(seed);
        let n = uniform_usize(&mut r, 6, 40);
        let k = uniform_usize(&mut r, 1, 5);
        let d = random_design(&mut r, n, k);
        let nf = n as f64;
        let qr = d.as_matrix().clone().qr();
        let z = DesignMatrix::new(qr.q() * nf.sqrt()).unwrap();
        let x = gaussian_vector(&mut r, k);
        let point = qr.r().transpose().solve_lower_triangular(&x).unwrap() * nf.sqrt();
        let kappa = xsel_core::criteria::kappa_focus(&z, &point, VarianceMode::Known(1.0)).unwrap();
        let norm = point.norm_squared();
        ensure((kappa - norm).abs() <= 1e-10 * norm.max(1.0), || format!("{kappa} vs {norm}"))
    })
}

fn all_scores(fits: &[xsel_core::FitResult]) -> Vec<Vec<CriterionScore>> {
    let per = |f: &dyn Fn(&xsel_core::FitResult) -> CriterionScore| -> Vec<CriterionScore> {
        fits.iter().enumerate().map(|(i, fit)| f(fit).with_model(i)).collect()
    };
    vec![
        per(&aic),
        per(&|f| aicc(f).unwrap()),
        per(&bic),
        per(&|f| gcv(f).unwrap()),
        per(&|f| xaic(f, f.kappa_focus(&DVector::from_element(f.k_mu(), 1.5)).unwrap()).unwrap()),
        per(&|f| xaicc(f, f.kappa_focus(&DVector::from_element(f.k_mu(), -0.5)).unwrap()).unwrap()),
    ]
}

pub fn scale_invariance(cases: u32) -> Result<(), String> {
    run(cases, |seed| {
        let mut r = rng(seed);
        let n = uniform_usize(&mut r, 20, 50);
        let big = random_design(&mut r, n, 5);
        let y = gaussian_vector(&mut r, n);
        let c = 0.1 + 9.9 * (seed % 1000) as f64 / 1000.0;
        let sigma2 = 0.5;
        let fits_for = |y: &DVector<f64>, s2: f64| -> Vec<xsel_core::FitResult> {
            (1..=5)
                .map(|cols| {
                    let d = DesignMatrix::new(big.as_matrix().columns(0, cols).into_owned()).unwrap();
                    LeastSquares::new(d).unwrap().fit(y, VarianceMode::Known(s2)).unwrap()
                })
                .collect()
        };
        let base = all_scores(&fits_for(&y, sigma2));
        let scaled = all_scores(&fits_for(&(&y * c), sigma2 * c * c));
        for (a, b) in base.iter().zip(&scaled) {
            let (sa, sb) = (select(a).unwrap(), select(b).unwrap());
            ensure(sa == sb, || format!("{} picks {sa} then {sb} at c = {c}", a[0].criterion))?;
        }
        Ok(())
    })
}

pub fn akaike_shift_invariance(cases: u32) -> Result<(), String> {
    run(cases, |seed| {
        let mut r = rng(seed);
        let m = uniform_usize(&mut r, 1, 8);
        let values = gaussian_vector(&mut r, m) * 5.0;
        let z: f64 = StandardNormal.sample(&mut r);
        let shift = 100.0 * z;
        let mk = |v: f64, i: usize| {
            let mut s = aic(&LeastSquares::new(DesignMatrix::new(DMatrix::from_element(3, 1, 1.0)).unwrap())
                .unwrap()
                .fit(&DVector::from_vec(vec![0.0, 1.0, 2.0]), VarianceMode::Known(1.0))
                .unwrap());
            s.value = v;
            s.with_model(i)
        };
        let a: Vec<CriterionScore> = values.iter().enumerate().map(|(i, v)| mk(*v, i)).collect();
        let b: Vec<CriterionScore> = values.iter().enumerate().map(|(i, v)| mk(v + shift, i)).collect();
        let (wa, wb) = (akaike_weights(&a).unwrap(), akaike_weights(&b).unwrap());
        for (x, y) in wa.iter().zip(&wb) {
            ensure((x - y).abs() <= 1e-12, || format!("{x} vs {y} after shift {shift}"))?;
        }
        ensure((wa.iter().sum::<f64>() - 1.0).abs() <= 1e-12, || "weights do not sum to 1".into())
    })
}

pub fn posterior_weights(cases: u32) -> Result<(), String> {
    run(cases, |seed| {
        let mut r = rng(seed);
        let m = uniform_usize(&mut r, 1, 10);
        let lml: Vec<f64> = (gaussian_vector(&mut r, m) * 20.0).iter().copied().collect();
        let z: f64 = StandardNormal.sample(&mut r);
        let shift = 1e3 * z;
        let a = model_posterior(&lml).unwrap();
        let b = model_posterior(&lml.iter().map(|l| l + shift).collect::<Vec<_>>()).unwrap();
        ensure((a.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12, || "weights do not sum to 1".into())?;
        for (x, y) in a.weights.iter().zip(&b.weights) {
            ensure((x - y).abs() <= 1e-12, || format!("{x} vs {y} after shift {shift}"))?;
        }
        ensure(a.map_model == b.map_model, || "MAP model moved under shift".into())?;
        let best = a.weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ensure(a.weights[a.map_model] == best, || "MAP model is not the heaviest".into())
    })
}

pub fn bms_order_invariance(cases: u32) -> Result<(), String> {
    run(cases, |seed| {
        let mut r = rng(seed);
        let m = uniform_usize(&mut r, 2, 10);
        let lml: Vec<f64> = (gaussian_vector(&mut r, m) * 3.0).iter().copied().collect();
        let mut order: Vec<usize> = (0..m).collect();
        order.rotate_left(uniform_usize(&mut r, 0, m - 1));
        order.swap(0, m - 1);
        let permuted: Vec<f64> = order.iter().map(|&i| lml[i]).collect();
        let a = model_posterior(&lml).unwrap();
        let b = model_posterior(&permuted).unwrap();
        ensure(order[b.map_model] == a.map_model, || "different MAP model after reordering".into())
    })
}

pub fn kappa_variance_relation(cases: u32) -> Result<(), String> {
    run(cases, |seed| {
        let mut r = rng(seed);
        let n = uniform_usize(&mut r, 6, 40);
        let k = uniform_usize(&mut r, 1, 5);
        let d = random_design(&mut r, n, k);
        let y = gaussian_vector(&mut r, n);
        let sigma2 = 0.05 + (seed % 100) as f64 / 10.0;
        let fit = LeastSquares::new(d).unwrap().fit(&y, VarianceMode::Known(sigma2)).unwrap();
        let x = gaussian_vector(&mut r, k) * 2.0;
        let v = posterior_predictive_variance(&fit, &x, sigma2).unwrap();
        let kappa = fit.kappa_focus(&x).unwrap();
        let expected = sigma2 * (1.0 + kappa / n as f64);
        ensure((v - expected).abs() <= 1e-12 * expected, || format!("{v} vs {expected}"))?;
        let lhs = v - sigma2;
        let rhs = sigma2 / n as f64 * kappa;
        ensure((lhs - rhs).abs() <= 1e-10 * expected, || format!("{lhs} vs {rhs}"))
    })
}

pub fn single_model_bma(cases: u32) -> Result<(), String> {
    run(cases, |seed| {
        let mut r = rng(seed);
        let n = uniform_usize(&mut r, 8, 40);
        let degree = uniform_usize(&mut r, 0, 4);
        let x = gaussian_matrix(&mut r, n, 1);
        let y = gaussian_vector(&mut r, n);
        let spec = ModelSpec::polynomial(degree, PolyBasis::Hermite, VarianceMode::Unknown);
        let fitted: FittedModel = spec.fit(&Dataset::new(x, y).unwrap()).unwrap();
        let point = [StandardNormal.sample(&mut r)];
        let direct = xsel_core::predict(&fitted.fit, &spec.design_vector(&point).unwrap()).unwrap();
        let bma = bma_predict(std::slice::from_ref(&fitted), &[1.0], &point).unwrap();
        ensure(bma == direct && fitted.predict_at(&point).unwrap() == direct, || {
            format!("{bma} vs {direct}")
        })
    })
}

pub type SimCheck = fn() -> Result<(), String>;

pub const SIM_SUITE: &[(&str, SimCheck)] = &[
    ("determinism", sim_determinism),
    ("seed independence of structure", seed_structure),
    ("empirical regime matches AICc", empirical_regime),
    ("oracle SE scaling", oracle_se_scaling),
    ("training prefix", training_prefix),
    ("report ranges", report_ranges),
];

pub fn simulation_invariants() -> Result<(), String> {
    for (name, check) in SIM_SUITE {
        check().map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(())
}

fn small_univariate(seed: u64) -> UnivariateConfig {
    UnivariateConfig {
        truth: TruthFn::F2,
        repeats: 6,
        seed,
        ..Default::default()
    }
}

fn small_multivariate(seed: u64) -> MultivariateConfig {
    MultivariateConfig {
        repeats: 4,
        n_test: 100,
        seed,
        ..Default::default()
    }
}

pub fn sim_determinism() -> Result<(), String> {
    let a = run_univariate(&small_univariate(11)).map_err(|e| e.to_string())?;
    let b = run_univariate(&small_univariate(11)).map_err(|e| e.to_string())?;
    let c = run_multivariate(&small_multivariate(11)).map_err(|e| e.to_string())?;
    let d = run_multivariate(&small_multivariate(11)).map_err(|e| e.to_string())?;
    ensure_plain(a == b && c == d, || "identical configs gave different reports".into())
}

pub fn seed_structure() -> Result<(), String> {
    let a = run_univariate(&small_univariate(1)).map_err(|e| e.to_string())?;
    let b = run_univariate(&small_univariate(2)).map_err(|e| e.to_string())?;
    ensure_plain(a.methods == b.methods, || "method rosters differ".into())?;
    ensure_plain(
        a.risk.len() == b.risk.len() && a.risk.iter().zip(&b.risk).all(|(x, y)| x.len() == y.len()),
        || "risk shapes differ".into(),
    )?;
    ensure_plain(a.selections.len() == b.selections.len(), || "selection counts differ".into())?;
    ensure_plain(a.risk != b.risk, || "seed did not change values".into())?;
    let c = run_multivariate(&small_multivariate(1)).map_err(|e| e.to_string())?;
    let d = run_multivariate(&small_multivariate(2)).map_err(|e| e.to_string())?;
    ensure_plain(
        c.methods == d.methods
            && c.settings.len() == d.settings.len()
            && c.config.models().len() == d.config.models().len(),
        || "multivariate structure differs".into(),
    )?;
    ensure_plain(c.settings[0].risk != d.settings[0].risk, || "seed did not change values".into())
}

pub fn empirical_regime() -> Result<(), String> {
    let config = MultivariateConfig {
        xaic_regime: XaicRegime::Empirical,
        ..small_multivariate(5)
    };
    let r = run_multivariate(&config).map_err(|e| e.to_string())?;
    let idx = |m: &str| r.methods.iter().position(|x| x == m).unwrap();
    for s in &r.settings {
        ensure_plain(s.per_repeat[idx("XAICc")] == s.per_repeat[idx("AICc")], || {
            format!("{}: XAICc and AICc differ", s.setting.label())
        })?;
        ensure_plain(s.per_repeat[idx("XAICcw")] == s.per_repeat[idx("AICcw")], || {
            format!("{}: XAICcw and AICcw differ", s.setting.label())
        })?;
    }
    Ok(())
}

pub fn oracle_se_scaling() -> Result<(), String> {
    let spec = ModelSpec::polynomial(1, PolyBasis::Hermite, VarianceMode::Unknown);
    let mut r = rng(3);
    let x = gaussian_matrix(&mut r, 20, 1);
    let xp = gaussian_matrix(&mut r, 8, 1) * 2.0;
    let truth = TrueModel::new(TruthFn::F1, 0.1).unwrap();
    let se = |reps| {
        mc_extra_sample_error(&spec, &x, &xp, &truth, &OracleOptions::new(reps, 9))
            .map(|e| e.diff_se)
            .map_err(|e| e.to_string())
    };
    let ratio = se(20_000)? / se(40_000)?;
    let target = std::f64::consts::SQRT_2;
    ensure_plain((ratio / target - 1.0).abs() <= 0.2, || format!("SE ratio {ratio:.3}"))
}

pub fn training_prefix() -> Result<(), String> {
    let truth = TrueModel::new(TruthFn::FMulti, 0.1).unwrap();
    let dist = TrainDist::Gaussian;
    let draw = |n| {
        let mut ri = substream(7, 3, 0, Purpose::TrainInputs, dist.variant());
        let x = gen_inputs(&dist.input_dist(6), n, &mut ri).unwrap();
        let mut rn = substream(7, 3, 0, Purpose::TrainNoise, dist.variant());
        let y = gen_outputs(&truth, &x, &mut rn).unwrap();
        (x, y)
    };
    let (x60, y60) = draw(60);
    let (x100, y100) = draw(100);
    ensure_plain(
        x100.rows(0, 60) == x60 && y100.rows(0, 60) == y60,
        || "n=60 set is not a prefix of n=100".into(),
    )
}

pub fn report_ranges() -> Result<(), String> {
    let u = run_univariate(&small_univariate(4)).map_err(|e| e.to_string())?;
    let m = run_multivariate(&small_multivariate(4)).map_err(|e| e.to_string())?;
    let n_models = u.config.max_degree + 1;
    ensure_plain(u.risk.iter().flatten().all(|v| *v >= 0.0), || "negative univariate risk".into())?;
    ensure_plain(
        u.selected.iter().flatten().all(|&i| (1..=n_models).contains(&i)),
        || "selected index out of range".into(),
    )?;
    let n_models = m.config.models().len() as f64;
    ensure_plain(
        m.settings.iter().all(|s| {
            s.risk.iter().all(|v| *v >= 0.0)
                && s.mean_selected_index.iter().all(|i| (1.0..=n_models).contains(i))
        }),
        || "multivariate report out of range".into(),
    )
}

fn ensure_plain(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

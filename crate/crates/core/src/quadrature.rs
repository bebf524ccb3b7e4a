//! Adaptive Gauss–Kronrod (7/15-point) quadrature on a finite interval.

// Tabulated nodes and weights keep their published digits.
#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

// Kronrod abscissae on [-1, 1], nonnegative half; odd indices are the
// 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_9,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_20,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_488_98,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum number of bisections of any initial interval.
    pub max_depth: u32,
    /// Uniform pre-partition, so that narrow peaks are not missed.
    pub initial_intervals: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 0.0,
            max_depth: 16,
            initial_intervals: 64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    /// Accepted subintervals; reuse them with [`kronrod_nodes`] to integrate
    /// related functions on the same partition.
    pub segments: Vec<(f64, f64)>,
}

/// One 15-point Kronrod estimate with its embedded 7-point Gauss estimate.
pub fn gauss_kronrod_15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, gauss * half)
}

/// Integrates `f` over `[a, b]`, bisecting until every interval meets its
/// share of the tolerance.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    opts: QuadratureOptions,
) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidArgument(format!("bad integration interval [{a}, {b}]")));
    }
    let parts = opts.initial_intervals.max(1);
    let width = (b - a) / parts as f64;
    let mut pending: Vec<(f64, f64, f64, f64, u32)> = (0..parts)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == parts { b } else { lo + width };
            let (k, g) = gauss_kronrod_15(&mut f, lo, hi);
            (lo, hi, k, (k - g).abs(), 0)
        })
        .collect();
    let estimate: f64 = pending.iter().map(|p| p.2).sum();
    let tol = opts.abs_tol.max(opts.rel_tol * estimate.abs());

    let mut value = 0.0;
    let mut error = 0.0;
    let mut segments = Vec::new();
    let mut worst = 0.0f64;
    let span = b - a;
    while let Some((lo, hi, k, err, depth)) = pending.pop() {
        let share = tol * (hi - lo) / span;
        if err <= share || err == 0.0 {
            value += k;
            error += err;
            segments.push((lo, hi));
            continue;
        }
        if depth >= opts.max_depth {
            worst = worst.max(err / estimate.abs().max(f64::MIN_POSITIVE));
            value += k;
            error += err;
            segments.push((lo, hi));
            continue;
        }
        let mid = 0.5 * (lo + hi);
        for (l, h) in [(lo, mid), (mid, hi)] {
            let (k, g) = gauss_kronrod_15(&mut f, l, h);
            pending.push((l, h, k, (k - g).abs(), depth + 1));
        }
    }
    if worst > 0.0 && error > tol {
        return Err(Error::QuadratureFailure {
            tolerance: opts.rel_tol,
            estimate: error / value.abs().max(f64::MIN_POSITIVE),
        });
    }
    segments.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(Integral {
        value,
        error_estimate: error,
        segments,
    })
}

/// Kronrod nodes and weights over a partition, for integrating further
/// functions on the partition chosen by [`integrate`].
pub fn kronrod_nodes(segments: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(segments.len() * 15);
    for &(a, b) in segments {
        let center = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for j in 0..7 {
            let dx = half * XGK[j];
            out.push((center - dx, WGK[j] * half));
            out.push((center + dx, WGK[j] * half));
        }
        out.push((center, WGK[7] * half));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let (k, g) = gauss_kronrod_15(&mut |x: f64| x.powi(13) + 3.0 * x * x, 0.0, 2.0);
        let exact = 2f64.powi(14) / 14.0 + 8.0;
        assert!((k - exact).abs() < 1e-9 * exact);
        assert!((g - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn narrow_gaussian_peak() {
        let s = 0.01;
        let f = |x: f64| (-(x - 0.3) * (x - 0.3) / (2.0 * s * s)).exp();
        let r = integrate(f, -10.0, 10.0, QuadratureOptions::default()).unwrap();
        let exact = s * (2.0 * std::f64::consts::PI).sqrt();
        assert!(((r.value - exact) / exact).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn nodes_reproduce_value() {
        let f = |x: f64| x.sin().exp();
        let r = integrate(f, 0.0, 3.0, QuadratureOptions::default()).unwrap();
        let again: f64 = kronrod_nodes(&r.segments).iter().map(|(x, w)| w * f(*x)).sum();
        assert!((again - r.value).abs() < 1e-12);
    }

    #[test]
    fn unresolvable_integrand_fails() {
        let opts = QuadratureOptions {
            max_depth: 2,
            initial_intervals: 1,
            ..Default::default()
        };
        let f = |x: f64| (1.0 / x).sin();
        assert!(matches!(
            integrate(f, 1e-6, 1.0, opts),
            Err(Error::QuadratureFailure { .. })
        ));
    }
}

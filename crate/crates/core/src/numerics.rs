//! Small numerical kernels shared across the crate.

use libm::erfc;

use crate::error::{HedgeError, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Pairwise (cascade) summation. The result depends only on the order of
/// `values`, never on how the caller produced them.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Composite Simpson rule on a uniform grid with spacing `h`.
///
/// Odd interval counts close the last three intervals with Simpson's 3/8
/// rule; a single interval falls back to the trapezoid.
pub fn simpson_uniform(values: &[f64], h: f64) -> f64 {
    let n = values.len().saturating_sub(1);
    match n {
        0 => 0.0,
        1 => 0.5 * h * (values[0] + values[1]),
        2 => h / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        3 => 3.0 * h / 8.0 * (values[0] + 3.0 * values[1] + 3.0 * values[2] + values[3]),
        _ if n.is_multiple_of(2) => simpson_even(values, h),
        _ => {
            let split = n - 3;
            simpson_even(&values[..=split], h)
                + 3.0 * h / 8.0
                    * (values[split]
                        + 3.0 * values[split + 1]
                        + 3.0 * values[split + 2]
                        + values[split + 3])
        }
    }
}

fn simpson_even(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    debug_assert!(n.is_multiple_of(2));
    let mut odd = 0.0;
    let mut even = 0.0;
    for (k, v) in values.iter().enumerate().take(n).skip(1) {
        if k % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    h / 3.0 * (values[0] + values[n] + 4.0 * odd + 2.0 * even)
}

// Gauss–Kronrod 7/15 abscissae and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
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
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Outcome of an adaptive quadrature run.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Globally adaptive Gauss–Kronrod integration on `[a, b]`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_subdivisions: usize,
) -> Result<Quadrature> {
    let (v0, e0) = gk15(&f, a, b);
    let mut pieces = vec![(a, b, v0, e0)];
    let mut evaluations = 15;
    loop {
        let value: f64 = pieces.iter().map(|p| p.2).sum();
        let error: f64 = pieces.iter().map(|p| p.3).sum();
        if !value.is_finite() {
            return Err(HedgeError::numeric(
                "adaptive quadrature",
                format!("non-finite integrand on [{a}, {b}]"),
            ));
        }
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Quadrature {
                value,
                error_estimate: error,
                evaluations,
            });
        }
        if pieces.len() >= max_subdivisions {
            return Err(HedgeError::numeric(
                "adaptive quadrature",
                format!(
                    "no convergence on [{a}, {b}] after {} subdivisions: value {value:e}, error estimate {error:e}",
                    pieces.len()
                ),
            ));
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (vl, el) = gk15(&f, lo, mid);
        let (vr, er) = gk15(&f, mid, hi);
        evaluations += 30;
        pieces.push((lo, mid, vl, el));
        pieces.push((mid, hi, vr, er));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!(
            (normal_cdf(1.96) - 0.975_002_104_851_779_6).abs() < 1e-15,
            "{}",
            normal_cdf(1.96)
        );
        assert!((normal_cdf(-8.0) - 6.220_960_574_271_78e-16).abs() < 1e-28);
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        for n in [2usize, 3, 4, 5, 8, 9] {
            let h = 2.0 / n as f64;
            let ys: Vec<f64> = (0..=n)
                .map(|k| {
                    let x = k as f64 * h;
                    x * x * x - 2.0 * x + 1.0
                })
                .collect();
            // ∫_0^2 x³ − 2x + 1 = 4 − 4 + 2
            assert!((simpson_uniform(&ys, h) - 2.0).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn gauss_kronrod_handles_peaked_integrand() {
        let q = integrate_adaptive(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12, 1e-12, 500).unwrap();
        let exact = 2.0 / 1e-2 * (1.0f64 / 1e-2).atan();
        assert!((q.value - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..1000).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }
}

//! Monte-Carlo PnL of a hedging schedule with frozen Greeks.
//!
//! With every Greek frozen the trader's PnL reduces to
//!
//! ```text
//! dPnL = u·(𝔰 dt + dW^S) + ½·e(q)·(ζ dt + ξ dW^ν) − Σ_i L_i(q̇_i) dt
//! ```
//!
//! where `u` is the stock-exposure loading in currency per unit of √ν-scaled
//! Brownian motion and corr(dW^S, dW^ν) = ρ. The stock drift enters as u·𝔰
//! because u·μ/√ν = u·𝔰 with 𝔰 = μ/√ν frozen. The Vega drift enters as
//! (ζ/2)·e(q) because ∂Ω/∂ν·(a^P − a^Q) = (𝒱_SV/(2√ν))·√ν·ζ.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HedgeError, Result};
use crate::hedging::{objective, HedgeInputs};
use crate::market_model::{correlated_pair, path_rng};
use crate::numerics::pairwise_sum;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PnLSampleSet {
    pub terminal_pnl: Vec<f64>,
    pub seed: u64,
    pub strategy_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StockMode {
    /// u = u*(q_t) at every step.
    OptimalU,
    /// No stock exposure at all.
    ZeroU,
}

/// Spot-level data needed to turn the loading u into a share count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockLevels {
    pub spot: f64,
    pub nu: f64,
    /// ∂Π/∂S of the exotic book.
    pub book_delta: f64,
    /// ∂Ω^i/∂S of each hedging vanilla.
    pub vanilla_deltas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockOverlay {
    pub times: Vec<f64>,
    pub u: Vec<f64>,
    pub q_s: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveEstimate {
    pub mean: f64,
    pub variance: f64,
    /// mean − (γ/2)·variance
    pub mv: f64,
    /// Jackknife standard error of `mv`.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub a: ObjectiveEstimate,
    pub b: ObjectiveEstimate,
    /// mv(a) − mv(b) from the paired samples.
    pub mv_gap: f64,
    /// Jackknife standard error of `mv_gap` over the path pairs.
    pub gap_stderr: f64,
    pub ci95: (f64, f64),
    /// J(b) − J(a), the prediction of the deterministic objective.
    pub analytic_gap: f64,
    pub seed: u64,
    pub n_paths: usize,
}

impl PairedComparison {
    /// Gap over its standard error; infinite for an exact nonzero gap.
    pub fn z_score(&self) -> f64 {
        if self.gap_stderr > 0.0 {
            self.mv_gap / self.gap_stderr
        } else if self.mv_gap == 0.0 {
            0.0
        } else {
            self.mv_gap.signum() * f64::INFINITY
        }
    }

    /// Measured minus predicted gap, in standard errors.
    pub fn analytic_discrepancy(&self) -> f64 {
        let diff = self.mv_gap - self.analytic_gap;
        if self.gap_stderr > 0.0 {
            diff / self.gap_stderr
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// u* = 𝔰/γ − (ρξ/2)·e(q).
pub fn optimal_stock_loading(q: &[f64], inputs: &HedgeInputs) -> Result<f64> {
    HedgeError::check_len("optimal_stock_loading", inputs.dim(), q.len())?;
    Ok(loading(q, inputs))
}

fn loading(q: &[f64], inputs: &HedgeInputs) -> f64 {
    inputs.view.sharpe / inputs.gamma - 0.5 * inputs.rho * inputs.xi * inputs.exposure(q)
}

/// u* along a trajectory, plus the share count
/// `q_S = u/(√ν·S) − ∂Π/∂S − Σ_i (q_i + 𝔳_i)·∂Ω^i/∂S` when levels are given.
pub fn stock_overlay(
    tr: &Trajectory,
    inputs: &HedgeInputs,
    levels: Option<&StockLevels>,
) -> Result<StockOverlay> {
    tr.validate()?;
    HedgeError::check_len("stock_overlay", inputs.dim(), tr.dim())?;
    let u: Vec<f64> = tr.positions.iter().map(|q| loading(q, inputs)).collect();
    let q_s = match levels {
        None => None,
        Some(l) => {
            HedgeError::check_len("stock_overlay deltas", inputs.dim(), l.vanilla_deltas.len())?;
            if !(l.spot > 0.0 && l.nu > 0.0) {
                return Err(HedgeError::domain(
                    "spot and variance must be positive for the share count",
                ));
            }
            let unit = l.nu.sqrt() * l.spot;
            let target = inputs.target.as_slice();
            Some(
                tr.positions
                    .iter()
                    .zip(&u)
                    .map(|(q, u)| {
                        let vanilla: f64 = q
                            .iter()
                            .zip(target)
                            .zip(&l.vanilla_deltas)
                            .map(|((q, v), d)| (q + v) * d)
                            .sum();
                        u / unit - l.book_delta - vanilla
                    })
                    .collect(),
            )
        }
    };
    Ok(StockOverlay {
        times: tr.times.clone(),
        u,
        q_s,
    })
}

/// Per-step coefficients: drift·dt, loading on z_S and on z_ν.
struct StepCoefficients {
    drift: Vec<f64>,
    on_spot: Vec<f64>,
    on_vol: Vec<f64>,
}

fn step_coefficients(
    tr: &Trajectory,
    inputs: &HedgeInputs,
    mode: StockMode,
    n_steps: usize,
) -> StepCoefficients {
    let dt = inputs.horizon / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let mut c = StepCoefficients {
        drift: Vec::with_capacity(n_steps),
        on_spot: Vec::with_capacity(n_steps),
        on_vol: Vec::with_capacity(n_steps),
    };
    for j in 0..n_steps {
        // The schedule is deterministic, so freezing it at the step midpoint
        // is still non-anticipating and makes the moments second-order in dt.
        let t = inputs.horizon * ((j as f64 + 0.5) / n_steps as f64);
        let (q, v) = tr.sample(t);
        let e = inputs.exposure(&q);
        let u = match mode {
            StockMode::OptimalU => loading(&q, inputs),
            StockMode::ZeroU => 0.0,
        };
        let trading: f64 = inputs.costs.iter().zip(&v).map(|(c, v)| c.cost(*v)).sum();
        c.drift
            .push((u * inputs.view.sharpe + 0.5 * e * inputs.view.zeta - trading) * dt);
        c.on_spot.push(u * sqrt_dt);
        c.on_vol.push(0.5 * e * inputs.xi * sqrt_dt);
    }
    c
}

fn check_run(tr: &Trajectory, inputs: &HedgeInputs, n_paths: usize, n_steps: usize) -> Result<()> {
    inputs.validate()?;
    tr.validate()?;
    HedgeError::check_len("simulate_pnl", inputs.dim(), tr.dim())?;
    if (tr.horizon() - inputs.horizon).abs() > 1e-9 * inputs.horizon {
        return Err(HedgeError::domain(format!(
            "trajectory covers [0, {}] but the horizon is {}",
            tr.horizon(),
            inputs.horizon
        )));
    }
    if n_steps == 0 || n_paths == 0 {
        return Err(HedgeError::domain("n_paths and n_steps must be at least 1"));
    }
    Ok(())
}

fn run_paths(coeffs: &[&StepCoefficients], rho: f64, n_paths: usize, seed: u64) -> Vec<Vec<f64>> {
    let rho_bar = (1.0 - rho * rho).sqrt();
    let n_steps = coeffs[0].drift.len();
    let per_path: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(seed, path);
            let mut pnl = vec![0.0; coeffs.len()];
            for j in 0..n_steps {
                let (z_s, z_v) = correlated_pair(&mut rng, rho, rho_bar);
                for (acc, c) in pnl.iter_mut().zip(coeffs) {
                    *acc += c.drift[j] + c.on_spot[j] * z_s + c.on_vol[j] * z_v;
                }
            }
            pnl
        })
        .collect();
    (0..coeffs.len())
        .map(|s| per_path.iter().map(|p| p[s]).collect())
        .collect()
}

/// Terminal PnL on `n_paths` paths of `n_steps` steps. Path `k` always uses
/// stream `k` of `seed`, so two strategies run with the same seed see the
/// same Brownian increments.
pub fn simulate_pnl(
    tr: &Trajectory,
    inputs: &HedgeInputs,
    mode: StockMode,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    strategy_id: impl Into<String>,
) -> Result<PnLSampleSet> {
    check_run(tr, inputs, n_paths, n_steps)?;
    let coeffs = step_coefficients(tr, inputs, mode, n_steps);
    let terminal_pnl = run_paths(&[&coeffs], inputs.rho, n_paths, seed).remove(0);
    Ok(PnLSampleSet {
        terminal_pnl,
        seed,
        strategy_id: strategy_id.into(),
    })
}

/// Sample moments of PnL_T, with a jackknife standard error on the
/// mean-variance criterion.
pub fn estimate_objective(s: &PnLSampleSet, gamma: f64) -> Result<ObjectiveEstimate> {
    let x = &s.terminal_pnl;
    let n = x.len();
    if n < 2 {
        return Err(HedgeError::domain(format!(
            "need at least 2 samples, got {n}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(HedgeError::numeric(
            "estimate_objective",
            "non-finite PnL sample",
        ));
    }
    let (mean, variance, stderr) = jackknife_mv(x, gamma);
    Ok(ObjectiveEstimate {
        mean,
        variance,
        mv: mean - 0.5 * gamma * variance,
        stderr,
    })
}

/// Mean, unbiased variance, and the jackknife standard error of
/// mean − (γ/2)·variance. Leave-one-out statistics come from the running
/// sums in O(n).
fn jackknife_mv(x: &[f64], gamma: f64) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mean = pairwise_sum(x) / n;
    let dev: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let sq: Vec<f64> = dev.iter().map(|d| d * d).collect();
    let ss = pairwise_sum(&sq);
    let variance = ss / (n - 1.0);
    if n < 3.0 {
        return (mean, variance, 0.0);
    }
    // Leaving out x_k: mean_k = mean − d_k/(n−1),
    // SS_k = SS − d_k²·n/(n−1), variance_k = SS_k/(n−2).
    let loo: Vec<f64> = dev
        .iter()
        .map(|d| {
            let m = mean - d / (n - 1.0);
            let v = (ss - d * d * n / (n - 1.0)) / (n - 2.0);
            m - 0.5 * gamma * v
        })
        .collect();
    let loo_mean = pairwise_sum(&loo) / n;
    let spread: Vec<f64> = loo
        .iter()
        .map(|l| (l - loo_mean) * (l - loo_mean))
        .collect();
    let stderr = ((n - 1.0) / n * pairwise_sum(&spread)).sqrt();
    (mean, variance, stderr)
}

/// Paired comparison of two schedules under common random numbers.
pub fn compare_strategies(
    a: &Trajectory,
    b: &Trajectory,
    inputs: &HedgeInputs,
    mode: StockMode,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<PairedComparison> {
    if (a.horizon() - b.horizon()).abs() > 1e-9 * inputs.horizon {
        return Err(HedgeError::domain(format!(
            "strategies cover different horizons: {} and {}",
            a.horizon(),
            b.horizon()
        )));
    }
    if n_paths < 3 {
        return Err(HedgeError::domain(format!(
            "a paired comparison needs at least 3 paths, got {n_paths}"
        )));
    }
    check_run(a, inputs, n_paths, n_steps)?;
    check_run(b, inputs, n_paths, n_steps)?;
    let ca = step_coefficients(a, inputs, mode, n_steps);
    let cb = step_coefficients(b, inputs, mode, n_steps);
    let mut runs = run_paths(&[&ca, &cb], inputs.rho, n_paths, seed);
    let pb = runs.pop().expect("two strategies");
    let pa = runs.pop().expect("two strategies");
    let gamma = inputs.gamma;
    let est = |x: Vec<f64>, id: &str| {
        estimate_objective(
            &PnLSampleSet {
                terminal_pnl: x,
                seed,
                strategy_id: id.to_string(),
            },
            gamma,
        )
    };
    let (gap_stderr, mv_gap) = paired_jackknife(&pa, &pb, gamma);
    let ea = est(pa, "a")?;
    let eb = est(pb, "b")?;
    let analytic_gap = objective(b, inputs)? - objective(a, inputs)?;
    Ok(PairedComparison {
        a: ea,
        b: eb,
        mv_gap,
        gap_stderr,
        ci95: (
            mv_gap - 1.959_963_984_540_054 * gap_stderr,
            mv_gap + 1.959_963_984_540_054 * gap_stderr,
        ),
        analytic_gap,
        seed,
        n_paths,
    })
}

/// Jackknife over path pairs of mv(a) − mv(b). Returns (stderr, gap).
fn paired_jackknife(a: &[f64], b: &[f64], gamma: f64) -> (f64, f64) {
    let n = a.len() as f64;
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let sum: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
    // mv(a) − mv(b) = mean(d) − (γ/2)·cov(d, s) with d = a − b, s = a + b.
    let md = pairwise_sum(&diff) / n;
    let ms = pairwise_sum(&sum) / n;
    let dd: Vec<f64> = diff.iter().map(|d| d - md).collect();
    let ds: Vec<f64> = sum.iter().map(|s| s - ms).collect();
    let cross: Vec<f64> = dd.iter().zip(&ds).map(|(x, y)| x * y).collect();
    let sp = pairwise_sum(&cross);
    let gap = md - 0.5 * gamma * sp / (n - 1.0);
    // Leaving out pair k: SP_k = SP − dd_k·ds_k·n/(n−1).
    let loo: Vec<f64> = dd
        .iter()
        .zip(&ds)
        .map(|(x, y)| {
            let m = md - x / (n - 1.0);
            let c = (sp - x * y * n / (n - 1.0)) / (n - 2.0);
            m - 0.5 * gamma * c
        })
        .collect();
    let loo_mean = pairwise_sum(&loo) / n;
    let spread: Vec<f64> = loo
        .iter()
        .map(|l| (l - loo_mean) * (l - loo_mean))
        .collect();
    (((n - 1.0) / n * pairwise_sum(&spread)).sqrt(), gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::TargetVector;
    use crate::costs::CostSpec;
    use crate::market_model::MarketView;

    fn inputs() -> HedgeInputs {
        HedgeInputs {
            gamma: 8.0,
            rho: 0.0,
            xi: 1.0,
            view: MarketView::NONE,
            vega_sv: vec![1.0],
            target: TargetVector(vec![1.0]),
            q0: vec![0.0],
            costs: vec![CostSpec::quadratic(1.0)],
            horizon: 1.0,
        }
    }

    #[test]
    fn loading_examples() {
        let mut inp = inputs();
        inp.view.sharpe = 0.5;
        inp.gamma = 2.0;
        assert_eq!(optimal_stock_loading(&[3.0], &inp).unwrap(), 0.25);

        let mut inp = inputs();
        inp.rho = 0.5;
        assert_eq!(optimal_stock_loading(&[1.0], &inp).unwrap(), -0.5);
        assert_eq!(optimal_stock_loading(&[-1.0], &inp).unwrap(), 0.0);
        assert!(optimal_stock_loading(&[1.0, 2.0], &inp).is_err());
    }

    #[test]
    fn overlay_share_count() {
        let mut inp = inputs();
        inp.rho = 0.5;
        let tr = Trajectory::constant(&[1.0], 1.0, 4);
        let levels = StockLevels {
            spot: 100.0,
            nu: 0.04,
            book_delta: 0.3,
            vanilla_deltas: vec![0.5],
        };
        let o = stock_overlay(&tr, &inp, Some(&levels)).unwrap();
        // u = −0.5, e = 2: q_S = −0.5/20 − 0.3 − 2·0.5.
        assert!((o.q_s.unwrap()[0] - (-0.025 - 0.3 - 1.0)).abs() < 1e-15);
        assert!(stock_overlay(&tr, &inp, None).unwrap().q_s.is_none());
    }

    #[test]
    fn hedged_schedule_has_zero_pnl() {
        let inp = inputs();
        let tr = Trajectory::constant(&[-1.0], 1.0, 16);
        let s = simulate_pnl(&tr, &inp, StockMode::ZeroU, 100, 10, 3, "flat").unwrap();
        assert!(s.terminal_pnl.iter().all(|x| *x == 0.0));
        let e = estimate_objective(&s, 8.0).unwrap();
        assert_eq!((e.mean, e.variance, e.mv, e.stderr), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_samples() {
        let s = PnLSampleSet {
            terminal_pnl: vec![2.5; 10],
            seed: 0,
            strategy_id: "c".into(),
        };
        let e = estimate_objective(&s, 3.0).unwrap();
        assert_eq!((e.mean, e.variance, e.mv, e.stderr), (2.5, 0.0, 2.5, 0.0));
        let one = PnLSampleSet {
            terminal_pnl: vec![1.0],
            ..s
        };
        assert!(estimate_objective(&one, 3.0).is_err());
    }

    #[test]
    fn jackknife_matches_brute_force() {
        let x: Vec<f64> = (0..40)
            .map(|k| ((k * 37 % 11) as f64).sin() + 0.1 * k as f64)
            .collect();
        let gamma = 1.7;
        let mv = |v: &[f64]| {
            let n = v.len() as f64;
            let m = v.iter().sum::<f64>() / n;
            m - 0.5 * gamma * v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0)
        };
        let n = x.len();
        let loo: Vec<f64> = (0..n)
            .map(|k| {
                let rest: Vec<f64> = x
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != k)
                    .map(|(_, v)| *v)
                    .collect();
                mv(&rest)
            })
            .collect();
        let lm = loo.iter().sum::<f64>() / n as f64;
        let brute = ((n as f64 - 1.0) / n as f64
            * loo.iter().map(|l| (l - lm).powi(2)).sum::<f64>())
        .sqrt();
        let (_, _, se) = jackknife_mv(&x, gamma);
        assert!((se - brute).abs() < 1e-12 * brute);
    }

    #[test]
    fn identical_strategies_have_identical_paths() {
        let inp = inputs();
        let tr = Trajectory::linear(&[0.0], &[-1.0], 1.0, 64);
        let r = compare_strategies(&tr, &tr, &inp, StockMode::OptimalU, 500, 20, 11).unwrap();
        assert_eq!(r.mv_gap, 0.0);
        assert_eq!(r.gap_stderr, 0.0);
        assert_eq!(r.analytic_gap, 0.0);
    }

    #[test]
    fn mismatched_horizon_is_rejected() {
        let inp = inputs();
        let a = Trajectory::linear(&[0.0], &[-1.0], 1.0, 64);
        let b = Trajectory::linear(&[0.0], &[-1.0], 2.0, 64);
        assert!(compare_strategies(&a, &b, &inp, StockMode::ZeroU, 10, 10, 1).is_err());
        assert!(simulate_pnl(&a, &inp, StockMode::ZeroU, 10, 0, 1, "x").is_err());
    }
}

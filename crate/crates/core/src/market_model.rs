//! One-factor stochastic volatility dynamics (Heston drift) under the
//! physical measure P and the pricing measure Q.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HedgeError, Result};

/// Heston parameters under both measures. `mu` is the frozen spot drift under P.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvParams {
    pub xi: f64,
    pub rho: f64,
    pub kappa_p: f64,
    pub theta_p: f64,
    pub kappa_q: f64,
    pub theta_q: f64,
    #[serde(default)]
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpotState {
    pub s0: f64,
    pub nu0: f64,
}

impl SpotState {
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(HedgeError::domain(format!(
                "spot must be positive, got {}",
                self.s0
            )));
        }
        if !(self.nu0 > 0.0 && self.nu0.is_finite()) {
            return Err(HedgeError::domain(format!(
                "initial variance must be positive, got {}",
                self.nu0
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    P,
    Q,
}

/// Frozen market view: Sharpe ratio and rescaled P/Q variance-drift gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketView {
    pub sharpe: f64,
    pub zeta: f64,
}

impl MarketView {
    pub const NONE: MarketView = MarketView {
        sharpe: 0.0,
        zeta: 0.0,
    };
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn is_clean(&self) -> bool {
        self.errors.is_empty() && self.warnings.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        if self.is_ok() {
            Ok(self)
        } else {
            Err(HedgeError::Domain(self.errors.join("; ")))
        }
    }
}

/// Hard errors for impossible parameters, warnings for Feller violations.
pub fn validate_params(p: &SvParams) -> ValidationReport {
    let mut report = ValidationReport::default();
    if !(p.xi > 0.0) || !p.xi.is_finite() {
        report
            .errors
            .push(format!("vol-of-vol must be positive, got xi = {}", p.xi));
    }
    if !(p.rho > -1.0 && p.rho < 1.0) {
        report.errors.push(format!(
            "correlation must lie strictly inside (-1, 1), got rho = {}",
            p.rho
        ));
    }
    for (name, value) in [
        ("kappa_p", p.kappa_p),
        ("theta_p", p.theta_p),
        ("kappa_q", p.kappa_q),
        ("theta_q", p.theta_q),
    ] {
        if !(value >= 0.0) || !value.is_finite() {
            report.errors.push(format!(
                "{name} must be non-negative and finite, got {value}"
            ));
        }
    }
    if !p.mu.is_finite() {
        report
            .errors
            .push(format!("mu must be finite, got {}", p.mu));
    }
    if report.errors.is_empty() {
        let xi2 = p.xi * p.xi;
        for (label, kappa, theta) in [("P", p.kappa_p, p.theta_p), ("Q", p.kappa_q, p.theta_q)] {
            let lhs = 2.0 * kappa * theta;
            if lhs <= xi2 {
                report.warnings.push(format!(
                    "Feller condition violated under {label}: 2*kappa*theta = {lhs} <= xi^2 = {xi2}"
                ));
            }
        }
    }
    report
}

pub fn frozen_view(p: &SvParams, x: &SpotState) -> Result<MarketView> {
    if !(x.nu0 > 0.0) || !x.nu0.is_finite() {
        return Err(HedgeError::domain(format!(
            "initial variance must be positive, got {}",
            x.nu0
        )));
    }
    let vol = x.nu0.sqrt();
    let drift_p = p.kappa_p * (p.theta_p - x.nu0);
    let drift_q = p.kappa_q * (p.theta_q - x.nu0);
    Ok(MarketView {
        sharpe: p.mu / vol,
        zeta: (drift_p - drift_q) / vol,
    })
}

/// Simulated spot/variance paths, one row per path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub times: Vec<f64>,
    pub spots: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub seed: u64,
}

impl PathSet {
    pub fn n_paths(&self) -> usize {
        self.spots.len()
    }

    pub fn terminal_spots(&self) -> impl Iterator<Item = f64> + '_ {
        self.spots
            .iter()
            .map(|row| *row.last().expect("non-empty row"))
    }

    pub fn terminal_variances(&self) -> impl Iterator<Item = f64> + '_ {
        self.variances
            .iter()
            .map(|row| *row.last().expect("non-empty row"))
    }
}

/// Per-path generator: stream `path` of the ChaCha8 family keyed by `seed`.
pub(crate) fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Draws a pair of standard normals with correlation `rho`.
#[inline]
pub(crate) fn correlated_pair(rng: &mut ChaCha8Rng, rho: f64, rho_bar: f64) -> (f64, f64) {
    let z1: f64 = StandardNormal.sample(rng);
    let z2: f64 = StandardNormal.sample(rng);
    (z1, rho * z1 + rho_bar * z2)
}

/// Full-truncation Euler simulation of the SV dynamics.
///
/// Variance uses `max(v, 0)` in both drift and diffusion; stored variances are
/// the truncated values. Log-spot takes the exponential of the Euler increment.
pub fn simulate_paths(
    p: &SvParams,
    x: &SpotState,
    measure: Measure,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathSet> {
    validate_params(p).into_result()?;
    x.validate()?;
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(HedgeError::domain(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if n_steps == 0 || n_paths == 0 {
        return Err(HedgeError::domain("n_steps and n_paths must be at least 1"));
    }

    let (mu, kappa, theta) = match measure {
        Measure::P => (p.mu, p.kappa_p, p.theta_p),
        Measure::Q => (0.0, p.kappa_q, p.theta_q),
    };
    let dt = horizon / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let rho_bar = (1.0 - p.rho * p.rho).sqrt();
    let times: Vec<f64> = (0..=n_steps)
        .map(|k| horizon * (k as f64 / n_steps as f64))
        .collect();

    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(seed, path);
            let mut spots = Vec::with_capacity(n_steps + 1);
            let mut vars = Vec::with_capacity(n_steps + 1);
            let mut log_s = x.s0.ln();
            let mut nu = x.nu0;
            spots.push(x.s0);
            vars.push(nu);
            for _ in 0..n_steps {
                let (z_s, z_v) = correlated_pair(&mut rng, p.rho, rho_bar);
                let nu_plus = nu.max(0.0);
                let vol = nu_plus.sqrt();
                log_s += (mu - 0.5 * nu_plus) * dt + vol * sqrt_dt * z_s;
                nu += kappa * (theta - nu_plus) * dt + p.xi * vol * sqrt_dt * z_v;
                spots.push(log_s.exp());
                vars.push(nu.max(0.0));
            }
            (spots, vars)
        })
        .collect();

    let (spots, variances) = rows.into_iter().unzip();
    Ok(PathSet {
        times,
        spots,
        variances,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(xi: f64, rho: f64, kappa: f64, theta: f64) -> SvParams {
        SvParams {
            xi,
            rho,
            kappa_p: kappa,
            theta_p: theta,
            kappa_q: kappa,
            theta_q: theta,
            mu: 0.0,
        }
    }

    #[test]
    fn feller_violation_is_a_warning() {
        let report = validate_params(&params(0.5, 0.0, 2.0, 0.04));
        assert!(report.is_ok());
        assert_eq!(report.warnings.len(), 2);
        assert!(report.warnings[1].contains("under Q"));
    }

    #[test]
    fn feller_satisfied_gives_no_findings() {
        assert!(validate_params(&params(0.3, -0.7, 2.0, 0.04)).is_clean());
    }

    #[test]
    fn hard_errors() {
        let r = validate_params(&params(-1.0, 0.0, 2.0, 0.04));
        assert!(!r.is_ok());
        assert!(r.errors[0].contains("vol-of-vol must be positive"));
        assert!(!validate_params(&params(0.3, 1.0, 2.0, 0.04)).is_ok());
        assert!(!validate_params(&params(0.3, 0.0, -2.0, 0.04)).is_ok());
    }

    #[test]
    fn frozen_view_examples() {
        let mut p = params(0.3, 0.0, 1.0, 0.04);
        p.mu = 0.1;
        let x = SpotState {
            s0: 100.0,
            nu0: 0.04,
        };
        let v = frozen_view(&p, &x).unwrap();
        assert!((v.sharpe - 0.5).abs() < 1e-15);
        assert_eq!(v.zeta, 0.0);

        p.theta_p = 0.09;
        let v = frozen_view(&p, &x).unwrap();
        assert!((v.zeta - 0.25).abs() < 1e-15);

        assert!(frozen_view(
            &p,
            &SpotState {
                s0: 100.0,
                nu0: 0.0
            }
        )
        .is_err());
    }

    #[test]
    fn truncated_variances_are_non_negative() {
        // Strong Feller violation drives the raw scheme negative.
        let p = params(1.5, -0.5, 0.5, 0.02);
        let x = SpotState {
            s0: 100.0,
            nu0: 0.02,
        };
        let paths = simulate_paths(&p, &x, Measure::Q, 1.0, 50, 200, 3).unwrap();
        assert!(paths.variances.iter().flatten().all(|v| *v >= 0.0));
        assert!(paths.variances.iter().flatten().any(|v| *v == 0.0));
        assert!(paths.spots.iter().flatten().all(|s| *s > 0.0));
    }

    #[test]
    fn grid_and_shapes() {
        let p = params(0.3, 0.0, 2.0, 0.04);
        let x = SpotState {
            s0: 100.0,
            nu0: 0.04,
        };
        let paths = simulate_paths(&p, &x, Measure::P, 2.0, 8, 3, 1).unwrap();
        assert_eq!(paths.times.len(), 9);
        assert_eq!(paths.times[0], 0.0);
        assert_eq!(*paths.times.last().unwrap(), 2.0);
        assert!(paths.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(paths.spots.len(), 3);
        assert!(paths.spots.iter().all(|r| r.len() == 9));
    }

    #[test]
    fn rejects_bad_sizes() {
        let p = params(0.3, 0.0, 2.0, 0.04);
        let x = SpotState {
            s0: 100.0,
            nu0: 0.04,
        };
        assert!(simulate_paths(&p, &x, Measure::P, 0.0, 8, 3, 1).is_err());
        assert!(simulate_paths(&p, &x, Measure::P, 1.0, 0, 3, 1).is_err());
        assert!(simulate_paths(&p, &x, Measure::P, 1.0, 8, 0, 1).is_err());
    }

    #[test]
    fn adding_paths_does_not_perturb_earlier_ones() {
        let p = params(0.3, -0.4, 2.0, 0.04);
        let x = SpotState {
            s0: 100.0,
            nu0: 0.04,
        };
        let small = simulate_paths(&p, &x, Measure::Q, 1.0, 16, 4, 9).unwrap();
        let large = simulate_paths(&p, &x, Measure::Q, 1.0, 16, 10, 9).unwrap();
        assert_eq!(small.spots[..], large.spots[..4]);
    }
}

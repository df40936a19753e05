//! Closed-form optimal hedging trajectories under quadratic execution costs.
//!
//! Both problems minimise, over absolutely continuous q with q(0) = q0,
//!
//! ```text
//! J(q) = ∫_0^T Σ_i L_i(q̇_i) + a·e(q)² + (c/2)·e(q) dt
//! a = γ(1−ρ²)ξ²/8,   c = ρ𝔰ξ − ζ,   e(q) = 𝒱_SV′(q + 𝔳)
//! ```
//!
//! With L_i(v) = η_i v² the Euler–Lagrange equation is
//! `q̈ = a·Λ𝒱_SV·e(q) + (c/4)·Λ𝒱_SV`, Λ = diag(1/η), so every deviation from
//! the affine baseline lies along the basket w = Λ𝒱_SV and its coefficient
//! solves a scalar linear ODE with rate λ = a·𝒱_SV′Λ𝒱_SV.
//!
//! The vega-hedge problem leaves q(T) free (q̇(T) = 0); the bucket-cancellation
//! problem pins q(T) = −𝔳.

use serde::{Deserialize, Serialize};

use crate::book::{exposure_unchecked, TargetVector};
use crate::costs::CostSpec;
use crate::error::{HedgeError, Result};
use crate::market_model::MarketView;
use crate::numerics::simpson_uniform;
use crate::trajectory::{uniform_grid, Trajectory};

/// Below this value of √λ·T the view term switches to its series limit.
pub const SMALL_LAMBDA_THRESHOLD: f64 = 1e-4;

pub const DEFAULT_GRID: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// Free terminal position (costate vanishes at T).
    #[serde(alias = "free_terminal")]
    VegaHedge,
    /// Terminal position pinned at −𝔳.
    #[serde(alias = "pinned_terminal")]
    BucketCancellation,
}

/// The fully frozen hedging problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeInputs {
    pub gamma: f64,
    pub rho: f64,
    pub xi: f64,
    pub view: MarketView,
    pub vega_sv: Vec<f64>,
    pub target: TargetVector,
    pub q0: Vec<f64>,
    pub costs: Vec<CostSpec>,
    pub horizon: f64,
}

impl HedgeInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(HedgeError::domain(format!(
                "risk aversion must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(HedgeError::domain(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(HedgeError::domain(format!(
                "rho must lie in (-1, 1), got {}",
                self.rho
            )));
        }
        if !(self.xi > 0.0) || !self.xi.is_finite() {
            return Err(HedgeError::domain(format!(
                "xi must be positive, got {}",
                self.xi
            )));
        }
        if !self.view.sharpe.is_finite() || !self.view.zeta.is_finite() {
            return Err(HedgeError::domain("market view must be finite"));
        }
        let n = self.q0.len();
        if n == 0 {
            return Err(HedgeError::domain("at least one vanilla is required"));
        }
        HedgeError::check_len("vega_sv", n, self.vega_sv.len())?;
        HedgeError::check_len("target", n, self.target.len())?;
        HedgeError::check_len("costs", n, self.costs.len())?;
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        if !finite(&self.vega_sv) || !finite(self.target.as_slice()) || !finite(&self.q0) {
            return Err(HedgeError::domain(
                "vegas, targets and initial positions must be finite",
            ));
        }
        for c in &self.costs {
            c.validate()?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.q0.len()
    }

    /// a = γ(1−ρ²)ξ²/8, the weight of the squared exposure.
    pub fn risk_weight(&self) -> f64 {
        0.125 * self.gamma * (1.0 - self.rho * self.rho) * self.xi * self.xi
    }

    /// c = ρ𝔰ξ − ζ.
    pub fn view_drift(&self) -> f64 {
        self.rho * self.view.sharpe * self.xi - self.view.zeta
    }

    pub fn exposure(&self, q: &[f64]) -> f64 {
        exposure_unchecked(q, self.target.as_slice(), &self.vega_sv)
    }

    pub fn all_quadratic(&self) -> bool {
        self.costs.iter().all(CostSpec::is_quadratic)
    }

    /// −𝔳, the position that is flat in the market model.
    pub fn hedged_position(&self) -> Vec<f64> {
        self.target.as_slice().iter().map(|v| -v).collect()
    }

    fn quadratic_etas(&self) -> Result<Vec<f64>> {
        self.costs
            .iter()
            .map(|c| {
                if c.is_quadratic() {
                    Ok(c.eta())
                } else {
                    Err(HedgeError::Unsupported(format!(
                        "closed-form trajectories need quadratic costs, got {c:?}"
                    )))
                }
            })
            .collect()
    }

    /// Running cost integrand at one instant.
    pub fn lagrangian(&self, q: &[f64], v: &[f64]) -> f64 {
        let e = self.exposure(q);
        let trading: f64 = self.costs.iter().zip(v).map(|(c, v)| c.cost(*v)).sum();
        trading + self.risk_weight() * e * e + 0.5 * self.view_drift() * e
    }
}

/// λ = (γ/8)(1−ρ²)ξ²·Σ_i 𝒱_SV,i²/η_i
pub fn lambda_of(inputs: &HedgeInputs) -> Result<f64> {
    inputs.validate()?;
    let etas = inputs.quadratic_etas()?;
    let quad: f64 = inputs
        .vega_sv
        .iter()
        .zip(&etas)
        .map(|(v, eta)| v * v / eta)
        .sum();
    Ok(inputs.risk_weight() * quad)
}

// Hyperbolic ratios in exponentially scaled form; arguments are non-negative
// and `y ≤ z` where both appear. None of these overflow for large √λT.

/// sinh(y)/sinh(z)
fn sinh_over_sinh(y: f64, z: f64) -> f64 {
    (y - z).exp() * (-(-2.0 * y).exp_m1()) / (-(-2.0 * z).exp_m1())
}

/// cosh(y)/sinh(z)
fn cosh_over_sinh(y: f64, z: f64) -> f64 {
    (y - z).exp() * (1.0 + (-2.0 * y).exp()) / (-(-2.0 * z).exp_m1())
}

/// cosh(y)/cosh(z)
fn cosh_over_cosh(y: f64, z: f64) -> f64 {
    (y - z).exp() * (1.0 + (-2.0 * y).exp()) / (1.0 + (-2.0 * z).exp())
}

/// sinh(y)/cosh(z), y of any sign
fn sinh_over_cosh(y: f64, z: f64) -> f64 {
    let ay = y.abs();
    ((ay - z).exp() * (-(-2.0 * ay).exp_m1()) / (1.0 + (-2.0 * z).exp())).copysign(y)
}

/// 2·sinh(p)·sinh(r)/cosh(p + r) for p, r ≥ 0.
fn sinh_sinh_over_cosh(p: f64, r: f64) -> f64 {
    (-(-2.0 * p).exp_m1()) * (-(-2.0 * r).exp_m1()) / (1.0 + (-2.0 * (p + r)).exp())
}

/// Scalar profile of the closed-form solution for one problem.
#[derive(Debug, Clone)]
pub struct ClosedForm {
    kind: ProblemKind,
    horizon: f64,
    q0: Vec<f64>,
    hedged: Vec<f64>,
    basket: Vec<f64>,
    lambda: f64,
    /// 𝒱_SV′(𝔳 + q0) / 𝒱_SV′Λ𝒱_SV
    hedge_coef: f64,
    /// c/4, the view forcing in the scalar ODE
    view_force: f64,
    degenerate: bool,
}

/// Position, velocity and acceleration of the basket coefficient.
#[derive(Debug, Clone, Copy)]
struct Coefficient {
    value: f64,
    rate: f64,
    accel: f64,
}

impl ClosedForm {
    pub fn new(inputs: &HedgeInputs, kind: ProblemKind) -> Result<Self> {
        inputs.validate()?;
        let etas = inputs.quadratic_etas()?;
        let basket: Vec<f64> = inputs
            .vega_sv
            .iter()
            .zip(&etas)
            .map(|(v, eta)| v / eta)
            .collect();
        let quad: f64 = inputs.vega_sv.iter().zip(&basket).map(|(v, w)| v * w).sum();
        let degenerate = quad == 0.0;
        let e0 = inputs.exposure(&inputs.q0);
        Ok(ClosedForm {
            kind,
            horizon: inputs.horizon,
            q0: inputs.q0.clone(),
            hedged: inputs.hedged_position(),
            lambda: inputs.risk_weight() * quad,
            hedge_coef: if degenerate { 0.0 } else { e0 / quad },
            view_force: 0.25 * inputs.view_drift(),
            basket,
            degenerate,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    /// Λ𝒱_SV
    pub fn basket(&self) -> &[f64] {
        &self.basket
    }

    /// True when √λ·T is below [`SMALL_LAMBDA_THRESHOLD`].
    pub fn uses_small_lambda_limit(&self) -> bool {
        !self.degenerate && self.lambda.sqrt() * self.horizon < SMALL_LAMBDA_THRESHOLD
    }

    /// Basket coefficient split into the hedging part and the view part.
    fn coefficient_parts(&self, t: f64) -> (Coefficient, Coefficient) {
        let zero = Coefficient {
            value: 0.0,
            rate: 0.0,
            accel: 0.0,
        };
        if self.degenerate {
            return (zero, zero);
        }
        let horizon = self.horizon;
        let x = self.lambda.sqrt();
        let small = x * horizon < SMALL_LAMBDA_THRESHOLD;
        let k = self.hedge_coef;
        let f = self.view_force;
        match self.kind {
            ProblemKind::VegaHedge => {
                // 1 − cosh(x(T−t))/cosh(xT) = 2 sinh(x(2T−t)/2) sinh(xt/2) / cosh(xT)
                let bend = sinh_sinh_over_cosh(0.5 * x * (2.0 * horizon - t), 0.5 * x * t);
                let slope = sinh_over_cosh(x * (horizon - t), x * horizon);
                let level = cosh_over_cosh(x * (horizon - t), x * horizon);
                let hedge = Coefficient {
                    value: -k * bend,
                    rate: -k * x * slope,
                    accel: k * self.lambda * level,
                };
                let view = if small {
                    Coefficient {
                        value: -f * 0.5 * t * (2.0 * horizon - t),
                        rate: -f * (horizon - t),
                        accel: f * level,
                    }
                } else {
                    Coefficient {
                        value: -f * bend / self.lambda,
                        rate: -f * slope / x,
                        accel: f * level,
                    }
                };
                (hedge, view)
            }
            ProblemKind::BucketCancellation => {
                let s = t / horizon;
                let hedge = Coefficient {
                    value: k * (sinh_over_sinh(x * (horizon - t), x * horizon) - (1.0 - s)),
                    rate: k * (1.0 / horizon - x * cosh_over_sinh(x * (horizon - t), x * horizon)),
                    accel: k * self.lambda * sinh_over_sinh(x * (horizon - t), x * horizon),
                };
                // (sinh(xt) + sinh(x(T−t)))/sinh(xT) − 1 = −2 sinh(x(T−t)/2) sinh(xt/2) / cosh(xT/2)
                let level = cosh_over_cosh(x * (0.5 * horizon - t).abs(), 0.5 * x * horizon);
                let slope = sinh_over_cosh(x * (0.5 * horizon - t), 0.5 * x * horizon);
                let view = if small {
                    Coefficient {
                        value: -f * 0.5 * t * (horizon - t),
                        rate: -f * (0.5 * horizon - t),
                        accel: f * level,
                    }
                } else {
                    let dip = sinh_sinh_over_cosh(0.5 * x * (horizon - t), 0.5 * x * t);
                    Coefficient {
                        value: -f * dip / self.lambda,
                        rate: -f * slope / x,
                        accel: f * level,
                    }
                };
                (hedge, view)
            }
        }
    }

    fn coefficient(&self, t: f64) -> Coefficient {
        let (h, v) = self.coefficient_parts(t);
        Coefficient {
            value: h.value + v.value,
            rate: h.rate + v.rate,
            accel: h.accel + v.accel,
        }
    }

    /// Scalar weight of the view term on the basket at `t`.
    pub fn view_component(&self, t: f64) -> f64 {
        self.coefficient_parts(t).1.value
    }

    /// Affine part: q0 (vega hedge) or the straight line q0 → −𝔳 (cancellation).
    pub fn baseline(&self, t: f64) -> Vec<f64> {
        match self.kind {
            ProblemKind::VegaHedge => self.q0.clone(),
            ProblemKind::BucketCancellation => {
                let s = t / self.horizon;
                self.q0
                    .iter()
                    .zip(&self.hedged)
                    .map(|(a, b)| (1.0 - s) * a + s * b)
                    .collect()
            }
        }
    }

    fn baseline_rate(&self) -> Vec<f64> {
        match self.kind {
            ProblemKind::VegaHedge => vec![0.0; self.q0.len()],
            ProblemKind::BucketCancellation => self
                .q0
                .iter()
                .zip(&self.hedged)
                .map(|(a, b)| (b - a) / self.horizon)
                .collect(),
        }
    }

    fn position_at_fraction(&self, s: f64) -> Vec<f64> {
        let t = s * self.horizon;
        let alpha = self.coefficient(t).value;
        let base = match self.kind {
            ProblemKind::VegaHedge => self.q0.clone(),
            ProblemKind::BucketCancellation => self
                .q0
                .iter()
                .zip(&self.hedged)
                .map(|(a, b)| (1.0 - s) * a + s * b)
                .collect(),
        };
        base.iter()
            .zip(&self.basket)
            .map(|(b, w)| b + alpha * w)
            .collect()
    }

    pub fn position(&self, t: f64) -> Vec<f64> {
        self.position_at_fraction(t / self.horizon)
    }

    pub fn velocity(&self, t: f64) -> Vec<f64> {
        let rate = self.coefficient(t).rate;
        self.baseline_rate()
            .iter()
            .zip(&self.basket)
            .map(|(b, w)| b + rate * w)
            .collect()
    }

    pub fn acceleration(&self, t: f64) -> Vec<f64> {
        let accel = self.coefficient(t).accel;
        self.basket.iter().map(|w| accel * w).collect()
    }

    pub fn sample(&self, m: usize) -> Result<Trajectory> {
        if m == 0 {
            return Err(HedgeError::domain("grid size must be at least 1"));
        }
        let times = uniform_grid(self.horizon, m);
        let positions = (0..=m)
            .map(|k| self.position_at_fraction(k as f64 / m as f64))
            .collect();
        let velocities = times.iter().map(|t| self.velocity(*t)).collect();
        Ok(Trajectory {
            times,
            positions,
            velocities,
        })
    }
}

/// Optimal trajectory when only q(0) is imposed.
pub fn plan_vega_hedge(inputs: &HedgeInputs, m: usize) -> Result<Trajectory> {
    ClosedForm::new(inputs, ProblemKind::VegaHedge)?.sample(m)
}

/// Optimal trajectory that also reaches q(T) = −𝔳.
pub fn plan_bucket_cancellation(inputs: &HedgeInputs, m: usize) -> Result<Trajectory> {
    ClosedForm::new(inputs, ProblemKind::BucketCancellation)?.sample(m)
}

pub fn plan_closed_form(inputs: &HedgeInputs, kind: ProblemKind, m: usize) -> Result<Trajectory> {
    ClosedForm::new(inputs, kind)?.sample(m)
}

/// J(q) by composite Simpson on the trajectory's own grid (trapezoid when
/// the grid is not uniform).
pub fn objective(tr: &Trajectory, inputs: &HedgeInputs) -> Result<f64> {
    inputs.validate()?;
    tr.validate()?;
    HedgeError::check_len("objective", inputs.dim(), tr.dim())?;
    if (tr.horizon() - inputs.horizon).abs() > 1e-9 * inputs.horizon {
        return Err(HedgeError::domain(format!(
            "trajectory covers [0, {}] but the horizon is {}",
            tr.horizon(),
            inputs.horizon
        )));
    }
    let integrand: Vec<f64> = tr
        .positions
        .iter()
        .zip(&tr.velocities)
        .map(|(q, v)| inputs.lagrangian(q, v))
        .collect();
    Ok(match tr.uniform_step() {
        Some(h) => simpson_uniform(&integrand, h),
        None => tr
            .times
            .windows(2)
            .zip(integrand.windows(2))
            .map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1]))
            .sum(),
    })
}

//! Finite-difference check of the Euler–Lagrange equation
//! `d/dt L′(q̇) = (2a·e(q) + c/2)·𝒱_SV` on a sampled trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{HedgeError, Result};
use crate::hedging::HedgeInputs;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Largest residual, in acceleration units (divided by 2η per vanilla).
    pub max_abs: f64,
    pub mean_abs: f64,
    /// `max_abs / scale`.
    pub max_scaled: f64,
    pub mean_scaled: f64,
    /// max(1, largest right-hand side in acceleration units).
    pub scale: f64,
}

/// Residual at interior nodes: `(L′(v⁺) − L′(v⁻))/Δt − (2a·e + c/2)·𝒱_SV`,
/// where v± are the forward and backward difference quotients. For
/// quadratic costs, after the division by 2η, this is `q̈_FD − q̈_ODE`.
pub fn el_residual(tr: &Trajectory, inputs: &HedgeInputs) -> Result<ResidualReport> {
    inputs.validate()?;
    tr.validate()?;
    HedgeError::check_len("el_residual", inputs.dim(), tr.dim())?;
    let m = tr.steps();
    if m < 8 {
        return Err(HedgeError::domain(format!(
            "residual check needs at least 8 grid intervals, got {m}"
        )));
    }
    let h = tr
        .uniform_step()
        .ok_or_else(|| HedgeError::domain("residual check needs a uniform grid"))?;

    let a = inputs.risk_weight();
    let half_c = 0.5 * inputs.view_drift();
    let (mut max_abs, mut sum_abs, mut max_rhs) = (0.0f64, 0.0, 0.0f64);
    let mut count = 0usize;
    let q = &tr.positions;
    for k in 1..m {
        let slope = 2.0 * a * inputs.exposure(&q[k]) + half_c;
        for (i, cost) in inputs.costs.iter().enumerate() {
            let v_plus = (q[k + 1][i] - q[k][i]) / h;
            let v_minus = (q[k][i] - q[k - 1][i]) / h;
            let lhs = (cost.marginal_cost(v_plus) - cost.marginal_cost(v_minus)) / h;
            let rhs = slope * inputs.vega_sv[i];
            let units = 2.0 * cost.eta();
            let r = ((lhs - rhs) / units).abs();
            max_abs = max_abs.max(r);
            max_rhs = max_rhs.max((rhs / units).abs());
            sum_abs += r;
            count += 1;
        }
    }
    let mean_abs = sum_abs / count as f64;
    let scale = max_rhs.max(1.0);
    Ok(ResidualReport {
        max_abs,
        mean_abs,
        max_scaled: max_abs / scale,
        mean_scaled: mean_abs / scale,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::TargetVector;
    use crate::costs::CostSpec;
    use crate::hedging::{plan_closed_form, ProblemKind};
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
    fn closed_forms_satisfy_the_ode() {
        let mut inp = inputs();
        inp.view = MarketView {
            sharpe: 0.3,
            zeta: -0.4,
        };
        inp.rho = -0.5;
        for kind in [ProblemKind::VegaHedge, ProblemKind::BucketCancellation] {
            let tr = plan_closed_form(&inp, kind, 512).unwrap();
            let r = el_residual(&tr, &inp).unwrap();
            assert!(r.max_scaled <= 1e-4, "{kind:?}: {r:?}");
        }
    }

    #[test]
    fn straight_line_is_not_a_solution() {
        let inp = inputs();
        let tr = Trajectory::linear(&[0.0], &[-1.0], 1.0, 64);
        assert!(el_residual(&tr, &inp).unwrap().max_abs > 0.1);
    }

    #[test]
    fn straight_line_solves_the_zero_vega_problem() {
        let mut inp = inputs();
        inp.vega_sv = vec![0.0];
        let tr = Trajectory::linear(&[0.0], &[-1.0], 1.0, 64);
        assert!(el_residual(&tr, &inp).unwrap().max_abs < 1e-12);
    }

    #[test]
    fn rejects_coarse_or_uneven_grids() {
        let inp = inputs();
        assert!(el_residual(&Trajectory::constant(&[0.0], 1.0, 4), &inp).is_err());
        let mut tr = Trajectory::constant(&[0.0], 1.0, 16);
        tr.times[3] += 0.01;
        assert!(el_residual(&tr, &inp).is_err());
    }
}

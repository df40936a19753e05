//! Single shooting on the initial costate p(0).
//!
//! The Hamiltonian system is `q̇ = H′(p)`, `ṗ = (2a·e(q) + c/2)·𝒱_SV`, with
//! q(0) = q0 and either p(T) = 0 (free end) or q(T) = −𝔳 (pinned end).
//! Sensitivities ∂(q, p)/∂p(0) are integrated alongside the state and give
//! the Newton Jacobian of the terminal defect.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::transcription::Transcription;
use super::BvpProblem;
use crate::costs::CostSpec;
use crate::error::{HedgeError, Result};
use crate::hedging::{ClosedForm, HedgeInputs, ProblemKind};
use crate::trajectory::{uniform_grid, Trajectory};

const DEFECT_TOL: f64 = 1e-11;
const ACCEPT_TOL: f64 = 1e-8;
const MAX_NEWTON: usize = 50;
const STEP_TOL: f64 = 1e-13;
const MAX_HALVINGS: u32 = 24;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BvpSolution {
    pub trajectory: Trajectory,
    /// p(t) on the trajectory grid.
    pub costates: Vec<Vec<f64>>,
    /// Terminal boundary defect, scaled by max(1, size of the boundary data).
    pub terminal_defect: f64,
    pub newton_iterations: usize,
    pub used_fallback: bool,
}

/// Augmented state: q, p, ∂q/∂p0 and ∂p/∂p0 (column-major N×N blocks).
struct Flow<'a> {
    inputs: &'a HedgeInputs,
    n: usize,
}

impl Flow<'_> {
    fn len(&self) -> usize {
        2 * self.n + 2 * self.n * self.n
    }

    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        let n = self.n;
        let inputs = self.inputs;
        let (q, rest) = y.split_at(n);
        let (p, phi) = rest.split_at(n);
        let (phi_q, phi_p) = phi.split_at(n * n);
        let slope = 2.0 * inputs.risk_weight() * inputs.exposure(q) + 0.5 * inputs.view_drift();
        let curv: Vec<f64> = inputs
            .costs
            .iter()
            .zip(p)
            .map(|(c, z)| c.hamiltonian_curvature(z.abs().max(1e-300).copysign(*z)))
            .collect();
        let two_a = 2.0 * inputs.risk_weight();
        let vega = &inputs.vega_sv;
        for i in 0..n {
            out[i] = inputs.costs[i].hamiltonian_prime(p[i]);
            out[n + i] = slope * vega[i];
        }
        let (d_phi_q, d_phi_p) = out[2 * n..].split_at_mut(n * n);
        for j in 0..n {
            let col_q = &phi_q[j * n..(j + 1) * n];
            let col_p = &phi_p[j * n..(j + 1) * n];
            let de: f64 = vega.iter().zip(col_q).map(|(v, x)| v * x).sum();
            for i in 0..n {
                d_phi_q[j * n + i] = curv[i] * col_p[i];
                d_phi_p[j * n + i] = two_a * vega[i] * de;
            }
        }
    }

    fn rk4(&self, y: &[f64], h: f64) -> Vec<f64> {
        let len = y.len();
        let mut k1 = vec![0.0; len];
        let mut k2 = vec![0.0; len];
        let mut k3 = vec![0.0; len];
        let mut k4 = vec![0.0; len];
        let mut tmp = vec![0.0; len];
        self.rhs(y, &mut k1);
        for i in 0..len {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        self.rhs(&tmp, &mut k2);
        for i in 0..len {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        self.rhs(&tmp, &mut k3);
        for i in 0..len {
            tmp[i] = y[i] + h * k3[i];
        }
        self.rhs(&tmp, &mut k4);
        (0..len)
            .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    }

    /// One grid interval with step-halving error control on the (q, p) part.
    fn advance(&self, y: &[f64], h: f64, depth: u32) -> Vec<f64> {
        let full = self.rk4(y, h);
        let mid = self.rk4(y, 0.5 * h);
        let half = self.rk4(&mid, 0.5 * h);
        let state = 2 * self.n;
        let err = full[..state]
            .iter()
            .zip(&half[..state])
            .map(|(a, b)| (a - b).abs() / (1.0 + b.abs()))
            .fold(0.0, f64::max);
        if err <= STEP_TOL || depth >= MAX_HALVINGS || !err.is_finite() {
            // Richardson extrapolation of the two fourth-order estimates.
            return half
                .iter()
                .zip(&full)
                .map(|(b, a)| b + (b - a) / 15.0)
                .collect();
        }
        let first = self.advance(y, 0.5 * h, depth + 1);
        self.advance(&first, 0.5 * h, depth + 1)
    }

    /// Integrates from p(0) = `p0` over the grid; returns the node states.
    fn integrate(&self, q0: &[f64], p0: &[f64], times: &[f64]) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut y = vec![0.0; self.len()];
        y[..n].copy_from_slice(q0);
        y[n..2 * n].copy_from_slice(p0);
        for j in 0..n {
            y[2 * n + n * n + j * n + j] = 1.0;
        }
        let mut nodes = Vec::with_capacity(times.len());
        nodes.push(y.clone());
        for w in times.windows(2) {
            y = self.advance(&y, w[1] - w[0], 0);
            nodes.push(y.clone());
        }
        nodes
    }
}

struct Shooter<'a> {
    prob: &'a BvpProblem,
    flow: Flow<'a>,
    times: Vec<f64>,
    scale: f64,
}

impl Shooter<'_> {
    /// Terminal defect and its Jacobian with respect to p(0).
    fn defect(&self, p0: &[f64]) -> (Vec<Vec<f64>>, DVector<f64>, DMatrix<f64>) {
        let n = self.flow.n;
        let nodes = self.integrate(p0);
        let last = nodes.last().expect("non-empty grid");
        let (value, jac_offset) = match self.prob.kind {
            ProblemKind::VegaHedge => (last[n..2 * n].to_vec(), 2 * n + n * n),
            ProblemKind::BucketCancellation => {
                let target = self.prob.inputs.hedged_position();
                (
                    last[..n].iter().zip(&target).map(|(q, t)| q - t).collect(),
                    2 * n,
                )
            }
        };
        let jac = DMatrix::from_column_slice(n, n, &last[jac_offset..jac_offset + n * n]);
        (nodes, DVector::from_vec(value), jac)
    }

    fn integrate(&self, p0: &[f64]) -> Vec<Vec<f64>> {
        self.flow.integrate(&self.prob.inputs.q0, p0, &self.times)
    }

    fn size(&self, d: &DVector<f64>) -> f64 {
        let s = d.amax() / self.scale;
        if s.is_finite() {
            s
        } else {
            f64::INFINITY
        }
    }

    /// Damped Newton on the terminal defect.
    fn newton(&self, mut p0: Vec<f64>) -> (Vec<f64>, Vec<Vec<f64>>, f64, usize) {
        let (mut nodes, mut d, mut jac) = self.defect(&p0);
        let mut size = self.size(&d);
        for iter in 0..MAX_NEWTON {
            if size <= DEFECT_TOL {
                return (p0, nodes, size, iter);
            }
            let Some(step) = jac.clone().lu().solve(&(-&d)) else {
                return (p0, nodes, size, iter);
            };
            let mut t = 1.0;
            let mut improved = false;
            for _ in 0..30 {
                let trial: Vec<f64> = p0.iter().zip(step.iter()).map(|(p, s)| p + t * s).collect();
                let (tn, td, tj) = self.defect(&trial);
                let ts = self.size(&td);
                if ts < size {
                    p0 = trial;
                    nodes = tn;
                    d = td;
                    jac = tj;
                    size = ts;
                    improved = true;
                    break;
                }
                t *= 0.5;
            }
            if !improved {
                return (p0, nodes, size, iter);
            }
        }
        (p0, nodes, size, MAX_NEWTON)
    }
}

/// Initial costate from the closed form of the same problem with quadratic
/// costs of the same scale η.
fn surrogate_costate(prob: &BvpProblem) -> Result<Vec<f64>> {
    let mut surrogate = prob.inputs.clone();
    surrogate.costs = prob
        .inputs
        .costs
        .iter()
        .map(|c| CostSpec::quadratic(c.eta()))
        .collect();
    let v0 = ClosedForm::new(&surrogate, prob.kind)?.velocity(0.0);
    Ok(prob
        .inputs
        .costs
        .iter()
        .zip(&v0)
        .map(|(c, v)| c.marginal_cost(*v))
        .collect())
}

/// Solves the Hamiltonian system on a uniform grid of `m` intervals.
pub fn solve_hamiltonian_bvp(prob: &BvpProblem, m: usize) -> Result<BvpSolution> {
    if m < 64 {
        return Err(HedgeError::domain(format!(
            "BVP output grid must have M >= 64, got {m}"
        )));
    }
    prob.inputs.validate()?;
    let inputs = &prob.inputs;
    let n = inputs.dim();

    if prob.is_degenerate() {
        let trajectory = prob.execution_only(m);
        let costates = trajectory
            .velocities
            .iter()
            .map(|v| {
                inputs
                    .costs
                    .iter()
                    .zip(v)
                    .map(|(c, v)| c.marginal_cost(*v))
                    .collect()
            })
            .collect();
        return Ok(BvpSolution {
            trajectory,
            costates,
            terminal_defect: 0.0,
            newton_iterations: 0,
            used_fallback: false,
        });
    }

    let scale = match prob.kind {
        ProblemKind::VegaHedge => 1.0,
        ProblemKind::BucketCancellation => inputs
            .q0
            .iter()
            .zip(inputs.hedged_position())
            .map(|(a, b)| (a - b).abs())
            .fold(1.0, f64::max),
    };
    let shooter = Shooter {
        prob,
        flow: Flow { inputs, n },
        times: uniform_grid(inputs.horizon, m),
        scale,
    };

    let (mut p0, mut nodes, mut defect, mut iterations) = shooter.newton(surrogate_costate(prob)?);
    let mut used_fallback = false;
    if defect > ACCEPT_TOL {
        used_fallback = true;
        let oracle = Transcription::new(prob, m.max(256))?.solve()?;
        let guess: Vec<f64> = inputs
            .costs
            .iter()
            .zip(&oracle.trajectory.velocities[0])
            .map(|(c, v)| c.marginal_cost(*v))
            .collect();
        let retry = shooter.newton(guess);
        if retry.2 < defect {
            (p0, nodes, defect, iterations) = retry;
        }
    }
    if defect > ACCEPT_TOL {
        return Err(HedgeError::numeric(
            "hamiltonian shooting",
            format!("terminal defect {defect:e} after fallback (p0 = {p0:?})"),
        ));
    }

    let positions: Vec<Vec<f64>> = nodes.iter().map(|y| y[..n].to_vec()).collect();
    let costates: Vec<Vec<f64>> = nodes.iter().map(|y| y[n..2 * n].to_vec()).collect();
    let velocities = costates
        .iter()
        .map(|p| {
            inputs
                .costs
                .iter()
                .zip(p)
                .map(|(c, z)| c.hamiltonian_prime(*z))
                .collect()
        })
        .collect();
    Ok(BvpSolution {
        trajectory: Trajectory {
            times: shooter.times,
            positions,
            velocities,
        },
        costates,
        terminal_defect: defect,
        newton_iterations: iterations,
        used_fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::TargetVector;
    use crate::hedging::plan_closed_form;
    use crate::market_model::MarketView;
    use crate::tpbvp::transcription_oracle;

    fn problem(kind: ProblemKind, cost: CostSpec) -> BvpProblem {
        BvpProblem::new(
            HedgeInputs {
                gamma: 8.0,
                rho: 0.0,
                xi: 1.0,
                view: MarketView::NONE,
                vega_sv: vec![1.0],
                target: TargetVector(vec![1.0]),
                q0: vec![0.0],
                costs: vec![cost],
                horizon: 1.0,
            },
            kind,
        )
        .unwrap()
    }

    fn sup_gap(a: &Trajectory, b: &Trajectory) -> f64 {
        a.times
            .iter()
            .zip(&a.positions)
            .map(|(t, q)| {
                let (qb, _) = b.sample(*t);
                q.iter()
                    .zip(&qb)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn quadratic_costs_reproduce_closed_forms() {
        for kind in [ProblemKind::VegaHedge, ProblemKind::BucketCancellation] {
            let mut prob = problem(kind, CostSpec::quadratic(1.0));
            prob.inputs.view = MarketView {
                sharpe: 0.2,
                zeta: 0.7,
            };
            prob.inputs.rho = 0.3;
            let sol = solve_hamiltonian_bvp(&prob, 512).unwrap();
            let exact = plan_closed_form(&prob.inputs, kind, 512).unwrap();
            assert!(sup_gap(&sol.trajectory, &exact) < 1e-6, "{kind:?}");
            assert!(sol.terminal_defect <= 1e-8);
        }
    }

    #[test]
    fn free_end_costate_vanishes_at_horizon() {
        let sol = solve_hamiltonian_bvp(
            &problem(ProblemKind::VegaHedge, CostSpec::quadratic(1.0)),
            128,
        )
        .unwrap();
        assert!(sol.costates.last().unwrap()[0].abs() <= 1e-8);
    }

    #[test]
    fn hedged_power_cost_problem_stays_put() {
        let mut prob = problem(ProblemKind::VegaHedge, CostSpec::power(1.0, 1.5));
        prob.inputs.q0 = vec![-1.0];
        let sol = solve_hamiltonian_bvp(&prob, 64).unwrap();
        assert!(sol
            .trajectory
            .positions
            .iter()
            .all(|q| (q[0] + 1.0).abs() < 1e-12));
        assert!(
            crate::hedging::objective(&sol.trajectory, &prob.inputs)
                .unwrap()
                .abs()
                < 1e-20
        );
    }

    #[test]
    fn power_cost_matches_transcription() {
        let prob = problem(ProblemKind::BucketCancellation, CostSpec::power(1.0, 1.5));
        let sol = solve_hamiltonian_bvp(&prob, 512).unwrap();
        let oracle = transcription_oracle(&prob, 4000).unwrap();
        assert!(sup_gap(&sol.trajectory, &oracle) < 1e-3);
        assert!(sol.terminal_defect <= 1e-8);
    }

    #[test]
    fn zero_vega_is_a_straight_line() {
        let mut prob = problem(ProblemKind::BucketCancellation, CostSpec::power(2.0, 3.0));
        prob.inputs.vega_sv = vec![0.0];
        let sol = solve_hamiltonian_bvp(&prob, 64).unwrap();
        assert_eq!(sol.trajectory.positions[64], vec![-1.0]);
        assert!((sol.trajectory.positions[32][0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_coarse_grid() {
        assert!(solve_hamiltonian_bvp(
            &problem(ProblemKind::VegaHedge, CostSpec::quadratic(1.0)),
            32
        )
        .is_err());
    }
}

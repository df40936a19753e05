//! Direct transcription of the hedging functional on a uniform grid.
//!
//! Unknowns are the grid positions not fixed by boundary conditions. The
//! discrete objective is
//!
//! ```text
//! Σ_k Δt·Σ_i L_i((q_{k+1,i} − q_{k,i})/Δt) + Σ_k w_k·Δt·(a·e_k² + (c/2)·e_k)
//! ```
//!
//! with trapezoid weights w_0 = w_M = 1/2, which keeps the free-end
//! boundary condition second-order accurate. It is convex with a
//! block-tridiagonal Hessian and is minimised by damped Newton.

use nalgebra::{DMatrix, DVector};

use super::BvpProblem;
use crate::costs::CostSpec;
use crate::error::{HedgeError, Result};
use crate::hedging::ProblemKind;
use crate::trajectory::{uniform_grid, Trajectory};

const GRADIENT_TOL: f64 = 1e-10;
const MAX_NEWTON: usize = 200;

#[derive(Debug, Clone)]
pub struct TranscriptionSolution {
    pub trajectory: Trajectory,
    pub objective: f64,
    /// ‖∇F‖∞ at the returned point.
    pub gradient_norm: f64,
    /// Largest summed magnitude of the terms entering one gradient entry.
    pub gradient_scale: f64,
    pub iterations: usize,
}

/// Discretised problem on `m` intervals.
#[derive(Debug, Clone)]
pub struct Transcription<'a> {
    prob: &'a BvpProblem,
    m: usize,
    dt: f64,
    costs: Vec<CostSpec>,
}

struct Derivatives {
    gradient: Vec<f64>,
    magnitude: Vec<f64>,
    diag: Vec<DMatrix<f64>>,
    off: Vec<DVector<f64>>,
}

impl<'a> Transcription<'a> {
    pub fn new(prob: &'a BvpProblem, m: usize) -> Result<Self> {
        if m < 16 {
            return Err(HedgeError::domain(format!(
                "transcription grid must have M >= 16, got {m}"
            )));
        }
        prob.inputs.validate()?;
        Ok(Transcription {
            prob,
            m,
            dt: prob.inputs.horizon / m as f64,
            costs: prob.inputs.costs.clone(),
        })
    }

    fn with_costs(&self, costs: Vec<CostSpec>) -> Self {
        Transcription {
            prob: self.prob,
            m: self.m,
            dt: self.dt,
            costs,
        }
    }

    fn n(&self) -> usize {
        self.prob.inputs.dim()
    }

    /// Number of free grid nodes.
    fn free_nodes(&self) -> usize {
        match self.prob.kind {
            ProblemKind::VegaHedge => self.m,
            ProblemKind::BucketCancellation => self.m - 1,
        }
    }

    /// Expands the free unknowns into the full grid, boundary values included.
    fn full_path(&self, free: &[f64]) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut nodes = Vec::with_capacity(self.m + 1);
        nodes.push(self.prob.inputs.q0.clone());
        nodes.extend(free.chunks(n).map(<[f64]>::to_vec));
        if self.prob.kind == ProblemKind::BucketCancellation {
            nodes.push(self.prob.inputs.hedged_position());
        }
        nodes
    }

    fn weight(&self, k: usize) -> f64 {
        if k == 0 || k == self.m {
            0.5
        } else {
            1.0
        }
    }

    /// Discrete objective on a full grid of positions (M + 1 nodes).
    pub fn objective_of(&self, nodes: &[Vec<f64>]) -> f64 {
        let inputs = &self.prob.inputs;
        let a = inputs.risk_weight();
        let half_c = 0.5 * inputs.view_drift();
        let mut total = 0.0;
        for w in nodes.windows(2) {
            for ((cost, a), b) in self.costs.iter().zip(&w[0]).zip(&w[1]) {
                total += self.dt * cost.cost((b - a) / self.dt);
            }
        }
        for (k, q) in nodes.iter().enumerate() {
            let e = inputs.exposure(q);
            total += self.weight(k) * self.dt * (a * e * e + half_c * e);
        }
        total
    }

    fn derivatives(&self, nodes: &[Vec<f64>]) -> Derivatives {
        let n = self.n();
        let free = self.free_nodes();
        let inputs = &self.prob.inputs;
        let vega = &inputs.vega_sv;
        let a = inputs.risk_weight();
        let half_c = 0.5 * inputs.view_drift();
        let dt = self.dt;

        // Velocities and cost derivatives per interval.
        let mut slope = vec![vec![0.0; n]; self.m];
        let mut curvature = vec![vec![0.0; n]; self.m];
        let vel_floor = 1e-12 * (1.0 + velocity_scale(nodes, dt));
        for k in 0..self.m {
            for i in 0..n {
                let v = (nodes[k + 1][i] - nodes[k][i]) / dt;
                slope[k][i] = self.costs[i].marginal_cost(v);
                let v_safe = if v.abs() < vel_floor { vel_floor } else { v };
                curvature[k][i] = self.costs[i].cost_curvature(v_safe) / dt;
            }
        }

        let mut gradient = vec![0.0; free * n];
        let mut magnitude = vec![0.0; free * n];
        let mut diag = Vec::with_capacity(free);
        let mut off = Vec::with_capacity(free.saturating_sub(1));
        for j in 0..free {
            let node = j + 1;
            let w = self.weight(node) * dt;
            let e = inputs.exposure(&nodes[node]);
            let state = 2.0 * a * e + half_c;
            let mut block = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                let left = slope[node - 1][i];
                let right = if node < self.m { slope[node][i] } else { 0.0 };
                let g = left - right + w * state * vega[i];
                gradient[j * n + i] = g;
                magnitude[j * n + i] = left.abs()
                    + right.abs()
                    + w * (2.0 * a * e.abs() + half_c.abs()) * vega[i].abs();
                let mut d = curvature[node - 1][i];
                if node < self.m {
                    d += curvature[node][i];
                }
                block[(i, i)] = d;
                for l in 0..n {
                    block[(i, l)] += w * 2.0 * a * vega[i] * vega[l];
                }
            }
            diag.push(block);
            if j + 1 < free {
                off.push(DVector::from_iterator(
                    n,
                    (0..n).map(|i| -curvature[node][i]),
                ));
            }
        }
        Derivatives {
            gradient,
            magnitude,
            diag,
            off,
        }
    }

    /// Solves H·x = rhs for the block-tridiagonal Hessian (block LDLᵀ sweep).
    fn solve_newton(&self, d: &Derivatives, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        let free = d.diag.len();
        let mut factors = Vec::with_capacity(free);
        let mut y: Vec<DVector<f64>> = Vec::with_capacity(free);
        for j in 0..free {
            let mut s = d.diag[j].clone();
            let mut r = DVector::from_column_slice(&rhs[j * n..(j + 1) * n]);
            if j > 0 {
                let b = &d.off[j - 1];
                let prev: &nalgebra::Cholesky<f64, nalgebra::Dyn> = &factors[j - 1];
                // S_j = D_j − B S_{j−1}^{-1} B with B diagonal.
                let bmat = DMatrix::from_diagonal(b);
                let sinv_b = prev.solve(&bmat);
                s -= &bmat * sinv_b;
                r -= &bmat * prev.solve(&y[j - 1]);
            }
            let chol = nalgebra::Cholesky::new(s).ok_or_else(|| {
                HedgeError::numeric(
                    "transcription",
                    format!("Hessian not positive definite at block {j}"),
                )
            })?;
            factors.push(chol);
            y.push(r);
        }
        let mut x = vec![DVector::<f64>::zeros(n); free];
        for j in (0..free).rev() {
            let mut r = y[j].clone();
            if j + 1 < free {
                r -= DMatrix::from_diagonal(&d.off[j]) * &x[j + 1];
            }
            x[j] = factors[j].solve(&r);
        }
        Ok(x.iter().flat_map(|v| v.iter().copied()).collect())
    }

    fn minimise_from(&self, mut free: Vec<f64>) -> Result<(Vec<f64>, f64, f64, f64, usize)> {
        let mut nodes = self.full_path(&free);
        let mut value = self.objective_of(&nodes);
        for iter in 0..=MAX_NEWTON {
            let d = self.derivatives(&nodes);
            let gnorm = d.gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            let scale = d.magnitude.iter().fold(f64::MIN_POSITIVE, |m, g| m.max(*g));
            if gnorm <= GRADIENT_TOL * scale {
                return Ok((free, value, gnorm, scale, iter));
            }
            if iter == MAX_NEWTON {
                break;
            }
            let neg: Vec<f64> = d.gradient.iter().map(|g| -g).collect();
            let mut step = self.solve_newton(&d, &neg)?;
            let mut slope: f64 = step.iter().zip(&d.gradient).map(|(s, g)| s * g).sum();
            if !(slope < 0.0) {
                step = neg.clone();
                slope = -neg.iter().map(|g| g * g).sum::<f64>();
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> = free.iter().zip(&step).map(|(x, s)| x + t * s).collect();
                let trial_nodes = self.full_path(&trial);
                let trial_value = self.objective_of(&trial_nodes);
                if trial_value <= value + 1e-4 * t * slope {
                    accepted = Some((trial, trial_nodes, trial_value));
                    break;
                }
                t *= 0.5;
            }
            match accepted {
                Some((f, n, v)) => {
                    free = f;
                    nodes = n;
                    value = v;
                }
                None => {
                    // Decrease is below roundoff: take the full step if it improves stationarity.
                    let trial: Vec<f64> = free.iter().zip(&step).map(|(x, s)| x + s).collect();
                    let trial_nodes = self.full_path(&trial);
                    let g2 = self.derivatives(&trial_nodes);
                    let g2norm = g2.gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
                    if g2norm < gnorm {
                        free = trial;
                        value = self.objective_of(&trial_nodes);
                        nodes = trial_nodes;
                    } else {
                        return Err(HedgeError::numeric(
                            "transcription",
                            format!("line search stalled at iteration {iter}: gradient {gnorm:e}, scale {scale:e}"),
                        ));
                    }
                }
            }
        }
        let d = self.derivatives(&nodes);
        let gnorm = d.gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        Err(HedgeError::numeric(
            "transcription",
            format!("iteration cap {MAX_NEWTON} exceeded with gradient {gnorm:e}"),
        ))
    }

    fn initial_guess(&self) -> Vec<f64> {
        let inputs = &self.prob.inputs;
        let line = self.prob.execution_only(self.m);
        let start: Vec<f64> = match self.prob.kind {
            ProblemKind::VegaHedge => line.positions[1..].concat(),
            ProblemKind::BucketCancellation => line.positions[1..self.m].concat(),
        };
        if inputs.costs.iter().all(CostSpec::is_quadratic) {
            return start;
        }
        // Minimiser of the quadratic surrogate with the same cost scales.
        let surrogate = self.with_costs(
            inputs
                .costs
                .iter()
                .map(|c| CostSpec::quadratic(c.eta()))
                .collect(),
        );
        surrogate
            .minimise_from(start.clone())
            .map(|r| r.0)
            .unwrap_or(start)
    }

    pub fn solve(&self) -> Result<TranscriptionSolution> {
        let (free, objective, gradient_norm, gradient_scale, iterations) =
            self.minimise_from(self.initial_guess())?;
        let nodes = self.full_path(&free);
        let velocities = node_velocities(&nodes, self.dt);
        Ok(TranscriptionSolution {
            trajectory: Trajectory {
                times: uniform_grid(self.prob.inputs.horizon, self.m),
                positions: nodes,
                velocities,
            },
            objective,
            gradient_norm,
            gradient_scale,
            iterations,
        })
    }
}

fn velocity_scale(nodes: &[Vec<f64>], dt: f64) -> f64 {
    nodes
        .windows(2)
        .flat_map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| ((b - a) / dt).abs()))
        .fold(0.0, f64::max)
}

/// Second-order differences: central inside, one-sided at the ends.
fn node_velocities(nodes: &[Vec<f64>], dt: f64) -> Vec<Vec<f64>> {
    let m = nodes.len() - 1;
    let n = nodes[0].len();
    (0..=m)
        .map(|k| {
            (0..n)
                .map(|i| {
                    let q = |j: usize| nodes[j][i];
                    if k == 0 {
                        (-3.0 * q(0) + 4.0 * q(1) - q(2)) / (2.0 * dt)
                    } else if k == m {
                        (3.0 * q(m) - 4.0 * q(m - 1) + q(m - 2)) / (2.0 * dt)
                    } else {
                        (q(k + 1) - q(k - 1)) / (2.0 * dt)
                    }
                })
                .collect()
        })
        .collect()
}

/// Minimiser of the transcribed functional on `m` intervals.
pub fn transcription_oracle(prob: &BvpProblem, m: usize) -> Result<Trajectory> {
    Transcription::new(prob, m)?.solve().map(|s| s.trajectory)
}

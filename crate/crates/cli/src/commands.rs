use std::fs;
use std::path::{Path, PathBuf};

use hedger_core::tpbvp::{solve_hamiltonian_bvp, BvpProblem, Transcription};
use hedger_core::{
    compare_strategies, estimate_objective, frozen_view, lambda_of, objective, plan_closed_form,
    simulate_pnl, target_ratios, validate_params, vega_profile, HedgeInputs, ObjectiveEstimate,
    PairedComparison, StockMode, Trajectory, ValidationReport, VegaProfile,
};
use serde::Serialize;

use crate::config::{FrozenGreeks, RunConfig};
use crate::error::CliError;
use crate::table::{read_trajectory, write_trajectory};
use crate::{Baseline, Command};

/// Everything a command needs besides its own flags.
pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
}

impl Context {
    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.out.join(name);
        let text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
        fs::write(&path, text + "\n")
            .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    fn write_csv(
        &self,
        name: &str,
        tr: &Trajectory,
        inputs: &HedgeInputs,
    ) -> Result<PathBuf, CliError> {
        let path = self.out.join(name);
        write_trajectory(&path, tr, inputs)?;
        Ok(path)
    }
}

pub fn validate(cfg: &RunConfig) -> ValidationReport {
    let mut report = validate_params(&cfg.model.params);
    let mut push = |r: Result<(), hedger_core::HedgeError>| {
        if let Err(e) = r {
            report.errors.push(e.to_string());
        }
    };
    push(cfg.model.spot.validate());
    for o in &cfg.options {
        push(o.validate());
    }
    for c in &cfg.hedge.costs {
        push(c.validate());
    }
    if let Some(g) = &cfg.greeks_override {
        push(VegaProfile::new(g.vega_sv.clone(), g.vega_bs.clone()).map(|_| ()));
    }
    if !(cfg.hedge.gamma > 0.0) || !cfg.hedge.gamma.is_finite() {
        report
            .errors
            .push(format!("gamma must be positive, got {}", cfg.hedge.gamma));
    }
    if !(cfg.hedge.horizon > 0.0) || !cfg.hedge.horizon.is_finite() {
        report.errors.push(format!(
            "horizon must be positive, got {}",
            cfg.hedge.horizon
        ));
    }
    for (i, o) in cfg.options.iter().enumerate() {
        if o.maturity <= cfg.hedge.horizon {
            report.warnings.push(format!(
                "option {} expires at {} within the hedging horizon {}",
                i + 1,
                o.maturity,
                cfg.hedge.horizon
            ));
        }
    }
    report
}

pub fn greeks(cfg: &RunConfig) -> Result<FrozenGreeks, CliError> {
    let report = validate(cfg);
    if !report.is_ok() {
        return Err(CliError::Config(report.errors.join("; ")));
    }
    let view = match cfg.view_override {
        Some(v) => v,
        None => frozen_view(&cfg.model.params, &cfg.model.spot)?,
    };
    let profile = match &cfg.greeks_override {
        Some(g) => VegaProfile::new(g.vega_sv.clone(), g.vega_bs.clone())?,
        None => vega_profile(
            &cfg.model.params,
            &cfg.model.spot,
            &cfg.options,
            cfg.run.vega_bump,
        )?,
    };
    let target = target_ratios(&cfg.book, &profile)?.0;
    Ok(FrozenGreeks {
        view,
        profile,
        target,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanReport {
    pub method: &'static str,
    pub problem: hedger_core::ProblemKind,
    /// Only defined for quadratic costs.
    pub lambda: Option<f64>,
    pub objective: f64,
    pub grid: usize,
    pub terminal_defect: Option<f64>,
    pub used_fallback: Option<bool>,
}

/// Closed form for quadratic costs, Hamiltonian shooting otherwise.
pub fn plan(cfg: &RunConfig, inputs: &HedgeInputs) -> Result<(Trajectory, PlanReport), CliError> {
    let kind = cfg.hedge.problem;
    let m = cfg.run.grid;
    let lambda = if inputs.all_quadratic() {
        Some(lambda_of(inputs)?)
    } else {
        None
    };
    let (tr, method, defect, fallback) = if inputs.all_quadratic() {
        (
            plan_closed_form(inputs, kind, m)?,
            "closed_form",
            None,
            None,
        )
    } else {
        let sol = solve_hamiltonian_bvp(&BvpProblem::new(inputs.clone(), kind)?, m)?;
        (
            sol.trajectory,
            "hamiltonian_shooting",
            Some(sol.terminal_defect),
            Some(sol.used_fallback),
        )
    };
    let report = PlanReport {
        method,
        problem: kind,
        lambda,
        objective: objective(&tr, inputs)?,
        grid: m,
        terminal_defect: defect,
        used_fallback: fallback,
    };
    Ok((tr, report))
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub grid: usize,
    pub oracle_grid: usize,
    /// max over the plan grid of |plan − oracle| (oracle interpolated linearly).
    pub sup_gap: f64,
    pub oracle_objective: f64,
    pub plan_objective: f64,
    pub gradient_norm: f64,
    pub gradient_scale: f64,
    pub iterations: usize,
}

pub fn sup_gap(a: &Trajectory, b: &Trajectory) -> f64 {
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

pub fn oracle(
    cfg: &RunConfig,
    inputs: &HedgeInputs,
) -> Result<(Trajectory, OracleReport), CliError> {
    let (planned, plan_report) = plan(cfg, inputs)?;
    let prob = BvpProblem::new(inputs.clone(), cfg.hedge.problem)?;
    let sol = Transcription::new(&prob, cfg.run.oracle_grid)?.solve()?;
    let report = OracleReport {
        grid: cfg.run.grid,
        oracle_grid: cfg.run.oracle_grid,
        sup_gap: sup_gap(&planned, &sol.trajectory),
        oracle_objective: objective(&sol.trajectory, inputs)?,
        plan_objective: plan_report.objective,
        gradient_norm: sol.gradient_norm,
        gradient_scale: sol.gradient_scale,
        iterations: sol.iterations,
    };
    Ok((sol.trajectory, report))
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub estimate: ObjectiveEstimate,
    pub analytic_objective: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

pub fn baseline_trajectory(
    which: &Baseline,
    inputs: &HedgeInputs,
    m: usize,
) -> Result<Trajectory, CliError> {
    let target = inputs.hedged_position();
    Ok(match which {
        Baseline::Linear => Trajectory::linear(&inputs.q0, &target, inputs.horizon, m),
        Baseline::Immediate => {
            Trajectory::fast_unwind(&inputs.q0, &target, 0.1 * inputs.horizon, inputs.horizon, m)
        }
        Baseline::File(path) => read_trajectory(path)?,
    })
}

pub fn run(command: &Command, ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let cfg = &ctx.config;
    match command {
        Command::Validate => {
            let report = validate(cfg);
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            let path = ctx.write_json("validation.json", &report)?;
            if !report.is_ok() {
                return Err(CliError::Config(report.errors.join("; ")));
            }
            Ok(vec![path])
        }
        Command::Greeks => {
            let g = greeks(cfg)?;
            Ok(vec![ctx.write_json("greeks.json", &g)?])
        }
        Command::Plan => {
            let inputs = greeks(cfg)?.hedge_inputs(cfg);
            let (tr, report) = plan(cfg, &inputs)?;
            Ok(vec![
                ctx.write_csv("plan.csv", &tr, &inputs)?,
                ctx.write_json("plan.json", &report)?,
            ])
        }
        Command::Oracle => {
            let inputs = greeks(cfg)?.hedge_inputs(cfg);
            let (tr, report) = oracle(cfg, &inputs)?;
            Ok(vec![
                ctx.write_csv("oracle.csv", &tr, &inputs)?,
                ctx.write_json("oracle.json", &report)?,
            ])
        }
        Command::Simulate => {
            let inputs = greeks(cfg)?.hedge_inputs(cfg);
            let (tr, _) = plan(cfg, &inputs)?;
            let r = &cfg.run;
            let samples = simulate_pnl(
                &tr,
                &inputs,
                StockMode::OptimalU,
                r.n_paths,
                r.n_steps,
                r.seed,
                "plan",
            )?;
            let report = SimulateReport {
                estimate: estimate_objective(&samples, inputs.gamma)?,
                analytic_objective: objective(&tr, &inputs)?,
                n_paths: r.n_paths,
                n_steps: r.n_steps,
                seed: r.seed,
            };
            Ok(vec![ctx.write_json("simulate.json", &report)?])
        }
        Command::Compare { baseline } => {
            let inputs = greeks(cfg)?.hedge_inputs(cfg);
            let (tr, _) = plan(cfg, &inputs)?;
            let base = baseline_trajectory(baseline, &inputs, cfg.run.grid)?;
            let r = &cfg.run;
            let report: PairedComparison = compare_strategies(
                &tr,
                &base,
                &inputs,
                StockMode::OptimalU,
                r.n_paths,
                r.n_steps,
                r.seed,
            )?;
            Ok(vec![ctx.write_json("compare.json", &report)?])
        }
    }
}

pub fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))
}

use std::fmt::Write as _;

use serde_json::{json, Value};

use riskeig::discretize::{assemble_operator, GridDomain, MarkovPolicy};
use riskeig::eigen::{
    eigenvector_csv, expanding_domain_limit_with, hjb_policy_iteration_with, policy_csv, principal_eigenpair, EigenOptions,
    ExpandingDomainReport, ExpandingOptions, PolicyOptions, Stability,
};
use riskeig::exitrate::exit_rate_problem_with;
use riskeig::maxproblem::max_value_problem_with;
use riskeig::model::{check_lyapunov_drift, shell_samples, DriftReport, ModelSpec};
use riskeig::simulate::{estimate_exit_survival, estimate_risk_value, simulate_path, Control, RiskEstimate, SimConfig, SurvivalEstimate};
use riskeig::{Error, Result};

use crate::config::{ControlSpec, GridKind, ScenarioConfig, StabilityMode, Task};

/// Everything a successful task produces. `verdict` carries a post-hoc failure
/// (a cross-validation discrepancy) that still warrants writing the report.
pub struct Output {
    pub report: Value,
    pub files: Vec<(&'static str, String)>,
    pub verdict: Option<Error>,
}

struct Invariant {
    name: &'static str,
    passed: bool,
    detail: String,
}

impl Invariant {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name, passed, detail: detail.into() }
    }

    fn to_json(&self) -> Value {
        json!({ "name": self.name, "passed": self.passed, "detail": self.detail })
    }
}

struct Ctx<'a> {
    cfg: &'a ScenarioConfig,
    model: ModelSpec,
    policy_opts: PolicyOptions,
    expanding_opts: ExpandingOptions,
}

pub fn run(cfg: &ScenarioConfig) -> Result<Output> {
    cfg.validate()?;
    let t = &cfg.tolerances;
    let policy_opts = PolicyOptions {
        eigen: EigenOptions { tol: t.eigen, max_iter: t.max_iter, ..EigenOptions::default() },
        tol: t.policy,
        max_policy_iter: t.max_policy_iter,
    };
    let ctx =
        Ctx { cfg, model: cfg.model.build()?, policy_opts, expanding_opts: ExpandingOptions { policy: policy_opts, tol: t.expanding } };
    let mut invariants = Vec::new();
    let mut files = Vec::new();
    let mut verdict = None;
    let results = match cfg.task {
        Task::DirichletEigen => ctx.dirichlet(&mut invariants, &mut files)?,
        Task::Hjb => ctx.hjb(&mut invariants, &mut files)?,
        Task::Expanding => ctx.expanding(&mut invariants, &mut files)?,
        Task::ExitRate => ctx.exit_rate(&mut invariants, &mut files)?,
        Task::MaxProblem => ctx.max_problem(&mut invariants, &mut files)?,
        Task::SimulateRisk => ctx.simulate_risk(&mut invariants, &mut files)?,
        Task::SimulateExit => ctx.simulate_exit(&mut invariants, &mut files)?,
        Task::LyapunovCheck => ctx.lyapunov(&mut invariants)?,
        Task::CrossValidate => ctx.cross_validate(&mut invariants, &mut files, &mut verdict)?,
    };
    let report = json!({
        "schema_version": 1,
        "task": cfg.task.name(),
        "model": cfg.model,
        "results": results,
        "invariants": invariants.iter().map(Invariant::to_json).collect::<Vec<_>>(),
    });
    Ok(Output { report, files, verdict })
}

fn psi_invariant(psi: &[f64]) -> Invariant {
    let min = psi.iter().copied().fold(f64::INFINITY, f64::min);
    Invariant::new("eigenvector_positive", min > 0.0, format!("min psi = {min:e}"))
}

fn grid_json(grid: &GridDomain) -> Value {
    let bounds: Vec<(f64, f64)> = grid.lower().iter().copied().zip(grid.upper().iter().copied()).collect();
    json!({ "bounds": bounds, "spacing": grid.spacing(), "nodes": grid.len() })
}

fn ladder_json(r: &ExpandingDomainReport) -> Value {
    json!({ "entries": r.entries, "converged": r.converged, "lambda_star": r.lambda_star })
}

fn ladder_invariant(r: &ExpandingDomainReport) -> Invariant {
    let ok = r.entries.windows(2).all(|w| w[1].lambda > w[0].lambda);
    Invariant::new("ladder_strictly_increasing", ok, format!("{} radii", r.entries.len()))
}

fn survival_csv(s: &SurvivalEstimate) -> String {
    let mut out = String::from("horizon,survivors,p_hat,log_p,used\n");
    for p in &s.per_horizon {
        let _ = writeln!(out, "{},{},{},{},{}", p.horizon, p.survivors, p.p_hat, p.log_p, u8::from(p.used));
    }
    out
}

fn risk_csv(r: &RiskEstimate) -> String {
    let mut out = String::from("horizon,log_mean_exp,ess\n");
    for h in &r.per_horizon {
        let _ = writeln!(out, "{},{},{}", h.horizon, h.log_mean_exp, h.ess);
    }
    out
}

impl Ctx<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn stability(&self) -> Result<(Stability, Option<DriftReport>)> {
        match self.cfg.stability {
            StabilityMode::Override => Ok((Stability::Override, None)),
            StabilityMode::Verify => {
                let report = self.drift_report()?;
                Ok((Stability::Verified(report.clone()), Some(report)))
            }
        }
    }

    fn drift_report(&self) -> Result<DriftReport> {
        let lyap = self.cfg.model.lyapunov()?;
        let r_min = lyap.compact_radius.unwrap_or(5.0);
        let (r_min, r_max, count, seed) = match &self.cfg.lyapunov_samples {
            Some(s) => (s.r_min, s.r_max, s.count, s.seed),
            None => (r_min, 4.0 * r_min, 200, 0),
        };
        check_lyapunov_drift(&self.model, &lyap, &shell_samples(self.dim(), r_min, r_max, count, seed))
    }

    fn constant_action(&self) -> usize {
        match self.cfg.control {
            ControlSpec::Constant { action } => action,
            ControlSpec::Optimal => 0,
        }
    }

    fn dirichlet(&self, inv: &mut Vec<Invariant>, files: &mut Vec<(&'static str, String)>) -> Result<Value> {
        let grid = self.cfg.grid()?.boxed(self.dim(), self.cfg.task)?;
        let action = self.constant_action();
        let op = assemble_operator(&self.model, &grid, &MarkovPolicy::constant(&grid, action), true)?;
        let pair = principal_eigenpair(&op, self.cfg.tolerances.eigen, self.cfg.tolerances.max_iter)?;
        inv.push(psi_invariant(&pair.psi));
        files.push(("eigenvector.csv", eigenvector_csv(&grid, &pair.psi)));
        Ok(json!({
            "lambda": pair.lambda,
            "residual": pair.residual,
            "iterations": pair.iterations,
            "action": action,
            "grid": grid_json(&grid),
        }))
    }

    fn hjb(&self, inv: &mut Vec<Invariant>, files: &mut Vec<(&'static str, String)>) -> Result<Value> {
        let grid = self.cfg.grid()?.boxed(self.dim(), self.cfg.task)?;
        let sol = hjb_policy_iteration_with(&self.model, &grid, &self.policy_opts)?;
        inv.push(psi_invariant(&sol.eigenpair.psi));
        files.push(("eigenvector.csv", eigenvector_csv(&grid, &sol.eigenpair.psi)));
        files.push(("policy.csv", policy_csv(&self.model, &grid, &sol.policy)));
        Ok(json!({
            "lambda": sol.eigenpair.lambda,
            "residual": sol.eigenpair.residual,
            "policy_iterations": sol.policy_iterations,
            "eigenvalue_history": sol.eigenvalue_history,
            "sense": self.model.sense(),
            "grid": grid_json(&grid),
        }))
    }

    fn ladder_report(&self) -> Result<(ExpandingDomainReport, Option<DriftReport>)> {
        let (radii, resolution) = self.cfg.grid()?.ladder(self.dim(), self.cfg.task)?;
        let (stability, drift) = self.stability()?;
        Ok((expanding_domain_limit_with(&self.model, radii, resolution, &stability, &self.expanding_opts)?, drift))
    }

    fn expanding(&self, inv: &mut Vec<Invariant>, files: &mut Vec<(&'static str, String)>) -> Result<Value> {
        let (report, drift) = self.ladder_report()?;
        inv.push(ladder_invariant(&report));
        inv.push(psi_invariant(&report.solution.eigenpair.psi));
        files.push(("eigenvector.csv", eigenvector_csv(&report.grid, &report.solution.eigenpair.psi)));
        files.push(("policy.csv", policy_csv(&self.model, &report.grid, &report.solution.policy)));
        let mut v = ladder_json(&report);
        v["stability"] = json!(drift);
        Ok(v)
    }

    fn exit_rate(&self, inv: &mut Vec<Invariant>, files: &mut Vec<(&'static str, String)>) -> Result<Value> {
        let grid = self.cfg.grid()?.boxed(self.dim(), self.cfg.task)?;
        let sol = exit_rate_problem_with(&self.model, &grid, &self.policy_opts)?;
        inv.push(psi_invariant(&sol.psi));
        inv.push(Invariant::new("exit_rate_negative", sol.theta < 0.0, format!("theta = {}", sol.theta)));
        files.push(("eigenvector.csv", eigenvector_csv(&grid, &sol.psi)));
        files.push(("policy.csv", policy_csv(&self.model, &grid, &sol.policy)));
        Ok(json!({
            "theta": sol.theta,
            "residual": sol.residual,
            "policy_iterations": sol.policy_iterations,
            "grid": grid_json(&grid),
        }))
    }

    fn max_problem(&self, inv: &mut Vec<Invariant>, files: &mut Vec<(&'static str, String)>) -> Result<Value> {
        let (radii, resolution) = self.cfg.grid()?.ladder(self.dim(), self.cfg.task)?;
        let r = max_value_problem_with(&self.model, radii, resolution, self.cfg.tolerances.expanding, &self.expanding_opts)?;
        let increasing = r.entries.windows(2).all(|w| w[1].lambda > w[0].lambda);
        inv.push(Invariant::new("ladder_strictly_increasing", increasing, format!("{} radii", r.entries.len())));
        inv.push(Invariant::new(
            "eigenfunction_decays",
            r.phi_outer_max < r.phi_inner_max,
            format!("outer max {:e}, inner max {:e}", r.phi_outer_max, r.phi_inner_max),
        ));
        files.push(("eigenvector.csv", eigenvector_csv(&r.grid, &r.phi_star)));
        files.push(("policy.csv", policy_csv(&self.model, &r.grid, &r.policy)));
        let mut v = serde_json::to_value(&r).map_err(|e| Error::Internal(e.to_string()))?;
        v["rho_star"] = json!(r.rho_star());
        Ok(v)
    }

    /// Control for simulation tasks: a constant action, or the solver's policy
    /// on the configured grid (box or largest radius of the ladder).
    fn control(&self) -> Result<(Control, Value)> {
        match self.cfg.control {
            ControlSpec::Constant { action } => Ok((Control::Constant(action), json!({ "kind": "constant", "action": action }))),
            ControlSpec::Optimal => match self.cfg.grid()?.kind(self.dim())? {
                GridKind::Box(grid) => {
                    let sol = hjb_policy_iteration_with(&self.model, &grid, &self.policy_opts)?;
                    let lambda = sol.eigenpair.lambda;
                    Ok((Control::Feedback { grid, policy: sol.policy }, json!({ "kind": "optimal", "solver_lambda": lambda })))
                }
                GridKind::Ladder { .. } => {
                    let (report, _) = self.ladder_report()?;
                    let lambda = report.entries.last().map(|e| e.lambda);
                    let info = json!({ "kind": "optimal", "solver_lambda": lambda, "ladder": ladder_json(&report) });
                    Ok((Control::Feedback { grid: report.grid, policy: report.solution.policy }, info))
                }
            },
        }
    }

    fn trajectory(&self, control: &Control, sim: &SimConfig) -> Result<String> {
        let horizon = *sim.horizons.last().expect("validated");
        Ok(simulate_path(&self.model, control, &sim.x0, horizon, sim.dt, sim.master_seed)?.to_csv())
    }

    fn simulate_risk(&self, inv: &mut Vec<Invariant>, files: &mut Vec<(&'static str, String)>) -> Result<Value> {
        let sim = self.cfg.sim()?;
        let (control, info) = self.control()?;
        let est = estimate_risk_value(&self.model, &control, sim)?;
        if est.degenerate {
            eprintln!("riskeig: warning kind=degenerate-weights min_ess_fraction={:e}", est.min_ess_fraction());
        }
        inv.push(Invariant::new("weights_nondegenerate", !est.degenerate, format!("min ESS fraction {:e}", est.min_ess_fraction())));
        files.push(("risk.csv", risk_csv(&est)));
        files.push(("trajectory.csv", self.trajectory(&control, sim)?));
        Ok(json!({ "estimate": est, "control": info, "sim": sim }))
    }

    fn simulate_exit(&self, _inv: &mut [Invariant], files: &mut Vec<(&'static str, String)>) -> Result<Value> {
        let sim = self.cfg.sim()?;
        let grid = self.cfg.grid()?.boxed(self.dim(), self.cfg.task)?;
        let bounds: Vec<(f64, f64)> = grid.lower().iter().copied().zip(grid.upper().iter().copied()).collect();
        let control = Control::Constant(self.constant_action());
        let est = estimate_exit_survival(&self.model, &control, &bounds, sim)?;
        files.push(("survival.csv", survival_csv(&est)));
        files.push(("trajectory.csv", self.trajectory(&control, sim)?));
        Ok(json!({ "estimate": est, "domain": bounds, "sim": sim }))
    }

    fn lyapunov(&self, inv: &mut Vec<Invariant>) -> Result<Value> {
        let report = self.drift_report()?;
        inv.push(Invariant::new("drift_condition_holds", report.holds(), format!("max violation {:e}", report.max_violation)));
        Ok(json!({ "holds": report.holds(), "report": report }))
    }

    fn cross_validate(
        &self,
        inv: &mut Vec<Invariant>,
        files: &mut Vec<(&'static str, String)>,
        verdict: &mut Option<Error>,
    ) -> Result<Value> {
        let sim = self.cfg.sim()?;
        let tol = self.cfg.tolerances.cross_validate;
        let (quantity, solver, mc, extra) = match self.cfg.grid()?.kind(self.dim())? {
            GridKind::Box(grid) => {
                // exit rate on the box vs Monte Carlo survival under the solver's policy
                let sol = exit_rate_problem_with(&self.model, &grid, &self.policy_opts)?;
                let bounds: Vec<(f64, f64)> = grid.lower().iter().copied().zip(grid.upper().iter().copied()).collect();
                let control = Control::Feedback { grid: grid.clone(), policy: sol.policy };
                let est = estimate_exit_survival(&self.model, &control, &bounds, sim)?;
                files.push(("survival.csv", survival_csv(&est)));
                ("exit_rate", sol.theta, est.slope, json!({ "survival": est }))
            }
            GridKind::Ladder { .. } => {
                let (report, drift) = self.ladder_report()?;
                inv.push(ladder_invariant(&report));
                let lambda = report.lambda_star.unwrap_or_else(|| report.entries.last().expect("non-empty").lambda);
                let control = Control::Feedback { grid: report.grid.clone(), policy: report.solution.policy.clone() };
                let est = estimate_risk_value(&self.model, &control, sim)?;
                inv.push(Invariant::new(
                    "weights_nondegenerate",
                    !est.degenerate,
                    format!("min ESS fraction {:e}", est.min_ess_fraction()),
                ));
                files.push(("risk.csv", risk_csv(&est)));
                ("risk_value", lambda, est.slope, json!({ "ladder": ladder_json(&report), "risk": est, "stability": drift }))
            }
        };
        let diff = (solver - mc).abs();
        let within = diff <= tol && inv.iter().all(|i| i.passed);
        inv.push(Invariant::new("discrepancy_within_tolerance", diff <= tol, format!("|solver - mc| = {diff:e}, tolerance {tol:e}")));
        files.push((
            "discrepancy.csv",
            format!(
                "quantity,solver,monte_carlo,abs_diff,tolerance,within_tolerance\n{quantity},{solver},{mc},{diff},{tol},{}\n",
                u8::from(within)
            ),
        ));
        if !within {
            let failed: Vec<&str> = inv.iter().filter(|i| !i.passed).map(|i| i.name).collect();
            *verdict = Some(Error::Invariant(format!("cross-validation failed: {}", failed.join(", "))));
        }
        Ok(json!({
            "quantity": quantity,
            "solver": solver,
            "monte_carlo": mc,
            "abs_diff": diff,
            "tolerance": tol,
            "within_tolerance": within,
            "details": extra,
        }))
    }
}

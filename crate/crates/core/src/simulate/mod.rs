//! Monte Carlo simulation of the controlled jump diffusion and estimators of
//! the risk-sensitive value and of exit survival rates.
//!
//! Every path draws from its own ChaCha8 stream: the key is derived from the
//! master seed and the stream id is the path index, so paths never share
//! draws and results do not depend on how paths are scheduled across threads.
//! Per-path results are collected in path order and reduced sequentially.

mod engine;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::{GridDomain, MarkovPolicy};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::stats::{log_sum_exp, ols, quantile};
use engine::{Engine, Event, Flow, PathEnd};

/// Bootstrap resamples behind every reported confidence band.
pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Survival horizons need at least this many surviving paths to enter the fit.
pub const MIN_SURVIVORS: usize = 50;
/// ESS below this fraction of the path count flags the risk estimate as degenerate.
pub const DEGENERACY_FRACTION: f64 = 0.01;

const BOOTSTRAP_KEY: u64 = 0xB007_5712_A9CE_0001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub horizons: Vec<f64>,
    pub n_paths: usize,
    pub master_seed: u64,
    pub x0: Vec<f64>,
}

impl SimConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.horizons.is_empty() || self.horizons[0] <= 0.0 || self.horizons.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config(format!("horizons must be positive and strictly increasing, got {:?}", self.horizons)));
        }
        if self.dt > self.horizons[0] / 10.0 {
            return Err(Error::config(format!("dt = {} exceeds a tenth of the shortest horizon {}", self.dt, self.horizons[0])));
        }
        if self.n_paths == 0 {
            return Err(Error::config("n_paths must be at least 1"));
        }
        if self.x0.len() != dim || !self.x0.iter().all(|v| v.is_finite()) {
            return Err(Error::config(format!("x0 must be a finite point of dimension {dim}")));
        }
        Ok(())
    }

    fn t_max(&self) -> f64 {
        *self.horizons.last().expect("validated non-empty")
    }
}

/// Feedback law used by the simulator.
#[derive(Debug, Clone)]
pub enum Control {
    Constant(usize),
    /// Action of the nearest interior grid node (off-grid states are clamped).
    Feedback {
        grid: GridDomain,
        policy: MarkovPolicy,
    },
}

impl Control {
    pub fn action_at(&self, x: &[f64]) -> usize {
        match self {
            Control::Constant(a) => *a,
            Control::Feedback { grid, policy } => policy.action(grid.nearest_node(x)),
        }
    }

    fn validate(&self, model: &ModelSpec) -> Result<()> {
        match self {
            Control::Constant(a) => model.check_action(*a),
            Control::Feedback { grid, policy } => {
                if grid.dim() != model.dim() {
                    return Err(Error::config("control grid dimension does not match the model"));
                }
                MarkovPolicy::new(policy.as_slice().to_vec(), grid, model.actions().len()).map(|_| ())
            }
        }
    }
}

/// Random stream of one path.
pub fn path_rng(master_seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub is_jump: Vec<bool>,
    pub jump_epochs: Vec<f64>,
    pub cost_integral: f64,
    /// Time at which the state stopped being finite; the trajectory ends there.
    pub blow_up: Option<f64>,
}

impl Trajectory {
    /// Dump with columns `t, x_1..x_d, action_index, is_jump`.
    pub fn to_csv(&self) -> String {
        let d = self.states.first().map(Vec::len).unwrap_or(0);
        let mut s = String::from("t");
        for k in 0..d {
            let _ = write!(s, ",x_{}", k + 1);
        }
        s.push_str(",action_index,is_jump\n");
        for i in 0..self.times.len() {
            let _ = write!(s, "{}", self.times[i]);
            for v in &self.states[i] {
                let _ = write!(s, ",{v}");
            }
            let _ = writeln!(s, ",{},{}", self.actions[i], u8::from(self.is_jump[i]));
        }
        s
    }
}

/// Simulates one path on `[0, horizon]` using stream 0 of `seed`.
pub fn simulate_path(model: &ModelSpec, control: &Control, x0: &[f64], horizon: f64, dt: f64, seed: u64) -> Result<Trajectory> {
    simulate_stream(model, control, x0, horizon, dt, &mut path_rng(seed, 0))
}

/// Paths `0..config.n_paths` on `[0, max horizon]`, each on its own stream.
pub fn simulate_paths(model: &ModelSpec, control: &Control, config: &SimConfig) -> Result<Vec<Trajectory>> {
    config.validate(model.dim())?;
    control.validate(model)?;
    (0..config.n_paths as u64)
        .into_par_iter()
        .map(|p| simulate_stream(model, control, &config.x0, config.t_max(), config.dt, &mut path_rng(config.master_seed, p)))
        .collect()
}

fn simulate_stream(model: &ModelSpec, control: &Control, x0: &[f64], horizon: f64, dt: f64, rng: &mut ChaCha8Rng) -> Result<Trajectory> {
    if !(dt > 0.0 && horizon > 0.0) {
        return Err(Error::config("dt and horizon must be positive"));
    }
    if x0.len() != model.dim() {
        return Err(Error::config("x0 has the wrong dimension"));
    }
    control.validate(model)?;
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0.to_vec()],
        actions: vec![control.action_at(x0)],
        is_jump: vec![false],
        jump_epochs: Vec::new(),
        cost_integral: 0.0,
        blow_up: None,
    };
    let mut engine = Engine::new(model, control);
    let end = engine.run(x0, dt, horizon, &[], rng, |e: Event<'_>| {
        traj.times.push(e.t);
        traj.states.push(e.x.to_vec());
        traj.actions.push(e.action);
        traj.is_jump.push(e.is_jump);
        if e.is_jump {
            traj.jump_epochs.push(e.t);
        }
        traj.cost_integral = e.cost_integral;
        Flow::Continue
    })?;
    if let PathEnd::BlowUp(t) = end {
        traj.blow_up = Some(t);
    }
    Ok(traj)
}

#[derive(Debug, Clone, Serialize)]
pub struct RiskHorizon {
    pub horizon: f64,
    /// `log((1/N) Σ exp(∫₀ᵀ c ds))`.
    pub log_mean_exp: f64,
    /// `(Σ e_i)² / Σ e_i²` with `e_i = exp(∫₀ᵀ c ds)`.
    pub ess: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RiskEstimate {
    pub per_horizon: Vec<RiskHorizon>,
    pub slope: f64,
    pub intercept: f64,
    /// Bootstrap 95% percentile band of the slope.
    pub slope_ci: (f64, f64),
    pub n_paths: usize,
    /// Set when some horizon has ESS below 1% of the paths.
    pub degenerate: bool,
}

impl RiskEstimate {
    pub fn min_ess_fraction(&self) -> f64 {
        self.per_horizon.iter().map(|h| h.ess / self.n_paths as f64).fold(f64::INFINITY, f64::min)
    }
}

pub fn estimate_risk_value(model: &ModelSpec, control: &Control, config: &SimConfig) -> Result<RiskEstimate> {
    config.validate(model.dim())?;
    control.validate(model)?;
    let h = config.horizons.len();
    // integrals[p][k] = ∫₀^{T_k} c along path p; every horizon shares the same path
    let integrals = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(config.master_seed, p);
            let mut engine = Engine::new(model, control);
            let mut out = vec![f64::NAN; h];
            let end = engine.run(&config.x0, config.dt, config.t_max(), &config.horizons, &mut rng, |e| {
                if let Some(k) = e.checkpoint {
                    out[k] = e.cost_integral;
                }
                Flow::Continue
            })?;
            match end {
                PathEnd::BlowUp(time) => Err(Error::BlowUp { time }),
                _ => Ok(out),
            }
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    let n = config.n_paths;
    let columns: Vec<Vec<f64>> = (0..h).map(|k| integrals.iter().map(|row| row[k]).collect()).collect();
    let log_n = (n as f64).ln();
    let per_horizon: Vec<RiskHorizon> = config
        .horizons
        .iter()
        .zip(&columns)
        .map(|(&horizon, col)| {
            let lse = log_sum_exp(col);
            let doubled: Vec<f64> = col.iter().map(|v| 2.0 * v).collect();
            let ess = (2.0 * lse - log_sum_exp(&doubled)).exp();
            RiskHorizon { horizon, log_mean_exp: lse - log_n, ess }
        })
        .collect();
    let degenerate = per_horizon.iter().any(|r| r.ess < DEGENERACY_FRACTION * n as f64);

    let values: Vec<f64> = per_horizon.iter().map(|r| r.log_mean_exp).collect();
    let (slope, intercept) = fit(&config.horizons, &values);
    let slope_ci = bootstrap_ci(config.master_seed, n, |idx| {
        let ys: Vec<f64> = columns
            .iter()
            .map(|col| {
                let sample: Vec<f64> = idx.iter().map(|&i| col[i]).collect();
                log_sum_exp(&sample) - log_n
            })
            .collect();
        fit(&config.horizons, &ys).0
    });

    Ok(RiskEstimate { per_horizon, slope, intercept, slope_ci, n_paths: n, degenerate })
}

fn fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    if xs.len() == 1 {
        // a single horizon: the line through the origin
        (ys[0] / xs[0], 0.0)
    } else {
        ols(xs, ys)
    }
}

fn bootstrap_ci(master_seed: u64, n: usize, statistic: impl Fn(&[usize]) -> f64 + Sync) -> (f64, f64) {
    let mut stats: Vec<f64> = (0..BOOTSTRAP_RESAMPLES as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = path_rng(master_seed ^ BOOTSTRAP_KEY, b);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            statistic(&idx)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    (quantile(&stats, 0.025), quantile(&stats, 0.975))
}

#[derive(Debug, Clone, Serialize)]
pub struct SurvivalPoint {
    pub horizon: f64,
    pub survivors: usize,
    pub p_hat: f64,
    pub log_p: f64,
    /// Whether the horizon had enough survivors to enter the fit.
    pub used: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SurvivalEstimate {
    pub per_horizon: Vec<SurvivalPoint>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_ci: (f64, f64),
    pub n_paths: usize,
}

/// Exit survival from the open box `bounds`. Exit is checked after every
/// Euler substep and every jump.
pub fn estimate_exit_survival(model: &ModelSpec, control: &Control, bounds: &[(f64, f64)], config: &SimConfig) -> Result<SurvivalEstimate> {
    config.validate(model.dim())?;
    control.validate(model)?;
    if bounds.len() != model.dim() || bounds.iter().any(|&(l, h)| !(l < h)) {
        return Err(Error::config("domain bounds must be a non-degenerate box of the model dimension"));
    }
    let inside = |x: &[f64]| x.iter().zip(bounds).all(|(v, &(l, h))| *v > l && *v < h);
    if !inside(&config.x0) {
        return Err(Error::config("x0 must lie inside the domain"));
    }
    let exit_times = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(config.master_seed, p);
            let mut engine = Engine::new(model, control);
            let mut tau = f64::INFINITY;
            let end = engine.run(&config.x0, config.dt, config.t_max(), &[], &mut rng, |e| {
                if inside(e.x) {
                    Flow::Continue
                } else {
                    tau = e.t;
                    Flow::Stop
                }
            })?;
            match end {
                PathEnd::BlowUp(time) => Err(Error::BlowUp { time }),
                _ => Ok(tau),
            }
        })
        .collect::<Result<Vec<f64>>>()?;

    let n = config.n_paths;
    let survival = |taus: &mut dyn Iterator<Item = f64>, t: f64| taus.filter(|&tau| tau > t).count();
    let per_horizon: Vec<SurvivalPoint> = config
        .horizons
        .iter()
        .map(|&t| {
            let survivors = survival(&mut exit_times.iter().copied(), t);
            let p_hat = survivors as f64 / n as f64;
            SurvivalPoint { horizon: t, survivors, p_hat, log_p: p_hat.ln(), used: survivors > MIN_SURVIVORS }
        })
        .collect();
    let used: Vec<&SurvivalPoint> = per_horizon.iter().filter(|p| p.used).collect();
    if per_horizon[0].survivors == 0 {
        return Err(Error::InsufficientSurvivors(format!(
            "all {n} paths left the domain before T = {}; increase n_paths or shorten the horizons",
            config.horizons[0]
        )));
    }
    if used.len() < 2 {
        return Err(Error::InsufficientSurvivors(format!(
            "only {} horizon(s) keep more than {MIN_SURVIVORS} survivors; increase n_paths or shorten the horizons",
            used.len()
        )));
    }
    let xs: Vec<f64> = used.iter().map(|p| p.horizon).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.log_p).collect();
    let (slope, intercept) = ols(&xs, &ys);
    let slope_ci = bootstrap_ci(config.master_seed, n, |idx| {
        let ys: Vec<f64> = xs
            .iter()
            .map(|&t| {
                let count = idx.iter().filter(|&&i| exit_times[i] > t).count().max(1);
                (count as f64 / n as f64).ln()
            })
            .collect();
        ols(&xs, &ys).0
    });
    Ok(SurvivalEstimate { per_horizon, slope, intercept, slope_ci, n_paths: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Atom, JumpKernel};

    #[test]
    fn static_path_stays_put() {
        let model = ModelSpec::builder(1).diffusion(|_, o| o[0] = f64::MIN_POSITIVE).build().unwrap();
        let t = simulate_path(&model, &Control::Constant(0), &[0.7], 1.0, 0.01, 3).unwrap();
        assert!(t.states.iter().all(|x| (x[0] - 0.7).abs() < 1e-100));
        assert!(t.jump_epochs.is_empty());
    }

    #[test]
    fn deterministic_decay_matches_exponential() {
        let model = ModelSpec::builder(1).drift(|x, _, o| o[0] = -x[0]).diffusion(|_, o| o[0] = f64::MIN_POSITIVE).build().unwrap();
        let t = simulate_path(&model, &Control::Constant(0), &[2.0], 1.0, 1e-3, 1).unwrap();
        let end = t.states.last().unwrap()[0];
        let exact = 2.0 * (-1.0f64).exp();
        assert!(((end - exact) / exact).abs() < 1e-2);
        assert_eq!(*t.times.last().unwrap(), 1.0);
    }

    #[test]
    fn same_seed_same_path() {
        let kernel = JumpKernel::translation(vec![Atom { mark: vec![0.3], weight: 2.0 }]).unwrap();
        let model = ModelSpec::builder(1).kernel(kernel).build().unwrap();
        let a = simulate_path(&model, &Control::Constant(0), &[0.0], 2.0, 0.01, 9).unwrap();
        let b = simulate_path(&model, &Control::Constant(0), &[0.0], 2.0, 0.01, 9).unwrap();
        let c = simulate_path(&model, &Control::Constant(0), &[0.0], 2.0, 0.01, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(!a.jump_epochs.is_empty());
        assert!(a.to_csv().starts_with("t,x_1,action_index,is_jump\n0,0,0,0\n"));
    }

    #[test]
    fn blow_up_truncates() {
        let model = ModelSpec::builder(1).constant_diffusion(f64::MAX).build().unwrap();
        let t = simulate_path(&model, &Control::Constant(0), &[0.0], 1.0, 0.1, 0).unwrap();
        assert!(t.blow_up.is_some());
        assert!(t.times.len() < 11);
    }

    #[test]
    fn config_validation() {
        let ok = SimConfig { dt: 0.01, horizons: vec![1.0, 2.0], n_paths: 10, master_seed: 1, x0: vec![0.0] };
        assert!(ok.validate(1).is_ok());
        assert!(SimConfig { dt: 0.2, ..ok.clone() }.validate(1).is_err());
        assert!(SimConfig { horizons: vec![2.0, 1.0], ..ok.clone() }.validate(1).is_err());
        assert!(SimConfig { n_paths: 0, ..ok.clone() }.validate(1).is_err());
        assert!(ok.validate(2).is_err());
    }

    #[test]
    fn constant_cost_is_exact() {
        let model = ModelSpec::builder(1).drift(|x, _, o| o[0] = -x[0]).cost(|_, _| 0.7).build().unwrap();
        let cfg = SimConfig { dt: 0.01, horizons: vec![1.0, 2.0, 3.0], n_paths: 64, master_seed: 5, x0: vec![0.0] };
        let r = estimate_risk_value(&model, &Control::Constant(0), &cfg).unwrap();
        assert!((r.slope - 0.7).abs() < 1e-12, "{}", r.slope);
        assert!(!r.degenerate);
        assert!((r.per_horizon[0].ess - 64.0).abs() < 1e-9);
    }

    #[test]
    fn huge_domain_never_exits() {
        let model = ModelSpec::builder(1).build().unwrap();
        let cfg = SimConfig { dt: 0.01, horizons: vec![0.5, 1.0], n_paths: 200, master_seed: 2, x0: vec![0.0] };
        let s = estimate_exit_survival(&model, &Control::Constant(0), &[(-1e6, 1e6)], &cfg).unwrap();
        assert_eq!(s.slope, 0.0);
        assert!(s.per_horizon.iter().all(|p| p.p_hat == 1.0));
    }

    #[test]
    fn tiny_domain_reports_insufficient_survivors() {
        let model = ModelSpec::builder(1).build().unwrap();
        let cfg = SimConfig { dt: 0.01, horizons: vec![5.0, 10.0], n_paths: 20, master_seed: 2, x0: vec![0.0] };
        let err = estimate_exit_survival(&model, &Control::Constant(0), &[(-0.01, 0.01)], &cfg).unwrap_err();
        assert!(matches!(err, Error::InsufficientSurvivors(_)));
    }
}

use std::path::PathBuf;

use serde::Deserialize;

use riskeig::discretize::GridDomain;
use riskeig::model::catalog::CatalogModel;
use riskeig::simulate::SimConfig;
use riskeig::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    DirichletEigen,
    Hjb,
    Expanding,
    ExitRate,
    MaxProblem,
    SimulateRisk,
    SimulateExit,
    LyapunovCheck,
    CrossValidate,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::DirichletEigen => "dirichlet-eigen",
            Task::Hjb => "hjb",
            Task::Expanding => "expanding",
            Task::ExitRate => "exit-rate",
            Task::MaxProblem => "max-problem",
            Task::SimulateRisk => "simulate-risk",
            Task::SimulateExit => "simulate-exit",
            Task::LyapunovCheck => "lyapunov-check",
            Task::CrossValidate => "cross-validate",
        }
    }
}

/// Either an explicit box (`bounds` + `cells`) or a radius ladder (`radii` + `resolution`).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub bounds: Option<Vec<(f64, f64)>>,
    pub cells: Option<Vec<usize>>,
    pub radii: Option<Vec<f64>>,
    pub resolution: Option<usize>,
}

pub enum GridKind<'a> {
    Box(GridDomain),
    Ladder { radii: &'a [f64], resolution: usize },
}

impl GridSpec {
    pub fn kind(&self, dim: usize) -> Result<GridKind<'_>> {
        match (&self.bounds, &self.cells, &self.radii, self.resolution) {
            (Some(bounds), Some(cells), None, None) => {
                if bounds.len() != dim {
                    return Err(Error::Config(format!("grid has {} axes but the model has dimension {dim}", bounds.len())));
                }
                Ok(GridKind::Box(GridDomain::new(bounds, cells)?))
            }
            (None, None, Some(radii), Some(resolution)) => {
                // building every box up front surfaces misaligned radii as config errors
                for &r in radii {
                    GridDomain::centered_box(r, dim, resolution)?;
                }
                Ok(GridKind::Ladder { radii, resolution })
            }
            _ => Err(Error::Config("grid needs exactly one of {bounds, cells} or {radii, resolution}".into())),
        }
    }

    pub fn boxed(&self, dim: usize, task: Task) -> Result<GridDomain> {
        match self.kind(dim)? {
            GridKind::Box(g) => Ok(g),
            GridKind::Ladder { .. } => Err(Error::Config(format!("task {} needs grid.bounds and grid.cells", task.name()))),
        }
    }

    pub fn ladder(&self, dim: usize, task: Task) -> Result<(&[f64], usize)> {
        match self.kind(dim)? {
            GridKind::Ladder { radii, resolution } => Ok((radii, resolution)),
            GridKind::Box(_) => Err(Error::Config(format!("task {} needs grid.radii and grid.resolution", task.name()))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub eigen: f64,
    pub policy: f64,
    pub expanding: f64,
    pub max_iter: usize,
    pub max_policy_iter: usize,
    /// Largest accepted |solver − Monte Carlo| in `cross-validate`.
    pub cross_validate: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eigen: riskeig::eigen::DEFAULT_EIGEN_TOL,
            policy: riskeig::eigen::DEFAULT_POLICY_TOL,
            expanding: riskeig::eigen::DEFAULT_EXPANDING_TOL,
            max_iter: 10_000,
            max_policy_iter: 100,
            cross_validate: 5e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityMode {
    /// Run the Lyapunov drift check and refuse to proceed if it fails.
    #[default]
    Verify,
    Override,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ControlSpec {
    Constant {
        action: usize,
    },
    /// The feedback policy computed by the solver on the configured grid.
    #[default]
    Optimal,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub r_min: f64,
    pub r_max: f64,
    #[serde(default = "default_sample_count")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_sample_count() -> usize {
    200
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: CatalogModel,
    pub task: Task,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub sim: Option<SimConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub stability: StabilityMode,
    #[serde(default)]
    pub control: ControlSpec,
    #[serde(default)]
    pub lyapunov_samples: Option<SampleSpec>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid scenario: {e}")))
    }

    pub fn grid(&self) -> Result<&GridSpec> {
        self.grid.as_ref().ok_or_else(|| Error::Config(format!("task {} needs a grid", self.task.name())))
    }

    pub fn sim(&self) -> Result<&SimConfig> {
        self.sim.as_ref().ok_or_else(|| Error::Config(format!("task {} needs a sim section", self.task.name())))
    }

    /// Checks everything that can be checked without solving.
    pub fn validate(&self) -> Result<()> {
        let model = self.model.build()?;
        let dim = model.dim();
        let t = &self.tolerances;
        for (name, v) in [("eigen", t.eigen), ("policy", t.policy), ("expanding", t.expanding), ("cross_validate", t.cross_validate)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("tolerances.{name} must be positive")));
            }
        }
        if t.max_iter == 0 || t.max_policy_iter == 0 {
            return Err(Error::Config("iteration limits must be positive".into()));
        }
        if let ControlSpec::Constant { action } = self.control {
            if action >= model.actions().len() {
                return Err(Error::Config(format!("control action {action} out of range ({} actions)", model.actions().len())));
            }
        }
        if let Some(s) = &self.lyapunov_samples {
            if !(s.r_min > 0.0 && s.r_max > s.r_min && s.count > 0) {
                return Err(Error::Config("lyapunov_samples needs 0 < r_min < r_max and count > 0".into()));
            }
        }
        if let Some(sim) = &self.sim {
            sim.validate(dim)?;
        }
        // the Lyapunov gate guards every expanding-ladder solve except the max problem
        let ladder = matches!(self.grid.as_ref().map(|g| g.kind(dim)), Some(Ok(GridKind::Ladder { .. })));
        let needs_stability = match self.task {
            Task::Expanding | Task::CrossValidate => ladder,
            Task::SimulateRisk => ladder && self.control == ControlSpec::Optimal,
            _ => false,
        };
        if needs_stability && self.stability == StabilityMode::Verify {
            self.model.lyapunov()?;
        }
        match self.task {
            Task::DirichletEigen | Task::Hjb | Task::ExitRate => {
                self.grid()?.boxed(dim, self.task)?;
            }
            Task::Expanding | Task::MaxProblem => {
                self.grid()?.ladder(dim, self.task)?;
            }
            Task::SimulateRisk => {
                self.sim()?;
                if self.control == ControlSpec::Optimal {
                    self.grid()?.kind(dim)?;
                }
            }
            Task::SimulateExit => {
                self.sim()?;
                self.grid()?.boxed(dim, self.task)?;
            }
            Task::CrossValidate => {
                self.sim()?;
                self.grid()?.kind(dim)?;
            }
            Task::LyapunovCheck => {
                self.model.lyapunov()?;
            }
        }
        Ok(())
    }
}

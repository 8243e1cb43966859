use rayon::prelude::*;
use serde::Serialize;

use super::policy::{hjb_policy_iteration_with, HjbSolution, PolicyOptions};
use super::DEFAULT_EXPANDING_TOL;
use crate::discretize::GridDomain;
use crate::error::{Error, Result};
use crate::model::{DriftReport, ModelSpec};

/// Allowed decrease between consecutive radii before the ladder is declared
/// inconsistent.
pub const MONOTONICITY_MARGIN: f64 = 1e-10;

/// Evidence that the dynamics are stable enough for the whole-space limit.
#[derive(Debug, Clone)]
pub enum Stability {
    Verified(DriftReport),
    /// Run without a Lyapunov certificate.
    Override,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpandingOptions {
    pub policy: PolicyOptions,
    /// Convergence threshold on the last increment.
    pub tol: f64,
}

impl Default for ExpandingOptions {
    fn default() -> Self {
        Self { policy: PolicyOptions::default(), tol: DEFAULT_EXPANDING_TOL }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpandingEntry {
    pub radius: f64,
    pub lambda: f64,
    pub residual: f64,
    pub policy_iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpandingDomainReport {
    pub entries: Vec<ExpandingEntry>,
    pub converged: bool,
    pub lambda_star: Option<f64>,
    /// Solution on the largest box.
    #[serde(skip)]
    pub solution: HjbSolution,
    #[serde(skip)]
    pub grid: GridDomain,
}

pub fn expanding_domain_limit(
    model: &ModelSpec,
    radii: &[f64],
    resolution: usize,
    tol: f64,
    stability: &Stability,
) -> Result<ExpandingDomainReport> {
    expanding_domain_limit_with(model, radii, resolution, stability, &ExpandingOptions { tol, ..ExpandingOptions::default() })
}

pub fn expanding_domain_limit_with(
    model: &ModelSpec,
    radii: &[f64],
    resolution: usize,
    stability: &Stability,
    opts: &ExpandingOptions,
) -> Result<ExpandingDomainReport> {
    if let Stability::Verified(report) = stability {
        if !report.holds() {
            return Err(Error::config(format!(
                "stability check failed (max Lyapunov violation {:e}); pass an explicit override to proceed",
                report.max_violation
            )));
        }
    }
    sweep(model, radii, resolution, opts)
}

/// Expanding-box sweep without the stability gate.
pub(crate) fn sweep(model: &ModelSpec, radii: &[f64], resolution: usize, opts: &ExpandingOptions) -> Result<ExpandingDomainReport> {
    if radii.is_empty() {
        return Err(Error::config("radius ladder is empty"));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::config(format!("radii must be strictly increasing, got {radii:?}")));
    }
    let grids = radii.iter().map(|&r| GridDomain::centered_box(r, model.dim(), resolution)).collect::<Result<Vec<_>>>()?;
    let mut solutions = grids.par_iter().map(|g| hjb_policy_iteration_with(model, g, &opts.policy)).collect::<Result<Vec<_>>>()?;

    let entries: Vec<ExpandingEntry> = radii
        .iter()
        .zip(&solutions)
        .map(|(&radius, s)| ExpandingEntry {
            radius,
            lambda: s.eigenpair.lambda,
            residual: s.eigenpair.residual,
            policy_iterations: s.policy_iterations,
        })
        .collect();
    for w in entries.windows(2) {
        if w[1].lambda - w[0].lambda < -MONOTONICITY_MARGIN {
            return Err(Error::Invariant(format!(
                "eigenvalue decreased from {} (radius {}) to {} (radius {})",
                w[0].lambda, w[0].radius, w[1].lambda, w[1].radius
            )));
        }
    }
    let converged = match entries.len() {
        0 | 1 => false,
        k => (entries[k - 1].lambda - entries[k - 2].lambda).abs() < opts.tol,
    };
    let lambda_star = converged.then(|| entries[entries.len() - 1].lambda);
    let solution = solutions.pop().expect("non-empty ladder");
    let grid = grids.into_iter().last().expect("non-empty ladder");
    Ok(ExpandingDomainReport { entries, converged, lambda_star, solution, grid })
}

//! Risk-sensitive reward maximization on expanding boxes.
//!
//! The Dirichlet eigenvalues `ϱ_n` of the sup-Hamiltonian increase with the
//! box. The near-monotone hypothesis asks that their limit exceed the tail
//! supremum `C̲ = lim_r sup_{|x|>r} c`. Only a finite radius ladder is ever
//! available, so `C̲` is estimated on the outermost shell of the largest box
//! and the margin is reported at the largest radius, never as a proof.

use serde::Serialize;

use crate::discretize::{GridDomain, MarkovPolicy};
use crate::eigen::{ExpandingEntry, ExpandingOptions};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, Sense};

#[derive(Debug, Clone, Serialize)]
pub struct MaxProblemReport {
    pub entries: Vec<ExpandingEntry>,
    /// Largest reward over boundary-adjacent nodes and all actions at the largest radius.
    pub c_bar: f64,
    /// `ϱ_max - C̲` at the largest radius.
    pub margin: f64,
    pub hypothesis_ok: bool,
    /// Largest eigenfunction value on the outer quarter of the largest box.
    pub phi_outer_max: f64,
    /// Largest eigenfunction value on the inner half of the largest box.
    pub phi_inner_max: f64,
    #[serde(skip)]
    pub phi_star: Vec<f64>,
    #[serde(skip)]
    pub policy: MarkovPolicy,
    #[serde(skip)]
    pub grid: GridDomain,
}

impl MaxProblemReport {
    pub fn rho_star(&self) -> f64 {
        self.entries.last().map(|e| e.lambda).unwrap_or(f64::NAN)
    }
}

/// `tol` is the margin a reward must clear before the hypothesis is accepted;
/// it also bounds the policy-iteration increment.
pub fn max_value_problem(model: &ModelSpec, radii: &[f64], resolution: usize, tol: f64) -> Result<MaxProblemReport> {
    let mut opts = ExpandingOptions::default();
    opts.policy.tol = opts.policy.tol.min(tol);
    max_value_problem_with(model, radii, resolution, tol, &opts)
}

pub fn max_value_problem_with(
    model: &ModelSpec,
    radii: &[f64],
    resolution: usize,
    tol: f64,
    opts: &ExpandingOptions,
) -> Result<MaxProblemReport> {
    let model = model.with_sense(Sense::Maximize);
    let report = crate::eigen::expanding::sweep(&model, radii, resolution, opts)?;
    let grid = report.grid;
    let sol = report.solution;

    let mut c_bar = f64::NEG_INFINITY;
    for i in (0..grid.len()).filter(|&i| grid.is_boundary_adjacent(i)) {
        let x = grid.coord(i);
        for a in 0..model.actions().len() {
            c_bar = c_bar.max(model.cost(&x, a)?);
        }
    }
    let rho = report.entries.last().expect("non-empty ladder").lambda;
    let margin = rho - c_bar;
    let hypothesis_ok = margin > tol;

    let radius = *radii.last().expect("non-empty ladder");
    let psi = &sol.eigenpair.psi;
    let (mut outer, mut inner) = (0.0f64, 0.0f64);
    for (i, &p) in psi.iter().enumerate() {
        let r = grid.sup_norm(i);
        if r >= 0.75 * radius {
            outer = outer.max(p);
        }
        if r <= 0.5 * radius {
            inner = inner.max(p);
        }
    }
    if hypothesis_ok && !(outer < inner) {
        return Err(Error::Invariant(format!("eigenfunction does not decay: outer max {outer} >= inner max {inner}")));
    }

    Ok(MaxProblemReport {
        entries: report.entries,
        c_bar,
        margin,
        hypothesis_ok,
        phi_outer_max: outer,
        phi_inner_max: inner,
        phi_star: sol.eigenpair.psi,
        policy: sol.policy,
        grid,
    })
}

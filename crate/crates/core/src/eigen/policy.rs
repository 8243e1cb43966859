//! Howard policy iteration for the controlled principal eigenvalue.
//!
//! Each sweep solves the fixed-policy eigenproblem for `A_v + c_v`, then
//! re-selects at every node the action optimizing
//! `I[ψ] + b·∇ψ + cψ`. For products of independently selectable Metzler rows
//! the Collatz–Wielandt inequalities make the eigenvalue sequence monotone and
//! the terminal policy globally optimal.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::{principal_eigenpair_with, EigenOptions, EigenPair, DEFAULT_POLICY_TOL};
use crate::discretize::{assemble_operator, hamiltonian, GridDomain, MarkovPolicy};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, Sense};

/// Relative width of the band within which Hamiltonian values count as tied.
const TIE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyOptions {
    pub eigen: EigenOptions,
    /// Required `|Δλ|` between the last two sweeps.
    pub tol: f64,
    pub max_policy_iter: usize,
}

impl Default for PolicyOptions {
    fn default() -> Self {
        Self { eigen: EigenOptions::default(), tol: DEFAULT_POLICY_TOL, max_policy_iter: 100 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HjbSolution {
    pub eigenpair: EigenPair,
    pub policy: MarkovPolicy,
    pub policy_iterations: usize,
    pub eigenvalue_history: Vec<f64>,
}

pub fn hjb_policy_iteration(model: &ModelSpec, grid: &GridDomain, tol: f64) -> Result<HjbSolution> {
    hjb_policy_iteration_with(model, grid, &PolicyOptions { tol, ..PolicyOptions::default() })
}

pub fn hjb_policy_iteration_with(model: &ModelSpec, grid: &GridDomain, opts: &PolicyOptions) -> Result<HjbSolution> {
    if model.dim() != grid.dim() {
        return Err(Error::config(format!("model dimension {} does not match grid dimension {}", model.dim(), grid.dim())));
    }
    let n_actions = model.actions().len();
    if model.sense() == Sense::Minimize {
        for i in 0..grid.len() {
            let x = grid.coord(i);
            for a in 0..n_actions {
                let c = model.cost(&x, a)?;
                if c < 0.0 {
                    return Err(Error::config(format!("running cost must be nonnegative for minimization, c = {c} at {x:?}")));
                }
            }
        }
    }

    let mut policy = MarkovPolicy::constant(grid, 0);
    let mut history: Vec<f64> = Vec::new();
    loop {
        let op = assemble_operator(model, grid, &policy, true)?;
        let pair = principal_eigenpair_with(&op, &opts.eigen)?;
        if let Some(&prev) = history.last() {
            let slack = 1e-8 * (1.0 + prev.abs());
            let worse = match model.sense() {
                Sense::Minimize => pair.lambda > prev + slack,
                Sense::Maximize => pair.lambda < prev - slack,
            };
            if worse {
                return Err(Error::Invariant(format!("policy iteration moved against the optimization sense: {prev} -> {}", pair.lambda)));
            }
        }
        history.push(pair.lambda);

        let improved = improve(model, grid, &policy, &pair.psi)?;
        let delta = match history.len() {
            1 => 0.0,
            k => (history[k - 1] - history[k - 2]).abs(),
        };
        if improved == policy && delta < opts.tol {
            return Ok(HjbSolution { eigenpair: pair, policy, policy_iterations: history.len(), eigenvalue_history: history });
        }
        if history.len() >= opts.max_policy_iter {
            let changed = improved.as_slice().iter().zip(policy.as_slice()).filter(|(a, b)| a != b).count();
            let tail: Vec<f64> = history.iter().rev().take(4).rev().copied().collect();
            return Err(Error::Cycling(format!(
                "{} sweeps without settling; {changed} nodes still switching; last eigenvalues {tail:?}",
                history.len()
            )));
        }
        policy = improved;
    }
}

/// Pointwise argopt of the Hamiltonian at `psi`, ties to the smallest action index.
fn improve(model: &ModelSpec, grid: &GridDomain, current: &MarkovPolicy, psi: &[f64]) -> Result<MarkovPolicy> {
    let n_actions = model.actions().len();
    if n_actions == 1 {
        return Ok(current.clone());
    }
    let sense = model.sense();
    let assignment = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let values = (0..n_actions).map(|a| hamiltonian(model, grid, i, a, psi)).collect::<Result<Vec<f64>>>()?;
            let best = match sense {
                Sense::Minimize => values.iter().copied().fold(f64::INFINITY, f64::min),
                Sense::Maximize => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            };
            let scale = values.iter().fold(psi[i], |m, v| m.max(v.abs()));
            let band = TIE_RTOL * scale;
            Ok(values.iter().position(|v| (v - best).abs() <= band).expect("best is attained"))
        })
        .collect::<Result<Vec<usize>>>()?;
    MarkovPolicy::new(assignment, grid, n_actions)
}

/// CSV with node coordinates, the chosen action index and its label.
pub fn policy_csv(model: &ModelSpec, grid: &GridDomain, policy: &MarkovPolicy) -> String {
    let d = grid.dim();
    let mut s = String::new();
    for k in 0..d {
        let _ = write!(s, "x{},", k + 1);
    }
    s.push_str("action_index,action_label\n");
    let mut x = vec![0.0; d];
    for i in 0..grid.len() {
        grid.coord_into(i, &mut x);
        for v in &x {
            let _ = write!(s, "{v},");
        }
        let a = policy.action(i);
        let label = model.actions().get(a).map(|a| a.label.as_str()).unwrap_or("");
        let _ = writeln!(s, "{a},{label}");
    }
    s
}

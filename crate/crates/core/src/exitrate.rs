//! Maximal exit rate `Θ_D = sup_Z limsup (1/T) log P(τ_D > T)` on a bounded box.
//!
//! `Θ_D` is the principal eigenvalue of the cost-free HJB operator. Working
//! with the positive eigenfunction `ψ = -ψ̃` turns the infimum over actions
//! into a supremum, so the problem is solved as a maximization with `c ≡ 0`.

use serde::Serialize;

use crate::discretize::{GridDomain, MarkovPolicy};
use crate::eigen::{hjb_policy_iteration_with, PolicyOptions};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, Sense};

#[derive(Debug, Clone, Serialize)]
pub struct ExitRateSolution {
    pub theta: f64,
    pub psi: Vec<f64>,
    pub policy: MarkovPolicy,
    pub residual: f64,
    pub policy_iterations: usize,
}

pub fn exit_rate_problem(model: &ModelSpec, grid: &GridDomain, tol: f64) -> Result<ExitRateSolution> {
    exit_rate_problem_with(model, grid, &PolicyOptions { tol, ..PolicyOptions::default() })
}

pub fn exit_rate_problem_with(model: &ModelSpec, grid: &GridDomain, opts: &PolicyOptions) -> Result<ExitRateSolution> {
    let confined = model.with_cost(|_, _| 0.0).with_sense(Sense::Maximize);
    let sol = hjb_policy_iteration_with(&confined, grid, opts)?;
    let theta = sol.eigenpair.lambda;
    if !(theta < 0.0) {
        return Err(Error::Invariant(format!("exit rate must be negative on a bounded domain, got {theta}")));
    }
    Ok(ExitRateSolution {
        theta,
        psi: sol.eigenpair.psi,
        policy: sol.policy,
        residual: sol.eigenpair.residual,
        policy_iterations: sol.policy_iterations,
    })
}

//! Principal (Perron) eigenpairs of Metzler operators, Howard policy
//! iteration for the controlled eigenvalue problem, and the expanding-domain
//! driver.
//!
//! The principal eigenvalue of a Metzler matrix `M` is its spectral abscissa.
//! With `s = 1 + max_i |M_ii|` the matrix `N = M + sI` is nonnegative with a
//! positive diagonal, hence primitive whenever `M` is irreducible, and power
//! iteration on `N` converges to the Perron vector. Convergence of plain power
//! iteration degrades like `1 - gap/s`, which is slow on fine meshes, so by
//! default the iterate is refined by shifted inverse iteration with the
//! Collatz–Wielandt upper bound `max_i (Mψ)_i / ψ_i` as the shift (Noda's
//! scheme). That bound always dominates the principal eigenvalue, so every
//! solve is with a nonsingular M-matrix and the iterate stays positive.

mod banded;
pub(crate) mod expanding;
mod policy;

use std::fmt::Write as _;

use serde::Serialize;

use crate::discretize::{GridDomain, SparseOperator};
use crate::error::{Error, Result};
use banded::BandedLu;

pub use expanding::{
    expanding_domain_limit, expanding_domain_limit_with, ExpandingDomainReport, ExpandingEntry, ExpandingOptions, Stability,
};
pub use policy::{hjb_policy_iteration, hjb_policy_iteration_with, policy_csv, HjbSolution, PolicyOptions};

pub const DEFAULT_EIGEN_TOL: f64 = 1e-10;
pub const DEFAULT_POLICY_TOL: f64 = 1e-9;
pub const DEFAULT_EXPANDING_TOL: f64 = 1e-3;

/// Power-iteration sweeps before switching to inverse iteration.
const WARMUP_SWEEPS: usize = 8;
/// Extra refinement steps allowed once the residual target is met.
const POLISH_STEPS: usize = 3;

#[derive(Debug, Clone, Serialize)]
pub struct EigenPair {
    pub lambda: f64,
    /// Strictly positive, equal to one at the anchor node.
    pub psi: Vec<f64>,
    /// `‖Mψ - λψ‖_∞ / ‖ψ‖_∞`.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Convergence is declared once `residual ≤ tol · max(1, ‖M‖_∞)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Refine with shifted inverse iteration; `false` runs power iteration only.
    pub refine: bool,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_EIGEN_TOL, max_iter: 10_000, refine: true }
    }
}

pub fn principal_eigenpair(op: &SparseOperator, tol: f64, max_iter: usize) -> Result<EigenPair> {
    principal_eigenpair_with(op, &EigenOptions { tol, max_iter, refine: true })
}

pub fn principal_eigenpair_with(op: &SparseOperator, opts: &EigenOptions) -> Result<EigenPair> {
    let n = op.n();
    if n == 0 {
        return Err(Error::config("operator has no unknowns"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::config("eigen tolerance must be positive"));
    }
    if !op.is_irreducible() {
        return Err(Error::config("operator is reducible: the grid stencil does not connect all interior nodes"));
    }
    let target = opts.tol * op.inf_norm().max(1.0);
    let shift = 1.0 + op.max_abs_diagonal();

    let mut psi = vec![1.0; n];
    let mut work = vec![0.0; n];
    let mut iterations = 0;
    let mut last_residual = f64::INFINITY;

    let sweeps = if opts.refine { WARMUP_SWEEPS.min(opts.max_iter) } else { opts.max_iter };
    while iterations < sweeps {
        iterations += 1;
        op.mul_vec(&psi, &mut work);
        let est = estimate(&psi, &work);
        last_residual = est.residual;
        if est.residual <= target {
            if opts.refine {
                break;
            }
            return finish(op, psi, iterations, target);
        }
        for (p, w) in psi.iter_mut().zip(&work) {
            *p = w + shift * *p;
        }
        normalize_max(&mut psi);
    }

    if opts.refine {
        let scale = op.inf_norm().max(1.0);
        let mut margin = 64.0 * f64::EPSILON * scale;
        // best iterate that met the target; refinement continues while it halves the residual
        let mut converged: Option<(Vec<f64>, f64)> = None;
        let mut polish = 0;
        while iterations < opts.max_iter {
            iterations += 1;
            op.mul_vec(&psi, &mut work);
            let est = estimate(&psi, &work);
            last_residual = est.residual;
            if let Some((best, best_residual)) = &converged {
                polish += 1;
                if est.residual >= 0.5 * best_residual || polish >= POLISH_STEPS {
                    let psi = if est.residual < *best_residual { psi } else { best.clone() };
                    return finish(op, psi, iterations, target);
                }
            }
            if est.residual <= target {
                converged = Some((psi.clone(), est.residual));
            }
            loop {
                let sigma = est.upper + margin;
                if let Some(lu) = BandedLu::factor_shifted(op, sigma) {
                    work.copy_from_slice(&psi);
                    lu.solve(&mut work);
                    if work.iter().all(|v| *v > 0.0 && v.is_finite()) {
                        psi.copy_from_slice(&work);
                        normalize_max(&mut psi);
                        break;
                    }
                }
                margin *= 16.0;
                if margin > scale {
                    if let Some((best, _)) = converged {
                        return finish(op, best, iterations, target);
                    }
                    return Err(Error::Internal("inverse iteration could not find a nonsingular shift".into()));
                }
            }
        }
        if let Some((best, _)) = converged {
            return finish(op, best, iterations, target);
        }
    }
    Err(Error::IterationLimit { iterations, residual: last_residual })
}

struct Estimate {
    upper: f64,
    residual: f64,
}

/// Collatz–Wielandt upper bound and the relative residual at the Rayleigh quotient.
fn estimate(psi: &[f64], m_psi: &[f64]) -> Estimate {
    let mut upper = f64::NEG_INFINITY;
    let (mut num, mut den) = (0.0, 0.0);
    for (p, m) in psi.iter().zip(m_psi) {
        upper = upper.max(m / p);
        num += p * m;
        den += p * p;
    }
    let lambda = num / den;
    let norm = psi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let residual = psi.iter().zip(m_psi).map(|(p, m)| (m - lambda * p).abs()).fold(0.0, f64::max) / norm;
    Estimate { upper, residual }
}

fn normalize_max(v: &mut [f64]) {
    let m = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    for x in v.iter_mut() {
        *x /= m;
    }
}

fn finish(op: &SparseOperator, mut psi: Vec<f64>, iterations: usize, target: f64) -> Result<EigenPair> {
    let anchor = op.meta().anchor.min(psi.len() - 1);
    let a = psi[anchor];
    for p in psi.iter_mut() {
        *p /= a;
    }
    let mut work = vec![0.0; psi.len()];
    op.mul_vec(&psi, &mut work);
    let (num, den) = psi.iter().zip(&work).fold((0.0, 0.0), |(n, d), (p, m)| (n + p * m, d + p * p));
    let lambda = num / den;
    let norm = psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let residual = psi.iter().zip(&work).map(|(p, m)| (m - lambda * p).abs()).fold(0.0, f64::max) / norm;
    let min = psi.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) || !norm.is_finite() {
        return Err(Error::Invariant(format!("principal eigenvector not strictly positive (min {min})")));
    }
    if residual > target {
        return Err(Error::IterationLimit { iterations, residual });
    }
    Ok(EigenPair { lambda, psi, residual, iterations })
}

/// CSV with node coordinates and eigenvector values.
pub fn eigenvector_csv(grid: &GridDomain, psi: &[f64]) -> String {
    let d = grid.dim();
    let mut s = String::new();
    for k in 0..d {
        let _ = write!(s, "x{},", k + 1);
    }
    s.push_str("psi\n");
    let mut x = vec![0.0; d];
    for (i, p) in psi.iter().enumerate() {
        grid.coord_into(i, &mut x);
        for v in &x {
            let _ = write!(s, "{v},");
        }
        let _ = writeln!(s, "{p}");
    }
    s
}

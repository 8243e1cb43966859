//! Monotone finite-difference discretization of the controlled generator on a
//! truncated box with zero exterior data.
//!
//! Per interior node: central second differences for the diagonal diffusion,
//! first-order upwind differences for the compensated drift, and the jump
//! integral evaluated by multilinear interpolation of each atom's destination.
//! Every exterior value is zero, so exterior columns are dropped while the full
//! `-ν̄` jump diagonal is kept. The result is a Metzler matrix.

mod grid;
mod operator;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ModelSpec;

pub use grid::{GridDomain, MarkovPolicy};
pub use operator::{OperatorMeta, SparseOperator};

/// Interpolation fractions closer than this to a node are snapped onto it.
const SNAP: f64 = 1e-12;

/// Which terms of the row to assemble.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RowTerms {
    pub diffusion: bool,
    pub cost: bool,
}

/// Jump contribution of one node under one action: off-grid interpolation
/// weights `(column, weight)` (possibly including the node itself) and the
/// diagonal correction `-ν̄`.
pub fn jump_row_weights(model: &ModelSpec, grid: &GridDomain, node: usize, action: usize) -> Result<(Vec<(usize, f64)>, f64)> {
    check_compat(model, grid)?;
    model.check_action(action)?;
    if node >= grid.len() {
        return Err(Error::config(format!("node {node} is not interior")));
    }
    let mut out = Vec::new();
    let x = grid.coord(node);
    let mut scratch = Scratch::new(grid.dim());
    push_jump_weights(model, grid, &x, action, &mut out, &mut scratch)?;
    Ok((out, -model.kernel().total_mass()))
}

struct Scratch {
    g: Vec<f64>,
    y: Vec<f64>,
    base: Vec<usize>,
    frac: Vec<f64>,
    multi: Vec<usize>,
    b: Vec<f64>,
    a: Vec<f64>,
}

impl Scratch {
    fn new(d: usize) -> Self {
        Self { g: vec![0.0; d], y: vec![0.0; d], base: vec![0; d], frac: vec![0.0; d], multi: vec![0; d], b: vec![0.0; d], a: vec![0.0; d] }
    }
}

fn push_jump_weights(
    model: &ModelSpec,
    grid: &GridDomain,
    x: &[f64],
    action: usize,
    out: &mut Vec<(usize, f64)>,
    s: &mut Scratch,
) -> Result<()> {
    let d = grid.dim();
    let lo = grid.lower();
    let h = grid.spacing();
    for (j, atom) in model.kernel().atoms().iter().enumerate() {
        if atom.weight == 0.0 {
            continue;
        }
        model.jump(x, action, j, &mut s.g)?;
        for k in 0..d {
            s.y[k] = x[k] + s.g[k];
        }
        if !s.y.iter().all(|v| v.is_finite()) {
            return Err(Error::Evaluation { component: "jump destination", point: x.to_vec() });
        }
        if !grid.contains(&s.y) {
            continue;
        }
        for k in 0..d {
            let t = (s.y[k] - lo[k]) / h[k];
            let mut base = t.floor();
            let mut frac = t - base;
            if frac < SNAP {
                frac = 0.0;
            } else if frac > 1.0 - SNAP {
                base += 1.0;
                frac = 0.0;
            }
            s.base[k] = base as usize;
            s.frac[k] = frac;
        }
        // 2^d corners of the enclosing cell
        for corner in 0..(1usize << d) {
            let mut weight = atom.weight;
            for k in 0..d {
                let upper = (corner >> k) & 1 == 1;
                s.multi[k] = s.base[k] + usize::from(upper);
                weight *= if upper { s.frac[k] } else { 1.0 - s.frac[k] };
            }
            if weight == 0.0 {
                continue;
            }
            if let Some(col) = grid.linear_index(&s.multi) {
                out.push((col, weight));
            }
        }
    }
    Ok(())
}

fn check_compat(model: &ModelSpec, grid: &GridDomain) -> Result<()> {
    if model.dim() != grid.dim() {
        return Err(Error::config(format!("model dimension {} does not match grid dimension {}", model.dim(), grid.dim())));
    }
    Ok(())
}

fn assemble_row(
    model: &ModelSpec,
    grid: &GridDomain,
    node: usize,
    action: usize,
    terms: RowTerms,
    s: &mut Scratch,
) -> Result<Vec<(usize, f64)>> {
    let d = grid.dim();
    let h = grid.spacing();
    let x = grid.coord(node);
    let mut row = Vec::with_capacity(2 * d + 1 + (model.kernel().atoms().len() << d));
    let mut diag = 0.0;
    grid.multi_index(node, &mut s.multi);
    let neighbour = |s: &mut Scratch, k: usize, up: bool| -> Option<usize> {
        let orig = s.multi[k];
        s.multi[k] = if up { orig + 1 } else { orig - 1 };
        let idx = grid.linear_index(&s.multi);
        s.multi[k] = orig;
        idx
    };

    if terms.diffusion {
        model.diffusion(&x, &mut s.a)?;
        for k in 0..d {
            let coef = s.a[k] / (h[k] * h[k]);
            diag -= 2.0 * coef;
            for up in [false, true] {
                if let Some(c) = neighbour(s, k, up) {
                    row.push((c, coef));
                }
            }
        }
    }

    let (b, g) = (&mut s.b, &mut s.g);
    model.effective_drift_into(&x, action, b, g)?;
    for k in 0..d {
        let bk = s.b[k];
        if bk == 0.0 {
            continue;
        }
        let coef = bk.abs() / h[k];
        diag -= coef;
        if let Some(c) = neighbour(s, k, bk > 0.0) {
            row.push((c, coef));
        }
    }

    push_jump_weights(model, grid, &x, action, &mut row, s)?;
    diag -= model.kernel().total_mass();

    if terms.cost {
        diag += model.cost(&x, action)?;
    }
    row.push((node, diag));
    Ok(row)
}

/// Discrete `A_v` (or `A_v + c_v` when `include_cost`) for a fixed policy.
pub fn assemble_operator(model: &ModelSpec, grid: &GridDomain, policy: &MarkovPolicy, include_cost: bool) -> Result<SparseOperator> {
    check_compat(model, grid)?;
    if policy.len() != grid.len() {
        return Err(Error::config(format!("policy covers {} nodes, grid has {}", policy.len(), grid.len())));
    }
    if let Some(&a) = policy.as_slice().iter().find(|&&a| a >= model.actions().len()) {
        model.check_action(a)?;
    }
    let terms = RowTerms { diffusion: true, cost: include_cost };
    let rows = (0..grid.len())
        .into_par_iter()
        .map_init(|| Scratch::new(grid.dim()), |s, i| assemble_row(model, grid, i, policy.action(i), terms, s))
        .collect::<Result<Vec<_>>>()?;
    let meta = OperatorMeta { grid_id: grid.id(), anchor: grid.anchor(), policy_id: policy.id(), model: model.name().to_string() };
    SparseOperator::from_rows(rows, include_cost, meta)
}

/// Action-dependent part of the HJB row applied to `psi`:
/// `I[ψ] + b·∇ψ (upwind) + c ψ` at `node`. Zero exterior values are implied.
pub(crate) fn hamiltonian(model: &ModelSpec, grid: &GridDomain, node: usize, action: usize, psi: &[f64]) -> Result<f64> {
    let mut s = Scratch::new(grid.dim());
    let row = assemble_row(model, grid, node, action, RowTerms { diffusion: false, cost: true }, &mut s)?;
    Ok(row.iter().map(|&(c, v)| v * psi[c]).sum())
}

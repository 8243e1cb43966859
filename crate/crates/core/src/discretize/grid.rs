use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform tensor grid on an open box. Only interior nodes carry unknowns;
/// node `(i_0, .., i_{d-1})` with `1 ≤ i_k ≤ n_k` sits at `lo_k + i_k h_k`.
/// Linear indices run with axis 0 fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
    spacing: Vec<f64>,
    interior: Vec<usize>,
    anchor: usize,
}

impl GridDomain {
    /// Box `bounds` split into `cells[k]` uniform cells along axis `k`.
    pub fn new(bounds: &[(f64, f64)], cells: &[usize]) -> Result<Self> {
        if bounds.is_empty() || bounds.len() != cells.len() {
            return Err(Error::config("grid bounds and cell counts must be non-empty and of equal length"));
        }
        let mut lo = Vec::with_capacity(bounds.len());
        let mut hi = Vec::with_capacity(bounds.len());
        let mut spacing = Vec::with_capacity(bounds.len());
        let mut interior = Vec::with_capacity(bounds.len());
        for (k, (&(l, h), &c)) in bounds.iter().zip(cells).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::config(format!("axis {k}: invalid bounds [{l}, {h}]")));
            }
            if c < 4 {
                return Err(Error::config(format!("axis {k}: need at least 3 interior nodes, got {}", c.saturating_sub(1))));
            }
            lo.push(l);
            hi.push(h);
            spacing.push((h - l) / c as f64);
            interior.push(c - 1);
        }
        let mut grid = Self { lo, hi, spacing, interior, anchor: 0 };
        grid.anchor = grid.nearest_to_origin();
        Ok(grid)
    }

    /// Box with a prescribed spacing; the spacing must divide every axis length.
    pub fn with_spacing(bounds: &[(f64, f64)], spacing: &[f64]) -> Result<Self> {
        if bounds.len() != spacing.len() {
            return Err(Error::config("grid bounds and spacing must have equal length"));
        }
        let mut cells = Vec::with_capacity(bounds.len());
        for (k, (&(l, h), &dx)) in bounds.iter().zip(spacing).enumerate() {
            if !(dx.is_finite() && dx > 0.0) {
                return Err(Error::config(format!("axis {k}: spacing must be positive")));
            }
            let ratio = (h - l) / dx;
            let rounded = ratio.round();
            if (ratio - rounded).abs() > 1e-9 * ratio.max(1.0) {
                return Err(Error::config(format!("axis {k}: spacing {dx} does not divide [{l}, {h}] (non-uniform mesh)")));
            }
            cells.push(rounded as usize);
        }
        Self::new(bounds, &cells)
    }

    /// `[-radius, radius]^dim` with `resolution` cells per unit length.
    pub fn centered_box(radius: f64, dim: usize, resolution: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) || resolution == 0 {
            return Err(Error::config(format!("invalid box radius {radius} / resolution {resolution}")));
        }
        let cells = 2.0 * radius * resolution as f64;
        if (cells - cells.round()).abs() > 1e-9 * cells {
            return Err(Error::config(format!("radius {radius} is not a multiple of the spacing 1/{resolution}")));
        }
        Self::new(&vec![(-radius, radius); dim], &vec![cells.round() as usize; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.interior.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn lower(&self) -> &[f64] {
        &self.lo
    }

    pub fn upper(&self) -> &[f64] {
        &self.hi
    }

    pub fn interior_counts(&self) -> &[usize] {
        &self.interior
    }

    /// Interior node closest to the origin (smallest index on ties).
    pub fn anchor(&self) -> usize {
        self.anchor
    }

    /// One-based multi-index of an interior node.
    pub fn multi_index(&self, index: usize, out: &mut [usize]) {
        let mut rest = index;
        for (k, o) in out.iter_mut().enumerate() {
            *o = rest % self.interior[k] + 1;
            rest /= self.interior[k];
        }
    }

    /// Linear index of a one-based multi-index, `None` for boundary or exterior nodes.
    pub fn linear_index(&self, multi: &[usize]) -> Option<usize> {
        let mut index = 0;
        let mut stride = 1;
        for (k, &i) in multi.iter().enumerate() {
            if i == 0 || i > self.interior[k] {
                return None;
            }
            index += (i - 1) * stride;
            stride *= self.interior[k];
        }
        Some(index)
    }

    pub fn coord_into(&self, index: usize, out: &mut [f64]) {
        let mut rest = index;
        for (k, o) in out.iter_mut().enumerate() {
            let i = rest % self.interior[k] + 1;
            rest /= self.interior[k];
            *o = self.lo[k] + i as f64 * self.spacing[k];
        }
    }

    pub fn coord(&self, index: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.coord_into(index, &mut x);
        x
    }

    /// Strictly inside the open box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(k, &v)| v > self.lo[k] && v < self.hi[k])
    }

    /// Nearest interior node; points outside the box are clamped first.
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let mut index = 0;
        let mut stride = 1;
        for k in 0..self.dim() {
            let s = ((x[k] - self.lo[k]) / self.spacing[k]).round();
            let i = if s.is_nan() { 1.0 } else { s.clamp(1.0, self.interior[k] as f64) } as usize;
            index += (i - 1) * stride;
            stride *= self.interior[k];
        }
        index
    }

    /// True when some axis neighbour of the node lies on the boundary.
    pub fn is_boundary_adjacent(&self, index: usize) -> bool {
        let mut rest = index;
        for k in 0..self.dim() {
            let i = rest % self.interior[k] + 1;
            rest /= self.interior[k];
            if i == 1 || i == self.interior[k] {
                return true;
            }
        }
        false
    }

    /// `max_k |x_k|` of the node.
    pub fn sup_norm(&self, index: usize) -> f64 {
        self.coord(index).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Stable identifier of the geometry.
    pub fn id(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for k in 0..self.dim() {
            self.lo[k].to_bits().hash(&mut h);
            self.hi[k].to_bits().hash(&mut h);
            self.interior[k].hash(&mut h);
        }
        h.finish()
    }

    fn nearest_to_origin(&self) -> usize {
        let mut best = (f64::INFINITY, 0);
        let mut x = vec![0.0; self.dim()];
        for i in 0..self.len() {
            self.coord_into(i, &mut x);
            let r2: f64 = x.iter().map(|v| v * v).sum();
            if r2 < best.0 {
                best = (r2, i);
            }
        }
        best.1
    }
}

/// Stationary Markov policy: one action index per interior node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct MarkovPolicy {
    assignment: Vec<usize>,
}

impl MarkovPolicy {
    pub fn new(assignment: Vec<usize>, grid: &GridDomain, n_actions: usize) -> Result<Self> {
        if assignment.len() != grid.len() {
            return Err(Error::config(format!("policy covers {} nodes, grid has {}", assignment.len(), grid.len())));
        }
        if let Some(&a) = assignment.iter().find(|&&a| a >= n_actions) {
            return Err(Error::config(format!("policy uses action {a}, only {n_actions} available")));
        }
        Ok(Self { assignment })
    }

    pub fn constant(grid: &GridDomain, action: usize) -> Self {
        Self { assignment: vec![action; grid.len()] }
    }

    pub fn action(&self, node: usize) -> usize {
        self.assignment[node]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn id(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.hash(&mut h);
        h.finish()
    }
}

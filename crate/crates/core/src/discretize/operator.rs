use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

/// Provenance of an assembled operator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OperatorMeta {
    pub grid_id: u64,
    /// Node used to normalize eigenvectors.
    pub anchor: usize,
    pub policy_id: u64,
    pub model: String,
}

/// Square CSR matrix over the interior nodes. Off-diagonal entries are
/// nonnegative (Metzler); columns within a row are sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
    includes_cost: bool,
    meta: OperatorMeta,
}

impl SparseOperator {
    /// Builds from per-row `(column, value)` lists. Duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, includes_cost: bool, meta: OperatorMeta) -> Result<Self> {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(c, _)| c);
            let start = cols.len();
            for (c, v) in row {
                if c >= n {
                    return Err(Error::Internal(format!("row {i} references column {c} outside {n} nodes")));
                }
                if cols.len() > start && cols[cols.len() - 1] == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    values.push(v);
                }
            }
            if !cols[start..].contains(&i) {
                // keep an explicit diagonal so shifts and factorizations can rely on it
                let pos = start + cols[start..].partition_point(|&c| c < i);
                cols.insert(pos, i);
                values.insert(pos, 0.0);
            }
            row_ptr.push(cols.len());
        }
        let op = Self { n, row_ptr, cols, values, includes_cost, meta };
        op.assert_metzler()?;
        Ok(op)
    }

    /// Dense row-major input, mainly for tests.
    pub fn from_dense(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::config("dense matrix has wrong size"));
        }
        let rows =
            (0..n).map(|i| (0..n).filter(|&j| entries[i * n + j] != 0.0 || i == j).map(|j| (j, entries[i * n + j])).collect()).collect();
        Self::from_rows(rows, false, OperatorMeta { grid_id: 0, anchor: 0, policy_id: 0, model: "dense".into() })
    }

    fn assert_metzler(&self) -> Result<()> {
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if !v.is_finite() {
                    return Err(Error::Internal(format!("non-finite entry at ({i}, {c})")));
                }
                if c != i && v < 0.0 {
                    return Err(Error::Internal(format!("Metzler property violated: entry ({i}, {c}) = {v}")));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn includes_cost(&self) -> bool {
        self.includes_cost
    }

    pub fn meta(&self) -> &OperatorMeta {
        &self.meta
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|p| vals[p]).unwrap_or(0.0)
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.get(i, i)
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).1.iter().sum()
    }

    /// `‖M‖_∞`.
    pub fn inf_norm(&self) -> f64 {
        (0..self.n).map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.n).map(|i| self.diagonal(i).abs()).fold(0.0, f64::max)
    }

    /// Smallest off-diagonal entry (`+∞` for a diagonal matrix).
    pub fn min_off_diagonal(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if c != i {
                    m = m.min(v);
                }
            }
        }
        m
    }

    /// `M + shift · I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            let (cols, _) = self.row(i);
            let p = self.row_ptr[i] + cols.binary_search(&i).expect("diagonal stored");
            out.values[p] += shift;
        }
        out
    }

    /// Half-bandwidths `(below, above)` of the sparsity pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut lower, mut upper) = (0, 0);
        for i in 0..self.n {
            let (cols, _) = self.row(i);
            if let (Some(&first), Some(&last)) = (cols.first(), cols.last()) {
                lower = lower.max(i.saturating_sub(first));
                upper = upper.max(last.saturating_sub(i));
            }
        }
        (lower, upper)
    }

    /// Whether every node reaches every other node along nonzero off-diagonal entries.
    pub fn is_irreducible(&self) -> bool {
        if self.n <= 1 {
            return true;
        }
        let mut transpose: Vec<Vec<usize>> = vec![Vec::new(); self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if c != i && v > 0.0 {
                    transpose[c].push(i);
                }
            }
        }
        let forward = |start: usize| -> usize {
            let mut seen = vec![false; self.n];
            let mut stack = vec![start];
            seen[start] = true;
            let mut count = 1;
            while let Some(i) = stack.pop() {
                let (cols, vals) = self.row(i);
                for (&c, &v) in cols.iter().zip(vals) {
                    if c != i && v > 0.0 && !seen[c] {
                        seen[c] = true;
                        count += 1;
                        stack.push(c);
                    }
                }
            }
            count
        };
        let backward = |start: usize| -> usize {
            let mut seen = vec![false; self.n];
            let mut stack = vec![start];
            seen[start] = true;
            let mut count = 1;
            while let Some(i) = stack.pop() {
                for &c in &transpose[i] {
                    if !seen[c] {
                        seen[c] = true;
                        count += 1;
                        stack.push(c);
                    }
                }
            }
            count
        };
        forward(0) == self.n && backward(0) == self.n
    }

    /// Coordinate list, one `row col value` triple per line, sorted row-major.
    pub fn to_coo_string(&self) -> String {
        let mut s = String::with_capacity(self.nnz() * 32);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let _ = writeln!(s, "{i} {c} {v:.17e}");
            }
        }
        s
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                d[i * self.n + c] = v;
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_off_diagonal() {
        assert!(matches!(SparseOperator::from_dense(2, &[-1.0, -0.5, 1.0, -1.0]), Err(Error::Internal(_))));
    }

    #[test]
    fn coo_is_row_major_and_diagonal_explicit() {
        let op = SparseOperator::from_dense(3, &[0.0, 1.0, 0.0, 2.0, -1.0, 3.0, 0.0, 4.0, 0.0]).unwrap();
        let coo = op.to_coo_string();
        let lines: Vec<&str> = coo.lines().collect();
        assert_eq!(lines.len(), 7);
        assert!(lines[0].starts_with("0 0 "));
        assert!(lines[6].starts_with("2 2 "));
        assert!(op.is_irreducible());
        assert_eq!(op.bandwidths(), (1, 1));
    }

    #[test]
    fn reducible_detected() {
        let op = SparseOperator::from_dense(2, &[-1.0, 1.0, 0.0, -1.0]).unwrap();
        assert!(!op.is_irreducible());
    }
}

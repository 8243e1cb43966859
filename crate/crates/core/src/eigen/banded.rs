//! LU factorization without pivoting for banded matrices of the form
//! `σI - M`, `M` Metzler. For `σ` above the spectral abscissa of `M` this is a
//! nonsingular M-matrix, for which elimination without pivoting is stable and
//! every pivot is positive.

use crate::discretize::SparseOperator;

pub(crate) struct BandedLu {
    n: usize,
    lower: usize,
    upper: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedLu {
    /// Factors `shift·I - op`. Returns `None` when a pivot is not strictly positive.
    pub fn factor_shifted(op: &SparseOperator, shift: f64) -> Option<Self> {
        let n = op.n();
        let (lower, upper) = op.bandwidths();
        let width = lower + upper + 1;
        let mut data = vec![0.0; n * width];
        for i in 0..n {
            let (cols, vals) = op.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                data[i * width + c + lower - i] = -v;
            }
            data[i * width + lower] += shift;
        }
        let mut lu = Self { n, lower, upper, width, data };
        lu.eliminate().then_some(lu)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width + j + self.lower - i
    }

    fn eliminate(&mut self) -> bool {
        let n = self.n;
        for k in 0..n {
            let pivot = self.data[self.at(k, k)];
            if !(pivot > 0.0 && pivot.is_finite()) {
                return false;
            }
            let last_row = (k + self.lower).min(n - 1);
            let last_col = (k + self.upper).min(n - 1);
            for i in k + 1..=last_row {
                let ik = self.at(i, k);
                if self.data[ik] == 0.0 {
                    continue;
                }
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                for j in k + 1..=last_col {
                    let kj = self.data[self.at(k, j)];
                    let ij = self.at(i, j);
                    self.data[ij] -= l * kj;
                }
            }
        }
        true
    }

    pub fn solve(&self, rhs: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let first = i.saturating_sub(self.lower);
            let mut acc = rhs[i];
            for j in first..i {
                acc -= self.data[self.at(i, j)] * rhs[j];
            }
            rhs[i] = acc;
        }
        for i in (0..n).rev() {
            let last = (i + self.upper).min(n - 1);
            let mut acc = rhs[i];
            for j in i + 1..=last {
                acc -= self.data[self.at(i, j)] * rhs[j];
            }
            rhs[i] = acc / self.data[self.at(i, i)];
        }
    }
}

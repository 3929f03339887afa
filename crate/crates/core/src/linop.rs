//! Minimal linear-operator abstraction over the residual matrix.
//!
//! The power method only needs matrix-vector products, so residuals can stay
//! in coordinate form for partially observed problems instead of being
//! materialized densely.

use nalgebra::{DMatrix, DVector};

/// Read-only view of a real matrix through its action on vectors.
pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;

    /// `A x`
    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;

    /// `A^T x`
    fn apply_transpose(&self, x: &DVector<f64>) -> DVector<f64>;

    fn frobenius_norm(&self) -> f64;

    /// The row with the largest Euclidean norm, as a dense vector.
    fn best_row(&self) -> DVector<f64>;

    /// `u^T A v`
    fn bilinear(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(&self.apply(v))
    }

    /// Worst absolute entry difference between `A` and `A^T` (square only).
    fn symmetry_defect(&self) -> f64;
}

impl LinearOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self * x
    }

    fn apply_transpose(&self, x: &DVector<f64>) -> DVector<f64> {
        self.transpose() * x
    }

    fn frobenius_norm(&self) -> f64 {
        self.norm()
    }

    fn best_row(&self) -> DVector<f64> {
        let mut best = 0;
        let mut best_norm = -1.0;
        for i in 0..self.nrows() {
            let norm = self.row(i).norm();
            if norm > best_norm {
                best_norm = norm;
                best = i;
            }
        }
        self.row(best).transpose()
    }

    fn symmetry_defect(&self) -> f64 {
        if self.nrows() != self.ncols() {
            return f64::INFINITY;
        }
        let mut defect = 0.0_f64;
        for i in 0..self.nrows() {
            for j in (i + 1)..self.ncols() {
                defect = defect.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        defect
    }
}

/// Sparse matrix in coordinate form. Entries are unique and sorted by
/// `(row, col)`; absent coordinates are zero.
#[derive(Debug, Clone)]
pub struct CooMatrix {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl CooMatrix {
    /// `entries` must be unique per coordinate; they are sorted on entry.
    pub fn new(nrows: usize, ncols: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        Self {
            nrows,
            ncols,
            entries,
        }
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for &(r, c, v) in &self.entries {
            out[(r, c)] = v;
        }
        out
    }
}

impl LinearOperator for CooMatrix {
    fn nrows(&self) -> usize {
        self.nrows
    }

    fn ncols(&self) -> usize {
        self.ncols
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.nrows);
        for &(r, c, v) in &self.entries {
            out[r] += v * x[c];
        }
        out
    }

    fn apply_transpose(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.ncols);
        for &(r, c, v) in &self.entries {
            out[c] += v * x[r];
        }
        out
    }

    fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, _, v)| v * v)
            .sum::<f64>()
            .sqrt()
    }

    fn best_row(&self) -> DVector<f64> {
        let mut norms = vec![0.0_f64; self.nrows];
        for &(r, _, v) in &self.entries {
            norms[r] += v * v;
        }
        let mut best = 0;
        for i in 1..self.nrows {
            if norms[i] > norms[best] {
                best = i;
            }
        }
        let mut row = DVector::zeros(self.ncols);
        for &(r, c, v) in &self.entries {
            if r == best {
                row[c] = v;
            }
        }
        row
    }

    fn bilinear(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.entries
            .iter()
            .map(|&(r, c, val)| val * u[r] * v[c])
            .sum()
    }

    fn symmetry_defect(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        // Entries are sorted, so look up the mirror coordinate by search.
        let mut defect = 0.0_f64;
        for &(r, c, v) in &self.entries {
            if r >= c {
                continue;
            }
            let mirror = self
                .entries
                .binary_search_by_key(&(c, r), |&(er, ec, _)| (er, ec))
                .map(|idx| self.entries[idx].2)
                .unwrap_or(0.0);
            defect = defect.max((v - mirror).abs());
        }
        defect
    }
}

/// Symmetric part `(A + A^T) / 2` of a square operator, applied lazily.
pub struct Symmetrized<'a, O: LinearOperator>(pub &'a O);

impl<O: LinearOperator> LinearOperator for Symmetrized<'_, O> {
    fn nrows(&self) -> usize {
        self.0.nrows()
    }

    fn ncols(&self) -> usize {
        self.0.ncols()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.0.apply(x) + self.0.apply_transpose(x)) * 0.5
    }

    fn apply_transpose(&self, x: &DVector<f64>) -> DVector<f64> {
        self.apply(x)
    }

    // Upper bound surrogate: the true norm of the symmetric part is not
    // cheaply available through the operator view, and callers only use this
    // for convexity shifts and zero detection, where an upper bound of the
    // same scale is adequate.
    fn frobenius_norm(&self) -> f64 {
        self.0.frobenius_norm()
    }

    fn best_row(&self) -> DVector<f64> {
        // The best row of A stands in for the best row of its symmetric part;
        // this only seeds the deterministic restart.
        self.0.best_row()
    }

    fn bilinear(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        0.5 * (self.0.bilinear(u, v) + self.0.bilinear(v, u))
    }

    fn symmetry_defect(&self) -> f64 {
        0.0
    }
}

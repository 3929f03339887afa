//! Least-squares objectives over fully or partially observed matrices.
//!
//! Costs use the half-squared convention `cost = 0.5 * ||Y - X||^2` (over
//! observed entries when a mask is present), so the residual equals the
//! negative gradient with no stray factor of two.

use nalgebra::DMatrix;

use crate::atomset::VectorAtom;
use crate::error::{Error, Result};
use crate::linop::CooMatrix;

/// One rank-one term `u (x) v` of a factor model.
#[derive(Debug, Clone)]
pub struct RankOneTerm {
    pub u: VectorAtom,
    pub v: VectorAtom,
}

impl RankOneTerm {
    pub fn new(u: VectorAtom, v: VectorAtom) -> Self {
        Self { u, v }
    }

    /// `u[r] * v[c]`
    #[inline]
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.u.values()[row] * self.v.values()[col]
    }
}

/// Ordered rank-one terms plus their weights: `X = sum_i alpha_i u_i (x) v_i`.
#[derive(Debug, Clone)]
pub struct FactorModel {
    terms: Vec<RankOneTerm>,
    weights: Vec<f64>,
    shape: (usize, usize),
}

impl FactorModel {
    /// The empty model `X = 0`.
    pub fn empty(shape: (usize, usize)) -> Self {
        Self {
            terms: Vec::new(),
            weights: Vec::new(),
            shape,
        }
    }

    pub fn from_parts(
        terms: Vec<RankOneTerm>,
        weights: Vec<f64>,
        shape: (usize, usize),
    ) -> Result<Self> {
        if terms.len() != weights.len() {
            return Err(Error::InvalidProblem(format!(
                "{} terms vs {} weights",
                terms.len(),
                weights.len()
            )));
        }
        for term in &terms {
            if term.u.values().len() != shape.0 || term.v.values().len() != shape.1 {
                return Err(Error::ShapeMismatch {
                    expected: shape,
                    found: (term.u.values().len(), term.v.values().len()),
                });
            }
        }
        Ok(Self {
            terms,
            weights,
            shape,
        })
    }

    pub fn push_term(&mut self, term: RankOneTerm, weight: f64) -> Result<()> {
        if term.u.values().len() != self.shape.0 || term.v.values().len() != self.shape.1 {
            return Err(Error::ShapeMismatch {
                expected: self.shape,
                found: (term.u.values().len(), term.v.values().len()),
            });
        }
        self.terms.push(term);
        self.weights.push(weight);
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn terms(&self) -> &[RankOneTerm] {
        &self.terms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn set_weights(&mut self, weights: Vec<f64>) {
        debug_assert_eq!(weights.len(), self.terms.len());
        self.weights = weights;
    }

    pub(crate) fn replace_term(&mut self, index: usize, term: RankOneTerm) {
        self.terms[index] = term;
    }

    /// `X[r, c]`, summing terms in order.
    pub fn evaluate_at(&self, row: usize, col: usize) -> f64 {
        eval_entry(&self.terms, &self.weights, row, col)
    }

    /// Materializes `X` densely.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.shape.0, self.shape.1);
        for (term, &w) in self.terms.iter().zip(&self.weights) {
            for c in 0..self.shape.1 {
                let vc = w * term.v.values()[c];
                for r in 0..self.shape.0 {
                    x[(r, c)] += term.u.values()[r] * vc;
                }
            }
        }
        x
    }
}

#[inline]
fn eval_entry(terms: &[RankOneTerm], weights: &[f64], row: usize, col: usize) -> f64 {
    let mut acc = 0.0;
    for (term, &w) in terms.iter().zip(weights) {
        acc += w * term.entry(row, col);
    }
    acc
}

/// Observed data of a target problem.
#[derive(Debug, Clone)]
pub(crate) enum Observations {
    Full(DMatrix<f64>),
    /// Sorted by `(row, col)`, unique coordinates.
    Masked(Vec<(usize, usize, f64)>),
}

/// A matrix to approximate, with an optional observation mask and an
/// optional symmetry constraint (which forces `v = u` during fitting).
#[derive(Debug, Clone)]
pub struct TargetProblem {
    shape: (usize, usize),
    observations: Observations,
    symmetric_mode: bool,
}

impl TargetProblem {
    /// Fully observed target.
    pub fn full(y: DMatrix<f64>) -> Result<Self> {
        if y.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            shape: (y.nrows(), y.ncols()),
            observations: Observations::Full(y),
            symmetric_mode: false,
        })
    }

    /// Fully observed symmetric target; fitting uses `u = v`.
    pub fn full_symmetric(y: DMatrix<f64>) -> Result<Self> {
        let mut problem = Self::full(y)?;
        problem.check_symmetric()?;
        problem.symmetric_mode = true;
        Ok(problem)
    }

    /// Partially observed target given as `(row, col, value)` coordinates.
    pub fn masked(shape: (usize, usize), entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidProblem("empty observation set".into()));
        }
        let mut entries = entries;
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        for window in entries.windows(2) {
            if window[0].0 == window[1].0 && window[0].1 == window[1].1 {
                return Err(Error::InvalidProblem(format!(
                    "duplicate observation at ({}, {})",
                    window[0].0, window[0].1
                )));
            }
        }
        for &(r, c, v) in &entries {
            if r >= shape.0 || c >= shape.1 {
                return Err(Error::InvalidProblem(format!(
                    "observation ({r}, {c}) outside shape {shape:?}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self {
            shape,
            observations: Observations::Masked(entries),
            symmetric_mode: false,
        })
    }

    /// Partially observed symmetric target.
    pub fn masked_symmetric(
        shape: (usize, usize),
        entries: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        let mut problem = Self::masked(shape, entries)?;
        problem.check_symmetric()?;
        problem.symmetric_mode = true;
        Ok(problem)
    }

    fn check_symmetric(&self) -> Result<()> {
        if self.shape.0 != self.shape.1 {
            return Err(Error::ShapeMismatch {
                expected: (self.shape.0, self.shape.0),
                found: self.shape,
            });
        }
        match &self.observations {
            Observations::Full(y) => {
                for i in 0..y.nrows() {
                    for j in (i + 1)..y.ncols() {
                        if (y[(i, j)] - y[(j, i)]).abs() > 1e-10 {
                            return Err(Error::InvalidProblem(format!(
                                "asymmetric entries at ({i}, {j})"
                            )));
                        }
                    }
                }
            }
            Observations::Masked(entries) => {
                for &(r, c, v) in entries {
                    if r >= c {
                        continue;
                    }
                    if let Ok(idx) =
                        entries.binary_search_by_key(&(c, r), |&(er, ec, _)| (er, ec))
                    {
                        if (v - entries[idx].2).abs() > 1e-10 {
                            return Err(Error::InvalidProblem(format!(
                                "asymmetric observations at ({r}, {c})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric_mode
    }

    pub fn is_masked(&self) -> bool {
        matches!(self.observations, Observations::Masked(_))
    }

    /// Observed coordinates, or `None` when fully observed.
    pub fn mask(&self) -> Option<Vec<(usize, usize)>> {
        match &self.observations {
            Observations::Full(_) => None,
            Observations::Masked(entries) => {
                Some(entries.iter().map(|&(r, c, _)| (r, c)).collect())
            }
        }
    }

    pub fn observed_count(&self) -> usize {
        match &self.observations {
            Observations::Full(y) => y.len(),
            Observations::Masked(entries) => entries.len(),
        }
    }

    /// `||Y||_Omega^2`
    pub fn observed_norm_squared(&self) -> f64 {
        match &self.observations {
            Observations::Full(y) => y.iter().map(|v| v * v).sum(),
            Observations::Masked(entries) => entries.iter().map(|&(_, _, v)| v * v).sum(),
        }
    }

    /// Dense matrix of observed values, zeros elsewhere.
    pub fn y_dense(&self) -> DMatrix<f64> {
        match &self.observations {
            Observations::Full(y) => y.clone(),
            Observations::Masked(entries) => {
                let mut out = DMatrix::zeros(self.shape.0, self.shape.1);
                for &(r, c, v) in entries {
                    out[(r, c)] = v;
                }
                out
            }
        }
    }

    pub(crate) fn observations(&self) -> &Observations {
        &self.observations
    }

    fn check_model_shape(&self, model: &FactorModel) -> Result<()> {
        if model.shape() != self.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape,
                found: model.shape(),
            });
        }
        Ok(())
    }
}

/// `Y - X`, with unobserved entries set to zero when a mask is present.
/// This equals the negative gradient of [`cost`] restricted to the mask.
pub fn residual(problem: &TargetProblem, model: &FactorModel) -> Result<DMatrix<f64>> {
    problem.check_model_shape(model)?;
    let (n, m) = problem.shape;
    match problem.observations() {
        Observations::Full(y) => {
            let mut out = DMatrix::zeros(n, m);
            for r in 0..n {
                for c in 0..m {
                    out[(r, c)] = y[(r, c)] - model.evaluate_at(r, c);
                }
            }
            Ok(out)
        }
        Observations::Masked(entries) => {
            let mut out = DMatrix::zeros(n, m);
            for &(r, c, v) in entries {
                out[(r, c)] = v - model.evaluate_at(r, c);
            }
            Ok(out)
        }
    }
}

/// Residual in coordinate form, for partially observed problems.
pub(crate) fn residual_coo(problem: &TargetProblem, model: &FactorModel) -> CooMatrix {
    match problem.observations() {
        Observations::Full(_) => unreachable!("residual_coo requires a masked problem"),
        Observations::Masked(entries) => CooMatrix::new(
            problem.shape.0,
            problem.shape.1,
            entries
                .iter()
                .map(|&(r, c, v)| (r, c, v - model.evaluate_at(r, c)))
                .collect(),
        ),
    }
}

/// `0.5 * sum over observed entries of (Y - X)^2`.
pub fn cost(problem: &TargetProblem, model: &FactorModel) -> Result<f64> {
    problem.check_model_shape(model)?;
    Ok(cost_terms(problem, model.terms(), model.weights()))
}

/// Cost of an unpacked `(terms, weights)` model; shared by the refit and
/// correction machinery so candidate evaluations agree bit-for-bit with the
/// reported costs.
pub(crate) fn cost_terms(problem: &TargetProblem, terms: &[RankOneTerm], weights: &[f64]) -> f64 {
    cost_terms_with_swap(problem, terms, weights, None)
}

/// Like [`cost_terms`] but with one term optionally substituted in place,
/// preserving term order (and therefore summation order) exactly.
pub(crate) fn cost_terms_with_swap(
    problem: &TargetProblem,
    terms: &[RankOneTerm],
    weights: &[f64],
    swap: Option<(usize, &RankOneTerm)>,
) -> f64 {
    let eval = |r: usize, c: usize| -> f64 {
        let mut acc = 0.0;
        for (i, (term, &w)) in terms.iter().zip(weights).enumerate() {
            let term = match swap {
                Some((index, candidate)) if index == i => candidate,
                _ => term,
            };
            acc += w * term.entry(r, c);
        }
        acc
    };
    let mut acc = 0.0;
    match problem.observations() {
        Observations::Full(y) => {
            // Row-major entry order, matching the sorted masked path exactly.
            for r in 0..problem.shape.0 {
                for c in 0..problem.shape.1 {
                    let d = y[(r, c)] - eval(r, c);
                    acc += d * d;
                }
            }
        }
        Observations::Masked(entries) => {
            for &(r, c, v) in entries {
                let d = v - eval(r, c);
                acc += d * d;
            }
        }
    }
    0.5 * acc
}

/// Inner product of two dense matrices restricted to `mask` (all entries
/// when `mask` is `None`), accumulated in row-major coordinate order.
pub fn inner_omega(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    mask: Option<&[(usize, usize)]>,
) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            expected: a.shape(),
            found: b.shape(),
        });
    }
    match mask {
        None => {
            let mut acc = 0.0;
            for r in 0..a.nrows() {
                for c in 0..a.ncols() {
                    acc += a[(r, c)] * b[(r, c)];
                }
            }
            Ok(acc)
        }
        Some(mask) => {
            let mut acc = 0.0;
            for &(r, c) in mask {
                if r >= a.nrows() || c >= a.ncols() {
                    return Err(Error::OutOfRange {
                        name: "mask index",
                        detail: format!("({r}, {c}) outside {:?}", a.shape()),
                    });
                }
                acc += a[(r, c)] * b[(r, c)];
            }
            Ok(acc)
        }
    }
}

//! Brute-force reference solvers for small instances.
//!
//! These certify the approximate oracle and the pursuit loop in tests. They
//! are deliberately independent of the power-method code path and are never
//! called by production fitting routines.

use nalgebra::{DMatrix, DVector};

use crate::atomset::{AtomSpec, Constraint, VectorAtom};
use crate::error::{Error, Result};

const GRID_RESOLUTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    SupportEnumeration,
    GridSearch,
    DenseSvd,
}

/// Certified (or resolution-limited, for grid search) optimum.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub value: f64,
    pub atom_u: VectorAtom,
    pub atom_v: VectorAtom,
    pub method: OracleMethod,
    /// Angular step of the grid, when `method` is `GridSearch`.
    pub resolution: Option<f64>,
}

fn supports(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            current.push(i);
            rec(i + 1, n, k, current, out);
            current.pop();
        }
    }
    rec(0, n, k, &mut current, &mut out);
    out
}

fn embed(support: &[usize], values: &DVector<f64>, dim: usize) -> DVector<f64> {
    let mut out = DVector::zeros(dim);
    for (slot, &j) in support.iter().enumerate() {
        out[j] = values[slot];
    }
    out
}

/// Visits every point of the angular grid over the non-negative part of the
/// unit sphere in `dim` dimensions, at resolution <= `GRID_RESOLUTION`
/// radians per angle. The visited vector is a reused buffer.
fn visit_non_negative_grid(dim: usize, f: &mut dyn FnMut(&DVector<f64>)) {
    let mut u = DVector::zeros(dim);
    if dim == 1 {
        u[0] = 1.0;
        f(&u);
        return;
    }
    let steps = ((std::f64::consts::FRAC_PI_2) / GRID_RESOLUTION).ceil() as usize;
    let angles: Vec<f64> = (0..=steps)
        .map(|i| std::f64::consts::FRAC_PI_2 * i as f64 / steps as f64)
        .collect();
    // Spherical coordinates restricted to the first orthant: at depth i the
    // buffer holds sin(a_0)..sin(a_{i-1}) products folded into u.
    fn rec(
        depth: usize,
        sin_prod: f64,
        dim: usize,
        angles: &[f64],
        u: &mut DVector<f64>,
        f: &mut dyn FnMut(&DVector<f64>),
    ) {
        if depth == dim - 1 {
            u[depth] = sin_prod;
            f(u);
            return;
        }
        for &a in angles {
            u[depth] = sin_prod * a.cos();
            rec(depth + 1, sin_prod * a.sin(), dim, angles, u, f);
        }
    }
    rec(0, 1.0, dim, &angles, &mut u, f);
}

fn non_negative_grid(dim: usize) -> Vec<DVector<f64>> {
    let mut out = Vec::new();
    visit_non_negative_grid(dim, &mut |u| out.push(u.clone()));
    out
}

/// `u^T A u` without temporaries.
fn quadratic_form(a: &DMatrix<f64>, u: &DVector<f64>) -> f64 {
    let k = u.len();
    let mut acc = 0.0;
    for j in 0..k {
        let mut col = 0.0;
        for i in 0..k {
            col += a[(i, j)] * u[i];
        }
        acc += col * u[j];
    }
    acc
}

fn top_eigenpair(sub: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = sub.clone().symmetric_eigen();
    let mut best = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    (eig.eigenvalues[best], eig.eigenvectors.column(best).into())
}

/// Exhaustive maximum of `u^T R u` over the atom set.
///
/// Sparse and unit-sphere sets are solved exactly through per-support
/// eigendecompositions (dimension <= 12 for `Sparse`); the non-negative
/// variants use an angular grid at 0.01 rad over each support (support
/// size <= 5).
pub fn brute_lmo_symmetric(r: &DMatrix<f64>, spec: &AtomSpec) -> Result<OracleResult> {
    if r.nrows() != r.ncols() {
        return Err(Error::ShapeMismatch {
            expected: (r.nrows(), r.nrows()),
            found: r.shape(),
        });
    }
    let n = r.nrows();
    if spec.dimension() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: spec.dimension(),
        });
    }

    let result = |value: f64, vector: DVector<f64>, method: OracleMethod| {
        let atom = VectorAtom::new(vector, *spec)?;
        Ok(OracleResult {
            value,
            atom_u: atom.clone(),
            atom_v: atom,
            method,
            resolution: matches!(method, OracleMethod::GridSearch).then_some(GRID_RESOLUTION),
        })
    };

    match spec.constraint() {
        Constraint::UnitSphere => {
            let (value, vector) = top_eigenpair(r);
            result(value, vector, OracleMethod::SupportEnumeration)
        }
        Constraint::Sparse(k) => {
            if n > 12 {
                return Err(Error::OracleLimit(format!(
                    "support enumeration limited to dimension 12, got {n}"
                )));
            }
            let mut best: Option<(f64, DVector<f64>)> = None;
            for support in supports(n, k) {
                let sub = r.select_rows(&support).select_columns(&support);
                let (value, vector) = top_eigenpair(&sub);
                if best.as_ref().is_none_or(|b| value > b.0) {
                    best = Some((value, embed(&support, &vector, n)));
                }
            }
            let (value, vector) = best.unwrap();
            result(value, vector, OracleMethod::SupportEnumeration)
        }
        Constraint::NonNegative => {
            if n > 5 {
                return Err(Error::OracleLimit(format!(
                    "non-negative grid limited to dimension 5, got {n}"
                )));
            }
            let mut best: Option<(f64, DVector<f64>)> = None;
            visit_non_negative_grid(n, &mut |u| {
                let value = quadratic_form(r, u);
                if best.as_ref().is_none_or(|b| value > b.0) {
                    best = Some((value, u.clone()));
                }
            });
            let (value, mut vector) = best.unwrap();
            vector /= vector.norm();
            result(value, vector, OracleMethod::GridSearch)
        }
        Constraint::SparseNonNegative(k) => {
            if k > 5 {
                return Err(Error::OracleLimit(format!(
                    "non-negative grid limited to support size 5, got {k}"
                )));
            }
            let mut best: Option<(f64, DVector<f64>)> = None;
            for support in supports(n, k) {
                let sub = r.select_rows(&support).select_columns(&support);
                visit_non_negative_grid(k, &mut |u| {
                    let value = quadratic_form(&sub, u);
                    if best.as_ref().is_none_or(|b| value > b.0) {
                        best = Some((value, embed(&support, u, n)));
                    }
                });
            }
            let (value, mut vector) = best.unwrap();
            vector /= vector.norm();
            result(value, vector, OracleMethod::GridSearch)
        }
    }
}

/// Exhaustive maximum of `u^T R v` over a pair of atom sets, by support-pair
/// enumeration. Unconstrained support pairs take the restricted top singular
/// pair; a non-negative factor is grid-searched (support size <= 4) while
/// the opposite factor is solved in closed form given the gridded one.
pub fn brute_lmo_nonsymmetric(
    r: &DMatrix<f64>,
    spec_u: &AtomSpec,
    spec_v: &AtomSpec,
) -> Result<OracleResult> {
    let (n, m) = r.shape();
    if spec_u.dimension() != n || spec_v.dimension() != m {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: spec_u.dimension(),
        });
    }
    if n > 12 || m > 12 {
        return Err(Error::OracleLimit(format!(
            "support enumeration limited to dimension 12, got {n}x{m}"
        )));
    }

    let ku = spec_u.constraint().sparsity().unwrap_or(n);
    let kv = spec_v.constraint().sparsity().unwrap_or(m);
    let nn_u = spec_u.constraint().is_non_negative();
    let nn_v = spec_v.constraint().is_non_negative();
    if (nn_u && ku > 4) || (nn_v && kv > 4) {
        return Err(Error::OracleLimit(
            "non-negative grid limited to support size 4".into(),
        ));
    }

    let mut best: Option<(f64, DVector<f64>, DVector<f64>)> = None;
    let mut consider = |value: f64, u: DVector<f64>, v: DVector<f64>| {
        if best.as_ref().is_none_or(|b| value > b.0) {
            best = Some((value, u, v));
        }
    };

    let grid_u = if nn_u { non_negative_grid(ku) } else { vec![] };
    let grid_v = if !nn_u && nn_v { non_negative_grid(kv) } else { vec![] };
    for su in supports(n, ku) {
        for sv in supports(m, kv) {
            let sub = r.select_rows(&su).select_columns(&sv);
            match (nn_u, nn_v) {
                (false, false) => {
                    let svd = sub.clone().svd(true, true);
                    let (mut bi, mut bv) = (0, f64::NEG_INFINITY);
                    for (i, &s) in svd.singular_values.iter().enumerate() {
                        if s > bv {
                            bv = s;
                            bi = i;
                        }
                    }
                    let u = svd.u.as_ref().unwrap().column(bi).into_owned();
                    let v = svd.v_t.as_ref().unwrap().row(bi).transpose();
                    consider(bv, embed(&su, &u, n), embed(&sv, &v, m));
                }
                (true, _) => {
                    // Grid u; the best v for a fixed u is closed-form.
                    for u in &grid_u {
                        let w = sub.transpose() * u;
                        let v = best_factor_given(&w, nn_v);
                        let value = (u.transpose() * &sub * &v)[0];
                        consider(value, embed(&su, u, n), embed(&sv, &v, m));
                    }
                }
                (false, true) => {
                    for v in &grid_v {
                        let w = &sub * v;
                        let u = best_factor_given(&w, nn_u);
                        let value = (u.transpose() * &sub * v)[0];
                        consider(value, embed(&su, &u, n), embed(&sv, v, m));
                    }
                }
            }
        }
    }

    let (value, u, v) = best.unwrap();
    let grid = nn_u || nn_v;
    Ok(OracleResult {
        value,
        atom_u: VectorAtom::new(u.normalize(), *spec_u)?,
        atom_v: VectorAtom::new(v.normalize(), *spec_v)?,
        method: if grid {
            OracleMethod::GridSearch
        } else {
            OracleMethod::SupportEnumeration
        },
        resolution: grid.then_some(GRID_RESOLUTION),
    })
}

/// Maximizer of `<x, w>` over the unit sphere of the support (optionally
/// non-negative). Independent re-derivation for oracle use only.
fn best_factor_given(w: &DVector<f64>, non_negative: bool) -> DVector<f64> {
    if non_negative {
        let p = w.map(|x| x.max(0.0));
        let norm = p.norm();
        if norm == 0.0 {
            let mut best = 0;
            for j in 1..w.len() {
                if w[j] > w[best] {
                    best = j;
                }
            }
            let mut e = DVector::zeros(w.len());
            e[best] = 1.0;
            return e;
        }
        p / norm
    } else {
        let norm = w.norm();
        if norm == 0.0 {
            let mut e = DVector::zeros(w.len());
            e[0] = 1.0;
            return e;
        }
        w / norm
    }
}

/// Optimal costs `0.5 * sum_{i > r} sigma_i^2` of the best unstructured
/// rank-`r` approximations, for `r = 1..=rank`, from a dense singular value
/// decomposition.
pub fn svd_reference(y: &DMatrix<f64>, rank: usize) -> Result<Vec<f64>> {
    if rank == 0 || rank > y.nrows().min(y.ncols()) {
        return Err(Error::OutOfRange {
            name: "rank",
            detail: format!("{rank} for a {:?} matrix", y.shape()),
        });
    }
    let mut sigma: Vec<f64> = y.clone().svd(false, false).singular_values.iter().copied().collect();
    sigma.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok((1..=rank)
        .map(|r| 0.5 * sigma[r..].iter().map(|s| s * s).sum::<f64>())
        .collect())
}

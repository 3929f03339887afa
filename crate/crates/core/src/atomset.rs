//! Structured vector atom sets and the exact inner linear maximization
//! `argmax_{u in A} <u, w>` used by every atomic power step.
//!
//! All supported sets live on the unit sphere, optionally restricted by a
//! sparsity budget and/or a non-negativity constraint. New structures only
//! need a new [`Constraint`] variant plus its `linear_argmax` arm; the power
//! and pursuit layers are oblivious to the concrete set.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structural constraint placed on a vector atom, in addition to `||u||_2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    /// Unit Euclidean sphere, no further structure.
    UnitSphere,
    /// At most `k` nonzero entries.
    Sparse(usize),
    /// All entries non-negative.
    NonNegative,
    /// At most `k` nonzero entries, all non-negative.
    SparseNonNegative(usize),
}

impl Constraint {
    pub fn sparsity(&self) -> Option<usize> {
        match *self {
            Constraint::Sparse(k) | Constraint::SparseNonNegative(k) => Some(k),
            _ => None,
        }
    }

    pub fn is_non_negative(&self) -> bool {
        matches!(
            self,
            Constraint::NonNegative | Constraint::SparseNonNegative(_)
        )
    }
}

/// Declarative description of a structured atom set in a fixed dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomSpec {
    dimension: usize,
    constraint: Constraint,
}

impl AtomSpec {
    pub fn new(dimension: usize, constraint: Constraint) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidSpec("dimension must be positive".into()));
        }
        if let Some(k) = constraint.sparsity() {
            if k == 0 || k > dimension {
                return Err(Error::InvalidSpec(format!(
                    "sparsity {k} must satisfy 1 <= k <= dimension ({dimension})"
                )));
            }
        }
        Ok(Self {
            dimension,
            constraint,
        })
    }

    pub fn unit_sphere(dimension: usize) -> Result<Self> {
        Self::new(dimension, Constraint::UnitSphere)
    }

    pub fn sparse(dimension: usize, k: usize) -> Result<Self> {
        Self::new(dimension, Constraint::Sparse(k))
    }

    pub fn non_negative(dimension: usize) -> Result<Self> {
        Self::new(dimension, Constraint::NonNegative)
    }

    pub fn sparse_non_negative(dimension: usize, k: usize) -> Result<Self> {
        Self::new(dimension, Constraint::SparseNonNegative(k))
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }
}

/// A unit-norm vector satisfying its [`AtomSpec`].
///
/// Instances can only be obtained through validated construction
/// ([`VectorAtom::new`]) or through [`linear_argmax`], so holding a
/// `VectorAtom` certifies the set membership.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorAtom {
    values: DVector<f64>,
    spec: AtomSpec,
}

impl VectorAtom {
    /// Validates `values` against `spec` (unit norm within 1e-12, sparsity,
    /// non-negativity) and wraps them.
    pub fn new(values: DVector<f64>, spec: AtomSpec) -> Result<Self> {
        if values.len() != spec.dimension {
            return Err(Error::DimensionMismatch {
                expected: spec.dimension,
                found: values.len(),
            });
        }
        let atom = Self { values, spec };
        if let Some(msg) = atom.violation(1e-12) {
            return Err(Error::InvalidAtom(msg));
        }
        Ok(atom)
    }

    /// Constructs without re-validating. Callers must guarantee validity.
    pub(crate) fn from_normalized(values: DVector<f64>, spec: AtomSpec) -> Self {
        debug_assert!(Self {
            values: values.clone(),
            spec
        }
        .violation(1e-10)
        .is_none());
        Self { values, spec }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn spec(&self) -> AtomSpec {
        self.spec
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.values
    }

    fn violation(&self, tol: f64) -> Option<String> {
        let norm = self.values.norm();
        if (norm - 1.0).abs() > tol {
            return Some(format!("norm {norm} is not 1 within {tol}"));
        }
        if let Some(k) = self.spec.constraint.sparsity() {
            let nnz = self.values.iter().filter(|x| **x != 0.0).count();
            if nnz > k {
                return Some(format!("{nnz} nonzeros exceed sparsity budget {k}"));
            }
        }
        if self.spec.constraint.is_non_negative() {
            if let Some(x) = self.values.iter().find(|x| **x < -tol) {
                return Some(format!("negative entry {x}"));
            }
        }
        None
    }
}

/// True iff all type invariants of `atom` hold at tolerance 1e-10.
pub fn validate_atom(atom: &VectorAtom) -> bool {
    atom.values.len() == atom.spec.dimension && atom.violation(1e-10).is_none()
}

/// Exact solution of `argmax_{u in A} <u, w>` over the structured set.
///
/// Closed forms per constraint:
/// - `UnitSphere`: `w / ||w||`.
/// - `Sparse(k)`: keep the `k` entries of largest magnitude (ties to the
///   lowest index), zero the rest, normalize.
/// - `NonNegative`: normalized positive part; if `w` has no positive entry
///   the constrained maximizer is the basis vector at `argmax_j w_j`.
/// - `SparseNonNegative(k)`: up to `k` largest positive entries, normalized,
///   with the same all-nonpositive fallback.
///
/// Errors with [`Error::DegenerateDirection`] when `w = 0` (or, for
/// `Sparse`, when every candidate entry is zero); the non-negative variants
/// are total and fall back to a basis vector instead.
pub fn linear_argmax(spec: &AtomSpec, w: &DVector<f64>) -> Result<VectorAtom> {
    if w.len() != spec.dimension {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension,
            found: w.len(),
        });
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let values = match spec.constraint {
        Constraint::UnitSphere => {
            let norm = w.norm();
            if norm == 0.0 {
                return Err(Error::DegenerateDirection);
            }
            w / norm
        }
        Constraint::Sparse(k) => {
            let mut order: Vec<usize> = (0..w.len()).collect();
            order.sort_by(|&a, &b| {
                w[b].abs()
                    .partial_cmp(&w[a].abs())
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut u = DVector::zeros(w.len());
            for &j in order.iter().take(k) {
                u[j] = w[j];
            }
            let norm = u.norm();
            if norm == 0.0 {
                return Err(Error::DegenerateDirection);
            }
            u / norm
        }
        Constraint::NonNegative => {
            let mut u = w.map(|x| x.max(0.0));
            if u.iter().all(|x| *x == 0.0) {
                return Ok(VectorAtom::from_normalized(basis_at_max(w), *spec));
            }
            let norm = u.norm();
            u /= norm;
            u
        }
        Constraint::SparseNonNegative(k) => {
            let mut positive: Vec<usize> = (0..w.len()).filter(|&j| w[j] > 0.0).collect();
            if positive.is_empty() {
                return Ok(VectorAtom::from_normalized(basis_at_max(w), *spec));
            }
            positive.sort_by(|&a, &b| w[b].partial_cmp(&w[a]).unwrap().then(a.cmp(&b)));
            let mut u = DVector::zeros(w.len());
            for &j in positive.iter().take(k) {
                u[j] = w[j];
            }
            let norm = u.norm();
            u / norm
        }
    };
    Ok(VectorAtom::from_normalized(values, *spec))
}

/// Basis vector at the first index attaining `max_j w_j`.
fn basis_at_max(w: &DVector<f64>) -> DVector<f64> {
    let mut best = 0;
    for j in 1..w.len() {
        if w[j] > w[best] {
            best = j;
        }
    }
    let mut e = DVector::zeros(w.len());
    e[best] = 1.0;
    e
}

//! Greedy rank-one pursuit for structured low-rank matrix factorization
//! and completion.
//!
//! A target matrix (fully observed, or observed on an index set) is
//! approximated by a short linear combination of rank-one matrices
//! `u (x) v`, where both factors are drawn from structured atom sets:
//! the unit sphere, sparse vectors, non-negative vectors, or sparse
//! non-negative vectors. Depending on the atom sets and the observation
//! pattern this covers PCA/SVD, sparse PCA, sparse non-negative PCA, NMF
//! variants, and low-rank matrix completion.
//!
//! The pieces:
//!
//! - [`atomset`]: atom-set descriptions and the exact linear maximization
//!   over one atom set.
//! - [`power`]: the atomic power method, the approximate rank-one oracle
//!   with restarts, and a controlled-accuracy degradation wrapper.
//! - [`objective`]: targets, masks, factor models, residuals and costs.
//! - [`pursuit`]: the outer greedy loops (matrix pursuit and
//!   finite-dictionary pursuit), weight refitting, atom corrections and
//!   dictionary coherence.
//! - [`oracle`]: brute-force references for small instances, used by tests.
//! - [`cli`]: batch drivers, dataset parsing, reports and file formats
//!   behind the `matpursuit` binary.
//!
//! The `examples/` directory contains one runnable example per capability;
//! start with `cargo run --example svd_factorization`.

pub mod atomset;
pub mod cli;
pub mod error;
pub mod linop;
pub mod objective;
pub mod oracle;
pub mod power;
pub mod pursuit;

pub use atomset::{linear_argmax, validate_atom, AtomSpec, Constraint, VectorAtom};
pub use error::{Error, Result};
pub use linop::{CooMatrix, LinearOperator, Symmetrized};
pub use objective::{cost, inner_omega, residual, FactorModel, RankOneTerm, TargetProblem};
pub use power::{
    atomic_power_nonsymmetric, atomic_power_symmetric, degrade_lmo, lmo, KappaPolicy,
    NonSymmetricStrategy, PowerConfig, PowerResult,
};
pub use pursuit::{
    coherence_profile, correct_atoms, cumulative_coherence, gmp_fit, gp_fit_finite,
    refit_weights, CoherenceProfile, Correction, DictionaryFit, FiniteDictionary, LmoMode,
    PursuitConfig, PursuitTrace, StopReason, TraceRecord, WeightMode,
};

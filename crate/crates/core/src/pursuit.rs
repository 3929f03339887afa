//! Greedy rank-one pursuit.
//!
//! [`gmp_fit`] grows a factor model one rank-one term per iteration: the
//! residual is handed to the approximate oracle ([`crate::power::lmo`]) for
//! the next atom pair, weights are re-solved (fully corrective, or only for
//! the newest term), and optional cyclic passes re-derive already chosen
//! atoms against their partial residuals. [`gp_fit_finite`] is the same
//! greedy scheme over an explicit finite dictionary of vectors, which is the
//! classical matching-pursuit setting, and [`cumulative_coherence`] computes
//! the dictionary statistic that governs its convergence rate.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::atomset::AtomSpec;
use crate::error::{Error, Result};
use crate::linop::{CooMatrix, Symmetrized};
use crate::objective::{
    cost_terms, cost_terms_with_swap, residual_coo, FactorModel, Observations, RankOneTerm,
    TargetProblem,
};
use crate::power::{degrade_lmo, lmo, PowerConfig, PowerResult};

/// How weights are updated after a new atom is added.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// Re-solve the full normal equations over all selected terms.
    FullRefit,
    /// Only the newest weight is optimized; previous weights stay fixed.
    NewWeightOnly,
}

/// Atom-correction schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correction {
    None,
    /// After each outer iteration, sweep all terms in selection order for
    /// the given number of passes, replacing a term whenever re-solving the
    /// oracle against its partial residual strictly lowers the cost.
    Cyclic(usize),
}

/// Settings for one pursuit run.
#[derive(Debug, Clone)]
pub struct PursuitConfig {
    /// Rank budget: number of outer iterations.
    pub max_rank: usize,
    pub power: PowerConfig,
    pub weight_mode: WeightMode,
    pub correction: Correction,
    /// Stop once `cost <= stop_tolerance * initial_cost`.
    pub stop_tolerance: f64,
    /// When set, every oracle answer is degraded to a multiplicative
    /// accuracy in `[delta, 1]` before being used (experimental knob).
    pub lmo_delta: Option<f64>,
    pub seed: u64,
}

impl PursuitConfig {
    pub fn new(max_rank: usize) -> Self {
        Self {
            max_rank,
            power: PowerConfig::default(),
            weight_mode: WeightMode::FullRefit,
            correction: Correction::None,
            stop_tolerance: 0.0,
            lmo_delta: None,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.max_rank == 0 {
            return Err(Error::InvalidConfig("max_rank must be >= 1".into()));
        }
        if let Some(delta) = self.lmo_delta {
            if !(delta > 0.0 && delta <= 1.0) {
                return Err(Error::InvalidConfig("lmo_delta must lie in (0, 1]".into()));
            }
        }
        if self.stop_tolerance < 0.0 {
            return Err(Error::InvalidConfig("stop_tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

/// Why a pursuit run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// All `max_rank` iterations ran.
    RankBudget,
    /// `cost <= stop_tolerance * initial_cost`.
    CostTolerance,
    /// The best oracle value fell below `1e-14 * (1 + ||Y||)`: first-order
    /// optimality, the residual cannot be improved within the atom set.
    NegligibleLmoValue,
    /// Every oracle restart degenerated (residual numerically zero).
    LmoFailure,
}

/// One outer-iteration record.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    /// 1-based iteration index (equals the model rank after this iteration).
    pub iteration: usize,
    pub cost: f64,
    /// `||Y - X||` over observed entries (unscaled).
    pub residual_norm: f64,
    /// `<R_{r-1}, u_r (x) v_r>` of the accepted atom pair.
    pub lmo_value: f64,
    pub lmo_gap: f64,
    pub corrections_applied: usize,
    /// True when the Gram system was numerically rank-deficient and the
    /// minimum-norm least-squares fallback was used.
    pub refit_fallback: bool,
    pub weights: Vec<f64>,
}

/// Convergence evidence for a pursuit run.
#[derive(Debug, Clone)]
pub struct PursuitTrace {
    pub records: Vec<TraceRecord>,
    pub initial_cost: f64,
    pub stop: StopReason,
    /// Set when the oracle failed on the very first iteration, i.e. the
    /// target itself is numerically zero; the returned model is empty.
    pub degenerate_target: bool,
}

impl PursuitTrace {
    pub fn final_cost(&self) -> f64 {
        self.records.last().map_or(self.initial_cost, |r| r.cost)
    }
}

// ── Gram machinery ──────────────────────────────────────────────────────

/// Inner product `<Z_a, Z_b>` of two rank-one terms over the observed set.
fn term_inner(problem: &TargetProblem, a: &RankOneTerm, b: &RankOneTerm) -> f64 {
    match problem.observations() {
        Observations::Full(_) => {
            a.u.values().dot(b.u.values()) * a.v.values().dot(b.v.values())
        }
        Observations::Masked(entries) => entries
            .iter()
            .map(|&(r, c, _)| a.entry(r, c) * b.entry(r, c))
            .sum(),
    }
}

/// `<Z, Y>` over the observed set.
fn term_target_inner(problem: &TargetProblem, term: &RankOneTerm) -> f64 {
    match problem.observations() {
        Observations::Full(y) => (term.u.values().transpose() * y * term.v.values())[0],
        Observations::Masked(entries) => entries
            .iter()
            .map(|&(r, c, v)| v * term.entry(r, c))
            .sum(),
    }
}

/// Minimum-norm least-squares solve of a symmetric PSD system, with
/// rank-deficiency detection at condition number 1e12.
fn pseudo_solve(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> (Vec<f64>, bool) {
    let svd = gram.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    if smax <= 0.0 {
        return (vec![0.0; rhs.len()], true);
    }
    let cutoff = smax / 1e12;
    let fallback = svd.singular_values.iter().any(|&s| s < cutoff);
    let ut_b = svd.u.as_ref().unwrap().transpose() * rhs;
    let mut scaled = DVector::zeros(svd.singular_values.len());
    for i in 0..svd.singular_values.len() {
        if svd.singular_values[i] >= cutoff {
            scaled[i] = ut_b[i] / svd.singular_values[i];
        }
    }
    let alpha = svd.v_t.as_ref().unwrap().transpose() * scaled;
    (alpha.iter().copied().collect(), fallback)
}

/// Incrementally maintained normal equations `G alpha = b` over the
/// selected terms.
struct GramSystem {
    gram: DMatrix<f64>,
    rhs: DVector<f64>,
}

impl GramSystem {
    fn new() -> Self {
        Self {
            gram: DMatrix::zeros(0, 0),
            rhs: DVector::zeros(0),
        }
    }

    fn from_terms(problem: &TargetProblem, terms: &[RankOneTerm]) -> Self {
        let r = terms.len();
        let mut gram = DMatrix::zeros(r, r);
        let mut rhs = DVector::zeros(r);
        for i in 0..r {
            rhs[i] = term_target_inner(problem, &terms[i]);
            for j in i..r {
                let g = term_inner(problem, &terms[i], &terms[j]);
                gram[(i, j)] = g;
                gram[(j, i)] = g;
            }
        }
        Self { gram, rhs }
    }

    /// Appends a term: one new Gram row/column and one right-hand side entry.
    fn push(&mut self, problem: &TargetProblem, terms: &[RankOneTerm], new_term: &RankOneTerm) {
        let r = self.gram.nrows();
        let mut grown = DMatrix::zeros(r + 1, r + 1);
        grown.view_mut((0, 0), (r, r)).copy_from(&self.gram);
        for (i, term) in terms.iter().enumerate() {
            let g = term_inner(problem, term, new_term);
            grown[(i, r)] = g;
            grown[(r, i)] = g;
        }
        grown[(r, r)] = term_inner(problem, new_term, new_term);
        self.gram = grown;
        let mut rhs = DVector::zeros(r + 1);
        rhs.rows_mut(0, r).copy_from(&self.rhs);
        rhs[r] = term_target_inner(problem, new_term);
        self.rhs = rhs;
    }

    /// Row/rhs updates for replacing term `index` by `candidate`, without
    /// committing them.
    fn replacement_row(
        &self,
        problem: &TargetProblem,
        terms: &[RankOneTerm],
        index: usize,
        candidate: &RankOneTerm,
    ) -> (Vec<f64>, f64) {
        let row: Vec<f64> = (0..terms.len())
            .map(|j| {
                if j == index {
                    term_inner(problem, candidate, candidate)
                } else {
                    term_inner(problem, candidate, &terms[j])
                }
            })
            .collect();
        (row, term_target_inner(problem, candidate))
    }

    fn solve_with_replacement(&self, index: usize, row: &[f64], rhs_i: f64) -> (Vec<f64>, bool) {
        let mut gram = self.gram.clone();
        let mut rhs = self.rhs.clone();
        for (j, &g) in row.iter().enumerate() {
            gram[(index, j)] = g;
            gram[(j, index)] = g;
        }
        rhs[index] = rhs_i;
        pseudo_solve(&gram, &rhs)
    }

    fn commit_replacement(&mut self, index: usize, row: &[f64], rhs_i: f64) {
        for (j, &g) in row.iter().enumerate() {
            self.gram[(index, j)] = g;
            self.gram[(j, index)] = g;
        }
        self.rhs[index] = rhs_i;
    }

    fn solve(&self) -> (Vec<f64>, bool) {
        pseudo_solve(&self.gram, &self.rhs)
    }
}

/// Fully corrective weight refit: solves the normal equations
/// `G alpha = b` with `G_ij = <Z_i, Z_j>_Omega` and `b_i = <Z_i, Y>_Omega`.
/// Numerically rank-deficient systems (condition above 1e12) fall back to
/// the minimum-norm least-squares solution instead of erroring.
pub fn refit_weights(problem: &TargetProblem, terms: &[RankOneTerm]) -> Result<Vec<f64>> {
    if terms.is_empty() {
        return Err(Error::EmptyTerms);
    }
    for term in terms {
        if term.u.values().len() != problem.shape().0 || term.v.values().len() != problem.shape().1
        {
            return Err(Error::ShapeMismatch {
                expected: problem.shape(),
                found: (term.u.values().len(), term.v.values().len()),
            });
        }
    }
    Ok(GramSystem::from_terms(problem, terms).solve().0)
}

// ── Residual operator dispatch ──────────────────────────────────────────

enum ResidOperator {
    Dense(DMatrix<f64>),
    Coo(CooMatrix),
}

impl ResidOperator {
    fn for_model(problem: &TargetProblem, terms: &[RankOneTerm], weights: &[f64]) -> Self {
        match problem.observations() {
            Observations::Full(_) => {
                let model =
                    FactorModel::from_parts(terms.to_vec(), weights.to_vec(), problem.shape())
                        .expect("terms originate from this problem");
                ResidOperator::Dense(
                    crate::objective::residual(problem, &model)
                        .expect("shape verified at fit entry"),
                )
            }
            Observations::Masked(_) => {
                let model =
                    FactorModel::from_parts(terms.to_vec(), weights.to_vec(), problem.shape())
                        .expect("terms originate from this problem");
                ResidOperator::Coo(residual_coo(problem, &model))
            }
        }
    }

    fn run_lmo(
        &self,
        symmetric: bool,
        spec_u: &AtomSpec,
        spec_v: &AtomSpec,
        config: &PowerConfig,
    ) -> Result<PowerResult> {
        match self {
            ResidOperator::Dense(m) => {
                if symmetric {
                    lmo(m, spec_u, None, config)
                } else {
                    lmo(m, spec_u, Some(spec_v), config)
                }
            }
            ResidOperator::Coo(c) => {
                if symmetric {
                    // An asymmetric mask makes the coordinate residual
                    // asymmetric even for a symmetric target; the objective
                    // only sees the symmetric part.
                    lmo(&Symmetrized(c), spec_u, None, config)
                } else {
                    lmo(c, spec_u, Some(spec_v), config)
                }
            }
        }
    }

    fn degrade(
        &self,
        exact: &PowerResult,
        delta: f64,
        symmetric: bool,
        spec_u: &AtomSpec,
        spec_v: &AtomSpec,
        seed: u64,
    ) -> Result<PowerResult> {
        match self {
            ResidOperator::Dense(m) => {
                if symmetric {
                    degrade_lmo(exact, delta, m, spec_u, None, seed)
                } else {
                    degrade_lmo(exact, delta, m, spec_u, Some(spec_v), seed)
                }
            }
            ResidOperator::Coo(c) => {
                if symmetric {
                    degrade_lmo(exact, delta, &Symmetrized(c), spec_u, None, seed)
                } else {
                    degrade_lmo(exact, delta, c, spec_u, Some(spec_v), seed)
                }
            }
        }
    }
}

// ── Generalized matrix pursuit ──────────────────────────────────────────

/// Greedy structured factorization of `problem` over `spec_u (x) spec_v`
/// atoms (over `spec_u (x) spec_u` in symmetric mode, where `spec_v` is
/// ignored).
///
/// Each iteration runs the multi-restart power oracle on the current
/// residual, appends the best atom pair, re-solves weights per
/// [`WeightMode`], and optionally sweeps atom corrections. The returned
/// model's cost equals the final trace record's cost.
pub fn gmp_fit(
    problem: &TargetProblem,
    spec_u: &AtomSpec,
    spec_v: &AtomSpec,
    config: &PursuitConfig,
) -> Result<(FactorModel, PursuitTrace)> {
    config.validate()?;
    let symmetric = problem.is_symmetric();
    let (n, m) = problem.shape();
    if spec_u.dimension() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: spec_u.dimension(),
        });
    }
    let spec_v = if symmetric { spec_u } else { spec_v };
    if spec_v.dimension() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: spec_v.dimension(),
        });
    }

    let mut model = FactorModel::empty((n, m));
    let mut gram = GramSystem::new();
    let initial_cost = cost_terms(problem, &[], &[]);
    let lmo_floor = 1e-14 * (1.0 + problem.observed_norm_squared().sqrt());
    let needs_gram = config.weight_mode == WeightMode::FullRefit
        || !matches!(config.correction, Correction::None);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut trace = PursuitTrace {
        records: Vec::new(),
        initial_cost,
        stop: StopReason::RankBudget,
        degenerate_target: false,
    };

    for iteration in 1..=config.max_rank {
        let lmo_seed = rng.gen::<u64>();
        let degrade_seed = rng.gen::<u64>();
        let power_cfg = config.power.clone().with_seed(lmo_seed);

        let op = ResidOperator::for_model(problem, model.terms(), model.weights());
        let mut picked = match op.run_lmo(symmetric, spec_u, spec_v, &power_cfg) {
            Ok(res) => res,
            Err(Error::LmoFailure) => {
                if iteration == 1 {
                    trace.degenerate_target = true;
                }
                trace.stop = StopReason::LmoFailure;
                break;
            }
            Err(e) => return Err(e),
        };
        if let Some(delta) = config.lmo_delta {
            if delta < 1.0 && picked.value > 0.0 {
                picked = op.degrade(&picked, delta, symmetric, spec_u, spec_v, degrade_seed)?;
            }
        }
        if picked.value <= lmo_floor {
            trace.stop = StopReason::NegligibleLmoValue;
            break;
        }

        let term = if symmetric {
            RankOneTerm::new(picked.atom_u.clone(), picked.atom_u.clone())
        } else {
            RankOneTerm::new(picked.atom_u.clone(), picked.atom_v.clone())
        };
        if needs_gram {
            gram.push(problem, model.terms(), &term);
        }

        let mut refit_fallback = false;
        match config.weight_mode {
            WeightMode::FullRefit => {
                model.push_term(term, 0.0)?;
                let (weights, fallback) = gram.solve();
                refit_fallback = fallback;
                model.set_weights(weights);
            }
            WeightMode::NewWeightOnly => {
                let z_norm_sq = term_inner(problem, &term, &term);
                let weight = if z_norm_sq > 0.0 {
                    picked.value / z_norm_sq
                } else {
                    0.0
                };
                model.push_term(term, weight)?;
            }
        }

        let corrections_applied = match config.correction {
            Correction::None => 0,
            Correction::Cyclic(passes) => run_correction_passes(
                problem, &mut model, &mut gram, spec_u, spec_v, &config.power, passes, &mut rng,
            )?,
        };

        let cost = cost_terms(problem, model.terms(), model.weights());
        trace.records.push(TraceRecord {
            iteration,
            cost,
            residual_norm: (2.0 * cost).sqrt(),
            lmo_value: picked.value,
            lmo_gap: picked.final_gap,
            corrections_applied,
            refit_fallback,
            weights: model.weights().to_vec(),
        });

        if cost <= config.stop_tolerance * initial_cost {
            trace.stop = StopReason::CostTolerance;
            break;
        }
    }

    Ok((model, trace))
}

/// One or more cyclic correction sweeps over the model terms; returns the
/// number of accepted replacements. Weights are fully refit after every
/// accepted replacement, so the cost never increases.
#[allow(clippy::too_many_arguments)]
fn run_correction_passes(
    problem: &TargetProblem,
    model: &mut FactorModel,
    gram: &mut GramSystem,
    spec_u: &AtomSpec,
    spec_v: &AtomSpec,
    power: &PowerConfig,
    passes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    let symmetric = problem.is_symmetric();
    let mut accepted = 0;
    let mut current_cost = cost_terms(problem, model.terms(), model.weights());

    for _pass in 0..passes {
        for index in 0..model.rank() {
            let proposal_seed = rng.gen::<u64>();
            // Partial residual excluding term `index`.
            let mut masked_weights = model.weights().to_vec();
            masked_weights[index] = 0.0;
            let op = ResidOperator::for_model(problem, model.terms(), &masked_weights);
            let power_cfg = power.clone().with_seed(proposal_seed);
            let proposal = match op.run_lmo(symmetric, spec_u, spec_v, &power_cfg) {
                Ok(res) => res,
                Err(Error::LmoFailure) => continue,
                Err(e) => return Err(e),
            };
            let candidate = if symmetric {
                RankOneTerm::new(proposal.atom_u.clone(), proposal.atom_u)
            } else {
                RankOneTerm::new(proposal.atom_u, proposal.atom_v)
            };

            let (row, rhs_i) = gram.replacement_row(problem, model.terms(), index, &candidate);
            let (weights, _) = gram.solve_with_replacement(index, &row, rhs_i);
            let candidate_cost = cost_terms_with_swap(
                problem,
                model.terms(),
                &weights,
                Some((index, &candidate)),
            );
            if candidate_cost <= current_cost - 1e-12 {
                gram.commit_replacement(index, &row, rhs_i);
                model.replace_term(index, candidate);
                model.set_weights(weights);
                current_cost = candidate_cost;
                accepted += 1;
            }
        }
    }
    Ok(accepted)
}

/// Cyclic atom-correction passes over an existing model (see
/// [`Correction::Cyclic`]). `spec_v` is ignored for symmetric problems.
/// `passes = 0` returns the model unchanged.
pub fn correct_atoms(
    problem: &TargetProblem,
    model: &FactorModel,
    spec_u: &AtomSpec,
    spec_v: &AtomSpec,
    power: &PowerConfig,
    passes: usize,
) -> Result<FactorModel> {
    if model.is_empty() {
        return Err(Error::EmptyTerms);
    }
    let mut model = model.clone();
    if passes == 0 {
        return Ok(model);
    }
    let mut gram = GramSystem::from_terms(problem, model.terms());
    let mut rng = ChaCha8Rng::seed_from_u64(power.seed);
    run_correction_passes(
        problem,
        &mut model,
        &mut gram,
        spec_u,
        if problem.is_symmetric() { spec_u } else { spec_v },
        power,
        passes,
        &mut rng,
    )?;
    Ok(model)
}

// ── Finite-dictionary pursuit ───────────────────────────────────────────

/// An explicit dictionary of vectors in a common ambient dimension.
#[derive(Debug, Clone)]
pub struct FiniteDictionary {
    atoms: Vec<DVector<f64>>,
    normalized: bool,
}

impl FiniteDictionary {
    pub fn new(atoms: Vec<DVector<f64>>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyDictionary);
        }
        let dim = atoms[0].len();
        if dim == 0 || atoms.iter().any(|a| a.len() != dim) {
            return Err(Error::InvalidProblem(
                "dictionary atoms must share a positive dimension".into(),
            ));
        }
        let normalized = atoms.iter().all(|a| (a.norm() - 1.0).abs() <= 1e-12);
        Ok(Self { atoms, normalized })
    }

    /// Rescales every atom to unit norm.
    pub fn normalize(self) -> Result<Self> {
        let mut atoms = self.atoms;
        for atom in &mut atoms {
            let norm = atom.norm();
            if norm == 0.0 {
                return Err(Error::InvalidProblem("zero atom cannot be normalized".into()));
            }
            *atom /= norm;
        }
        Ok(Self {
            atoms,
            normalized: true,
        })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn atoms(&self) -> &[DVector<f64>] {
        &self.atoms
    }
}

/// Atom-selection rule for finite dictionaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmoMode {
    /// `argmax |<s, r>|`, the usual convention on sign-symmetric
    /// dictionaries; the sign is absorbed into the weight.
    Signed,
    /// `argmax <s, r>`.
    Max,
}

/// Result of a finite-dictionary fit: selected atom indices in selection
/// order with their weights (all weights are rewritten each iteration under
/// [`WeightMode::FullRefit`]).
#[derive(Debug, Clone)]
pub struct DictionaryFit {
    pub selected: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Greedy pursuit of `y` over a finite dictionary.
///
/// Iteratively selects the atom with the best residual correlation per
/// `mode`, refits coefficients per `config.weight_mode`, and stops at the
/// rank budget, the cost tolerance, or once the selection value drops below
/// `1e-14 * (1 + ||y||)` (first-order optimality of the residual).
pub fn gp_fit_finite(
    y: &DVector<f64>,
    dict: &FiniteDictionary,
    config: &PursuitConfig,
    mode: LmoMode,
) -> Result<(DictionaryFit, PursuitTrace)> {
    config.validate()?;
    if dict.dimension() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: dict.dimension(),
        });
    }

    let initial_cost = 0.5 * y.norm_squared();
    let floor = 1e-14 * (1.0 + y.norm());
    let mut fit = DictionaryFit {
        selected: Vec::new(),
        weights: Vec::new(),
    };
    let mut trace = PursuitTrace {
        records: Vec::new(),
        initial_cost,
        stop: StopReason::RankBudget,
        degenerate_target: false,
    };
    let mut residual = y.clone();
    // Gram over selected atoms, grown incrementally.
    let mut gram = DMatrix::<f64>::zeros(0, 0);
    let mut rhs = DVector::<f64>::zeros(0);

    for iteration in 1..=config.max_rank {
        let mut best_index = 0;
        let mut best_signed = f64::NEG_INFINITY;
        for (i, atom) in dict.atoms().iter().enumerate() {
            let ip = atom.dot(&residual);
            let score = match mode {
                LmoMode::Signed => ip.abs(),
                LmoMode::Max => ip,
            };
            if score > best_signed {
                best_signed = score;
                best_index = i;
            }
        }
        if best_signed <= floor {
            trace.stop = StopReason::NegligibleLmoValue;
            break;
        }

        let selected_atom = &dict.atoms()[best_index];
        let r = fit.selected.len();
        let mut grown = DMatrix::zeros(r + 1, r + 1);
        grown.view_mut((0, 0), (r, r)).copy_from(&gram);
        for (slot, &j) in fit.selected.iter().enumerate() {
            let g = dict.atoms()[j].dot(selected_atom);
            grown[(slot, r)] = g;
            grown[(r, slot)] = g;
        }
        grown[(r, r)] = selected_atom.norm_squared();
        gram = grown;
        let mut new_rhs = DVector::zeros(r + 1);
        new_rhs.rows_mut(0, r).copy_from(&rhs);
        new_rhs[r] = selected_atom.dot(y);
        rhs = new_rhs;
        fit.selected.push(best_index);

        match config.weight_mode {
            WeightMode::FullRefit => {
                let (weights, _) = pseudo_solve(&gram, &rhs);
                fit.weights = weights;
            }
            WeightMode::NewWeightOnly => {
                let z = selected_atom.norm_squared();
                let ip = selected_atom.dot(&residual);
                fit.weights.push(if z > 0.0 { ip / z } else { 0.0 });
            }
        }

        residual = y.clone();
        for (&j, &w) in fit.selected.iter().zip(&fit.weights) {
            residual -= &dict.atoms()[j] * w;
        }
        let cost = 0.5 * residual.norm_squared();
        trace.records.push(TraceRecord {
            iteration,
            cost,
            residual_norm: residual.norm(),
            lmo_value: best_signed,
            lmo_gap: 0.0,
            corrections_applied: 0,
            refit_fallback: false,
            weights: fit.weights.clone(),
        });

        if cost <= config.stop_tolerance * initial_cost {
            trace.stop = StopReason::CostTolerance;
            break;
        }
    }

    Ok((fit, trace))
}

// ── Cumulative coherence ────────────────────────────────────────────────

/// `mu(m)` for every `m = 1..=n-1`.
#[derive(Debug, Clone)]
pub struct CoherenceProfile {
    mu: Vec<f64>,
}

impl CoherenceProfile {
    /// `mu(m)`; `m` is 1-based, `mu(0) = 0` by convention.
    pub fn mu(&self, m: usize) -> f64 {
        if m == 0 {
            0.0
        } else {
            self.mu[m - 1]
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.mu
    }

    pub fn max_m(&self) -> usize {
        self.mu.len()
    }
}

/// Cumulative coherence `mu(m)`: the worst sum, over any single atom, of
/// its `m` largest absolute inner products with other atoms. The inner
/// maximum over index sets is attained by the top-`m` entries, so the
/// computation is exact.
pub fn cumulative_coherence(dict: &FiniteDictionary, m: usize) -> Result<f64> {
    let n = dict.len();
    if m == 0 || m > n - 1 {
        return Err(Error::OutOfRange {
            name: "m",
            detail: format!("{m} for a dictionary of {n} atoms"),
        });
    }
    Ok(coherence_profile(dict)?.mu(m))
}

/// All of `mu(1..=n-1)` in one pass over the Gram matrix.
pub fn coherence_profile(dict: &FiniteDictionary) -> Result<CoherenceProfile> {
    if !dict.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let n = dict.len();
    let mut mu = vec![0.0_f64; n - 1];
    for k in 0..n {
        let mut correlations: Vec<f64> = (0..n)
            .filter(|&i| i != k)
            .map(|i| dict.atoms()[k].dot(&dict.atoms()[i]).abs())
            .collect();
        correlations.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut acc = 0.0;
        for (m, &c) in correlations.iter().enumerate() {
            acc += c;
            if mu[m] < acc {
                mu[m] = acc;
            }
        }
    }
    Ok(CoherenceProfile { mu })
}

//! Batch command drivers behind the `matpursuit` binary: factorization and
//! completion experiments plus dictionary-coherence reports, all emitting
//! machine-readable documents.

pub mod dataset;
pub mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::atomset::{AtomSpec, Constraint};
use crate::error::Error;
use crate::objective::{FactorModel, TargetProblem};
use crate::pursuit::{
    coherence_profile, correct_atoms, gmp_fit, Correction, PursuitConfig, WeightMode,
};
use dataset::{Dataset, SourceFormat, SplitTag};
use report::{
    trace_csv, trace_rows, ConfigEcho, DatasetSummary, FactorFile, Metrics, RunReport, Timings,
};

/// Command-level failures, carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Inconsistent flags or unusable parameter combinations (exit 2).
    Usage(String),
    /// Unreadable or malformed input files (exit 3).
    Parse(String),
    /// Numerical failure: the fit could not start (exit 4).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Parse(msg) => write!(f, "input error: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::LmoFailure => CliError::Numerical(e.to_string()),
            Error::InvalidSpec(_) | Error::InvalidConfig(_) | Error::OutOfRange { .. } => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorizeMode {
    Svd,
    SparsePca,
    SnnPca,
    Nmf,
    SparseNmf,
}

impl FactorizeMode {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "svd" => Ok(Self::Svd),
            "sparse-pca" => Ok(Self::SparsePca),
            "snn-pca" => Ok(Self::SnnPca),
            "nmf" => Ok(Self::Nmf),
            "sparse-nmf" => Ok(Self::SparseNmf),
            other => Err(CliError::Usage(format!(
                "unknown mode '{other}' (expected svd, sparse-pca, snn-pca, nmf or sparse-nmf)"
            ))),
        }
    }

    fn as_str(&self) -> &'static str {
        match self {
            Self::Svd => "svd",
            Self::SparsePca => "sparse-pca",
            Self::SnnPca => "snn-pca",
            Self::Nmf => "nmf",
            Self::SparseNmf => "sparse-nmf",
        }
    }

    /// Symmetric factorizations of a covariance/Gram matrix.
    fn implies_symmetric(&self) -> bool {
        matches!(self, Self::SparsePca | Self::SnnPca)
    }

    fn base_non_negative(&self) -> bool {
        matches!(self, Self::Nmf | Self::SparseNmf)
    }

    fn requires_sparsity(&self) -> bool {
        matches!(self, Self::SparsePca | Self::SnnPca | Self::SparseNmf)
    }
}

/// Shared power/pursuit knobs exposed on every fitting command.
#[derive(Debug, Clone)]
pub struct SolverFlags {
    pub corrections: usize,
    pub restarts: usize,
    pub power_iters: usize,
    pub gap_tol: f64,
    pub delta: Option<f64>,
    pub seed: u64,
}

impl Default for SolverFlags {
    fn default() -> Self {
        Self {
            corrections: 0,
            restarts: 5,
            power_iters: 250,
            gap_tol: 1e-8,
            delta: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FactorizeOptions {
    pub input: PathBuf,
    pub format: Option<SourceFormat>,
    pub mode: FactorizeMode,
    pub rank: usize,
    pub sparsity_u: Option<usize>,
    pub sparsity_v: Option<usize>,
    pub nonneg_u: bool,
    pub nonneg_v: bool,
    pub symmetric: bool,
    pub solver: SolverFlags,
}

#[derive(Debug, Clone)]
pub struct FactorizeOutput {
    pub report: RunReport,
    pub factors: FactorFile,
    pub trace_csv: String,
    pub warnings: Vec<String>,
}

fn constraint_for(
    sparsity: Option<usize>,
    non_negative: bool,
) -> Constraint {
    match (sparsity, non_negative) {
        (Some(k), true) => Constraint::SparseNonNegative(k),
        (Some(k), false) => Constraint::Sparse(k),
        (None, true) => Constraint::NonNegative,
        (None, false) => Constraint::UnitSphere,
    }
}

fn build_pursuit_config(rank: usize, solver: &SolverFlags) -> PursuitConfig {
    let mut config = PursuitConfig::new(rank).with_seed(solver.seed);
    config.power.max_iterations = solver.power_iters;
    config.power.gap_tolerance = solver.gap_tol;
    config.power.restarts = solver.restarts;
    config.weight_mode = WeightMode::FullRefit;
    config.correction = if solver.corrections > 0 {
        Correction::Cyclic(solver.corrections)
    } else {
        Correction::None
    };
    config.lmo_delta = solver.delta;
    config
}

fn validate_solver(solver: &SolverFlags) -> Result<(), CliError> {
    if solver.restarts == 0 {
        return Err(CliError::Usage("--restarts must be >= 1".into()));
    }
    if solver.power_iters == 0 {
        return Err(CliError::Usage("--power-iters must be >= 1".into()));
    }
    if let Some(delta) = solver.delta {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(CliError::Usage("--delta must lie in (0, 1]".into()));
        }
    }
    if solver.gap_tol.is_nan() || solver.gap_tol < 0.0 {
        return Err(CliError::Usage("--gap-tol must be >= 0".into()));
    }
    Ok(())
}

/// Structured factorization of a fully observed target.
pub fn run_factorize(opts: &FactorizeOptions) -> Result<FactorizeOutput, CliError> {
    let started = Instant::now();
    if opts.rank == 0 {
        return Err(CliError::Usage("--rank must be >= 1".into()));
    }
    validate_solver(&opts.solver)?;
    let symmetric = opts.symmetric || opts.mode.implies_symmetric();
    if opts.mode.requires_sparsity() && opts.sparsity_u.is_none() {
        return Err(CliError::Usage(format!(
            "--sparsity-u is required for mode {}",
            opts.mode.as_str()
        )));
    }
    if opts.mode == FactorizeMode::SparseNmf && !symmetric && opts.sparsity_v.is_none() {
        return Err(CliError::Usage(
            "--sparsity-v is required for mode sparse-nmf (or pass --symmetric)".into(),
        ));
    }

    let data = Dataset::load(&opts.input, opts.format)?;
    let load_secs = started.elapsed().as_secs_f64();
    let (n, m) = data.shape;

    let nonneg_u = opts.nonneg_u || opts.mode.base_non_negative();
    let nonneg_v = opts.nonneg_v || opts.mode.base_non_negative();
    let spec_u = AtomSpec::new(n, constraint_for(opts.sparsity_u, nonneg_u))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let spec_v = if symmetric {
        spec_u
    } else {
        AtomSpec::new(m, constraint_for(opts.sparsity_v, nonneg_v))
            .map_err(|e| CliError::Usage(e.to_string()))?
    };

    let problem = data.to_full_problem(symmetric)?;
    let config = build_pursuit_config(opts.rank, &opts.solver);

    let fit_started = Instant::now();
    let (model, trace) = gmp_fit(&problem, &spec_u, &spec_v, &config)?;
    let fit_secs = fit_started.elapsed().as_secs_f64();
    if trace.degenerate_target {
        return Err(CliError::Numerical(
            "the target is numerically zero; no atom can be extracted".into(),
        ));
    }

    let norm_sq = problem.observed_norm_squared();
    let cost = trace.final_cost();
    let metrics = Metrics {
        cost,
        reconstruction_error: (2.0 * cost).sqrt(),
        explained_variance_ratio: explained_variance(cost, norm_sq),
        model_rank: model.rank(),
        selected_rank: None,
        rmse_train: None,
        rmse_validation: None,
        rmse_test: None,
    };
    let report = RunReport {
        command: "factorize".into(),
        seed: opts.solver.seed,
        config: ConfigEcho {
            mode: opts.mode.as_str().into(),
            rank: opts.rank,
            spec_u,
            spec_v,
            symmetric,
            corrections: opts.solver.corrections,
            restarts: opts.solver.restarts,
            power_iters: opts.solver.power_iters,
            gap_tol: opts.solver.gap_tol,
            delta: opts.solver.delta,
            split: None,
            format: data.format,
        },
        dataset: DatasetSummary {
            path: opts.input.display().to_string(),
            shape: data.shape,
            observed: data.entries.len(),
            split_sizes: None,
        },
        trace: trace_rows(&trace),
        metrics,
        stop: format!("{:?}", trace.stop),
        timings: Timings {
            load_secs,
            fit_secs,
            total_secs: started.elapsed().as_secs_f64(),
        },
    };
    Ok(FactorizeOutput {
        factors: FactorFile::from_model(&model, spec_u, spec_v, symmetric),
        trace_csv: trace_csv(&report.trace),
        report,
        warnings: data.warnings,
    })
}

fn explained_variance(cost: f64, observed_norm_sq: f64) -> f64 {
    if observed_norm_sq == 0.0 {
        0.0
    } else {
        1.0 - 2.0 * cost / observed_norm_sq
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompleteMode {
    Plain,
    Sparse,
}

impl CompleteMode {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "plain" => Ok(Self::Plain),
            "sparse" => Ok(Self::Sparse),
            other => Err(CliError::Usage(format!(
                "unknown completion mode '{other}' (expected plain or sparse)"
            ))),
        }
    }

    fn as_str(&self) -> &'static str {
        match self {
            Self::Plain => "plain",
            Self::Sparse => "sparse",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompleteOptions {
    pub input: PathBuf,
    pub format: Option<SourceFormat>,
    pub mode: CompleteMode,
    pub rank: usize,
    pub split: (f64, f64, f64),
    pub sparsity_u: Option<usize>,
    pub sparsity_v: Option<usize>,
    pub solver: SolverFlags,
}

#[derive(Debug, Clone)]
pub struct CompleteOutput {
    pub report: RunReport,
    pub factors: FactorFile,
    pub trace_csv: String,
    pub warnings: Vec<String>,
}

/// Rating-matrix completion: fit on the training split, select the rank by
/// validation RMSE, optionally run correction passes on the selected model,
/// and report the test RMSE.
pub fn run_complete(opts: &CompleteOptions) -> Result<CompleteOutput, CliError> {
    let started = Instant::now();
    if opts.rank == 0 {
        return Err(CliError::Usage("--rank must be >= 1".into()));
    }
    validate_solver(&opts.solver)?;
    let (a, b, c) = opts.split;
    if a < 0.0 || b < 0.0 || c < 0.0 || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(CliError::Usage(
            "--split fractions must be non-negative and sum to 1".into(),
        ));
    }

    let data = Dataset::load(&opts.input, opts.format)?;
    let load_secs = started.elapsed().as_secs_f64();
    let (n, m) = data.shape;

    let tags = data.split(opts.split, opts.solver.seed);
    let mut split_sizes = (0usize, 0usize, 0usize);
    for tag in &tags {
        match tag {
            SplitTag::Train => split_sizes.0 += 1,
            SplitTag::Validation => split_sizes.1 += 1,
            SplitTag::Test => split_sizes.2 += 1,
        }
    }
    if split_sizes.0 == 0 {
        return Err(CliError::Usage("training split is empty".into()));
    }
    if split_sizes.1 == 0 || split_sizes.2 == 0 {
        return Err(CliError::Usage(
            "validation and test splits must be non-empty for rank selection and evaluation"
                .into(),
        ));
    }

    let select = |wanted: SplitTag| -> Vec<(usize, usize, f64)> {
        data.entries
            .iter()
            .zip(&tags)
            .filter(|(_, tag)| **tag == wanted)
            .map(|(&e, _)| e)
            .collect()
    };
    let train = select(SplitTag::Train);
    let validation = select(SplitTag::Validation);
    let test = select(SplitTag::Test);

    let spec_u = AtomSpec::new(n, constraint_for(opts.sparsity_u, false))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    // Sparse completion keeps the left factor dense; the right factor's
    // budget defaults to ceil(0.6 * m).
    let spec_v = match opts.mode {
        CompleteMode::Plain => AtomSpec::new(m, constraint_for(opts.sparsity_v, false)),
        CompleteMode::Sparse => {
            let q = opts
                .sparsity_v
                .unwrap_or_else(|| (0.6 * m as f64).ceil() as usize);
            AtomSpec::sparse(m, q)
        }
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;

    let problem = TargetProblem::masked((n, m), train.clone())
        .map_err(|e| CliError::Usage(e.to_string()))?;

    // Per-iteration corrections stay off so every trace prefix is a valid
    // rank-r model; corrections run once on the selected rank below.
    let mut config = build_pursuit_config(opts.rank, &opts.solver);
    config.correction = Correction::None;

    let fit_started = Instant::now();
    let (model, trace) = gmp_fit(&problem, &spec_u, &spec_v, &config)?;
    let fit_secs = fit_started.elapsed().as_secs_f64();
    if trace.degenerate_target {
        return Err(CliError::Numerical(
            "the training split is numerically zero; nothing to fit".into(),
        ));
    }

    // Rank selection: the trace prefix minimizing validation RMSE.
    let mut best_rank = 1;
    let mut best_rmse = f64::INFINITY;
    for record in &trace.records {
        let prefix = FactorModel::from_parts(
            model.terms()[..record.iteration].to_vec(),
            record.weights.clone(),
            (n, m),
        )
        .expect("trace prefixes are consistent");
        let rmse = rmse_over(&prefix, &validation).expect("validation split is non-empty");
        if rmse < best_rmse {
            best_rmse = rmse;
            best_rank = record.iteration;
        }
    }
    let selected_record = &trace.records[best_rank - 1];
    let mut selected = FactorModel::from_parts(
        model.terms()[..best_rank].to_vec(),
        selected_record.weights.clone(),
        (n, m),
    )
    .expect("trace prefixes are consistent");

    if opts.solver.corrections > 0 {
        let power = config.power.clone().with_seed(opts.solver.seed.wrapping_add(1));
        selected = correct_atoms(
            &problem,
            &selected,
            &spec_u,
            &spec_v,
            &power,
            opts.solver.corrections,
        )?;
    }

    let cost = crate::objective::cost(&problem, &selected).expect("shapes fixed above");
    let metrics = Metrics {
        cost,
        reconstruction_error: (2.0 * cost).sqrt(),
        explained_variance_ratio: explained_variance(cost, problem.observed_norm_squared()),
        model_rank: selected.rank(),
        selected_rank: Some(best_rank),
        rmse_train: rmse_over(&selected, &train),
        rmse_validation: rmse_over(&selected, &validation),
        rmse_test: rmse_over(&selected, &test),
    };
    let report = RunReport {
        command: "complete".into(),
        seed: opts.solver.seed,
        config: ConfigEcho {
            mode: opts.mode.as_str().into(),
            rank: opts.rank,
            spec_u,
            spec_v,
            symmetric: false,
            corrections: opts.solver.corrections,
            restarts: opts.solver.restarts,
            power_iters: opts.solver.power_iters,
            gap_tol: opts.solver.gap_tol,
            delta: opts.solver.delta,
            split: Some(opts.split),
            format: data.format,
        },
        dataset: DatasetSummary {
            path: opts.input.display().to_string(),
            shape: data.shape,
            observed: data.entries.len(),
            split_sizes: Some(split_sizes),
        },
        trace: trace_rows(&trace),
        metrics,
        stop: format!("{:?}", trace.stop),
        timings: Timings {
            load_secs,
            fit_secs,
            total_secs: started.elapsed().as_secs_f64(),
        },
    };
    Ok(CompleteOutput {
        factors: FactorFile::from_model(&selected, spec_u, spec_v, false),
        trace_csv: trace_csv(&report.trace),
        report,
        warnings: data.warnings,
    })
}

/// Root-mean-square prediction error over a coordinate set; `None` when the
/// set is empty.
pub fn rmse_over(model: &FactorModel, entries: &[(usize, usize, f64)]) -> Option<f64> {
    if entries.is_empty() {
        return None;
    }
    let sum_sq: f64 = entries
        .iter()
        .map(|&(r, c, v)| {
            let d = v - model.evaluate_at(r, c);
            d * d
        })
        .sum();
    Some((sum_sq / entries.len() as f64).sqrt())
}

#[derive(Debug, Clone)]
pub struct CoherenceOptions {
    pub input: PathBuf,
    pub format: Option<SourceFormat>,
    pub m_min: Option<usize>,
    pub m_max: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CoherenceOutput {
    pub csv: String,
    pub warnings: Vec<String>,
}

/// Cumulative coherence of a dictionary (rows of the input matrix are the
/// atoms), with the greedy-pursuit rate bound `1 - (1 - mu(m-1))/m` per `m`.
pub fn run_coherence(opts: &CoherenceOptions) -> Result<CoherenceOutput, CliError> {
    let data = Dataset::load(&opts.input, opts.format)?;
    let mut warnings = data.warnings.clone();
    let dense = data.to_dense();
    let atoms: Vec<_> = (0..dense.nrows())
        .map(|i| dense.row(i).transpose())
        .collect();
    let dict = crate::pursuit::FiniteDictionary::new(atoms)?;
    let dict = if dict.is_normalized() {
        dict
    } else {
        warnings.push("dictionary atoms were not unit-norm; normalized them".into());
        dict.normalize()?
    };

    let n = dict.len();
    if n < 2 {
        return Err(CliError::Usage(
            "coherence needs a dictionary of at least two atoms".into(),
        ));
    }
    let m_min = opts.m_min.unwrap_or(1);
    let m_max = opts.m_max.unwrap_or(n - 1);
    if m_min == 0 || m_min > m_max || m_max > n - 1 {
        return Err(CliError::Usage(format!(
            "m range [{m_min}, {m_max}] invalid for a dictionary of {n} atoms"
        )));
    }

    let profile = coherence_profile(&dict)?;
    let mut csv = String::from("m,mu,rate_bound\n");
    for m in m_min..=m_max {
        let bound = 1.0 - (1.0 - profile.mu(m - 1)) / m as f64;
        csv.push_str(&format!("{},{},{}\n", m, profile.mu(m), bound));
    }
    Ok(CoherenceOutput { csv, warnings })
}

// ── output emission ─────────────────────────────────────────────────────

/// Writes a fitting command's artifacts: to stdout when `out` is `None`,
/// otherwise `report.json`, `model.json` and `trace.csv` under `out`.
pub fn emit_fit_outputs(
    report: &RunReport,
    factors: &FactorFile,
    trace: &str,
    out: Option<&Path>,
) -> Result<(), CliError> {
    match out {
        None => {
            println!("{}", report.to_json());
            Ok(())
        }
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Parse(format!("cannot create {}: {e}", dir.display())))?;
            report::write_atomic(&dir.join("report.json"), &report.to_json())?;
            report::write_atomic(&dir.join("model.json"), &factors.to_json())?;
            report::write_atomic(&dir.join("trace.csv"), trace)?;
            Ok(())
        }
    }
}

pub fn emit_coherence_output(csv: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        None => {
            print!("{csv}");
            Ok(())
        }
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Parse(format!("cannot create {}: {e}", dir.display())))?;
            report::write_atomic(&dir.join("coherence.csv"), csv)
        }
    }
}

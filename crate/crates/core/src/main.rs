use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use matpursuit::cli::{
    self, dataset::SourceFormat, CliError, CoherenceOptions, CompleteMode, CompleteOptions,
    FactorizeMode, FactorizeOptions, SolverFlags,
};

#[derive(Parser)]
#[command(
    name = "matpursuit",
    version,
    about = "Structured low-rank factorization and completion by greedy rank-one pursuit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factorize a fully observed matrix over structured atoms
    Factorize(FactorizeArgs),
    /// Complete a partially observed rating matrix with rank selection on a
    /// validation split
    Complete(CompleteArgs),
    /// Cumulative coherence profile of a dictionary (rows = atoms)
    Coherence(CoherenceArgs),
}

#[derive(Args)]
struct CommonFlags {
    /// Input format (dense-csv, matrix-market, triples); sniffed when absent
    #[arg(long)]
    format: Option<String>,

    /// Atom-correction passes after each iteration (0 disables)
    #[arg(long, default_value_t = 0)]
    corrections: usize,

    /// Power-method restarts per oracle call
    #[arg(long, default_value_t = 5)]
    restarts: usize,

    /// Power-method iteration budget per restart
    #[arg(long, default_value_t = 250)]
    power_iters: usize,

    /// Relative stopping tolerance on the power-method gap
    #[arg(long, default_value_t = 1e-8)]
    gap_tol: f64,

    /// Degrade every oracle answer to multiplicative accuracy in (0, 1]
    #[arg(long)]
    delta: Option<f64>,

    /// Random seed
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output directory (report.json, model.json, trace.csv); stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonFlags {
    fn solver(&self) -> SolverFlags {
        SolverFlags {
            corrections: self.corrections,
            restarts: self.restarts,
            power_iters: self.power_iters,
            gap_tol: self.gap_tol,
            delta: self.delta,
            seed: self.seed,
        }
    }

    fn format(&self) -> Result<Option<SourceFormat>, CliError> {
        self.format.as_deref().map(str::parse).transpose()
    }
}

#[derive(Args)]
struct FactorizeArgs {
    /// Input matrix file
    input: PathBuf,

    /// Factorization mode: svd, sparse-pca, snn-pca, nmf, sparse-nmf
    #[arg(long, default_value = "svd")]
    mode: String,

    /// Rank budget
    #[arg(long)]
    rank: usize,

    /// Sparsity budget for the left factor
    #[arg(long)]
    sparsity_u: Option<usize>,

    /// Sparsity budget for the right factor
    #[arg(long)]
    sparsity_v: Option<usize>,

    /// Constrain the left factor to be non-negative
    #[arg(long, default_value_t = false)]
    nonneg_u: bool,

    /// Constrain the right factor to be non-negative
    #[arg(long, default_value_t = false)]
    nonneg_v: bool,

    /// Symmetric factorization (u = v); implied by sparse-pca and snn-pca
    #[arg(long, default_value_t = false)]
    symmetric: bool,

    #[command(flatten)]
    common: CommonFlags,
}

#[derive(Args)]
struct CompleteArgs {
    /// Input ratings (triples, matrix-market or dense CSV)
    input: PathBuf,

    /// Completion mode: plain or sparse (sparse right factor)
    #[arg(long, default_value = "plain")]
    mode: String,

    /// Rank budget; the reported rank is selected on the validation split
    #[arg(long)]
    rank: usize,

    /// Train,validation,test fractions
    #[arg(long, default_value = "0.5,0.2,0.3")]
    split: String,

    /// Sparsity budget for the left factor
    #[arg(long)]
    sparsity_u: Option<usize>,

    /// Sparsity budget for the right factor (sparse mode default: ceil(0.6 m))
    #[arg(long)]
    sparsity_v: Option<usize>,

    #[command(flatten)]
    common: CommonFlags,
}

#[derive(Args)]
struct CoherenceArgs {
    /// Dictionary file; rows are atoms
    input: PathBuf,

    /// Smallest m to report
    #[arg(long)]
    m_min: Option<usize>,

    /// Largest m to report
    #[arg(long)]
    m_max: Option<usize>,

    /// Input format override
    #[arg(long)]
    format: Option<String>,

    /// Output directory (coherence.csv); stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_split(text: &str) -> Result<(f64, f64, f64), CliError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("bad --split '{text}': {e}")))?;
    if parts.len() != 3 {
        return Err(CliError::Usage(
            "--split needs exactly three comma-separated fractions".into(),
        ));
    }
    Ok((parts[0], parts[1], parts[2]))
}

fn print_warnings(warnings: &[String]) {
    for warning in warnings {
        eprintln!("warning: {warning}");
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Factorize(args) => {
            let opts = FactorizeOptions {
                input: args.input,
                format: args.common.format()?,
                mode: FactorizeMode::parse(&args.mode)?,
                rank: args.rank,
                sparsity_u: args.sparsity_u,
                sparsity_v: args.sparsity_v,
                nonneg_u: args.nonneg_u,
                nonneg_v: args.nonneg_v,
                symmetric: args.symmetric,
                solver: args.common.solver(),
            };
            let output = cli::run_factorize(&opts)?;
            print_warnings(&output.warnings);
            cli::emit_fit_outputs(
                &output.report,
                &output.factors,
                &output.trace_csv,
                args.common.out.as_deref(),
            )
        }
        Command::Complete(args) => {
            let opts = CompleteOptions {
                input: args.input,
                format: args.common.format()?,
                mode: CompleteMode::parse(&args.mode)?,
                rank: args.rank,
                split: parse_split(&args.split)?,
                sparsity_u: args.sparsity_u,
                sparsity_v: args.sparsity_v,
                solver: args.common.solver(),
            };
            let output = cli::run_complete(&opts)?;
            print_warnings(&output.warnings);
            cli::emit_fit_outputs(
                &output.report,
                &output.factors,
                &output.trace_csv,
                args.common.out.as_deref(),
            )
        }
        Command::Coherence(args) => {
            let opts = CoherenceOptions {
                input: args.input,
                format: args.format.as_deref().map(str::parse).transpose()?,
                m_min: args.m_min,
                m_max: args.m_max,
            };
            let output = cli::run_coherence(&opts)?;
            print_warnings(&output.warnings);
            cli::emit_coherence_output(&output.csv, args.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("{error}");
            ExitCode::from(error.exit_code() as u8)
        }
    }
}

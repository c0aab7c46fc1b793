use clap::{Args, Parser, Subcommand, ValueEnum};

/// Incomplete-block regression sweeps and confidence sets of models.
#[derive(Debug, Parser)]
#[command(name = "coxset", version, about)]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the reduction alone and write the trace.
    Reduce(ReduceArgs),
    /// Test submodels of a given comprehensive set.
    Confset(ConfsetArgs),
    /// Reduction, model assessment and optional intervals in one pass.
    Pipeline(PipelineArgs),
    /// Screening or penalised comparator runs.
    Compare(CompareArgs),
    /// Seeded simulation experiments and data generation.
    Simulate(SimulateArgs),
    /// Run the verification suite and print one line per criterion.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: String,
    /// Response column name (default: the first column).
    #[arg(long)]
    pub response: Option<String>,
}

#[derive(Debug, Args, Clone)]
pub struct ReductionFlags {
    /// First-round array dimension.
    #[arg(long, default_value_t = 3)]
    pub dims1: usize,
    /// Second-round array dimension.
    #[arg(long, default_value_t = 2)]
    pub dims2: usize,
    /// First-round side override.
    #[arg(long)]
    pub k1: Option<usize>,
    /// Second-round side override.
    #[arg(long)]
    pub k2: Option<usize>,
    /// Second-round significance level.
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// Pairing threshold on absolute correlation.
    #[arg(long, default_value_t = 0.97)]
    pub pair_threshold: f64,
    /// Fraction of observations in the first-round/assessment part.
    #[arg(long, default_value_t = 0.35)]
    pub subsample: f64,
    /// Number of rerandomisation runs.
    #[arg(long = "rerand", default_value_t = 1)]
    pub rerandomisations: usize,
    /// Vote fraction across runs.
    #[arg(long, default_value_t = 0.5)]
    pub vote: f64,
    /// Error scale: a positive number for known sigma, or "estimate".
    #[arg(long, default_value = "estimate")]
    pub sigma: String,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub reduction: ReductionFlags,
    /// Output directory for the reports.
    #[arg(long)]
    pub output: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ConfsetArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated comprehensive set (column names or 0-based indices).
    #[arg(long)]
    pub members: String,
    #[arg(long, default_value_t = 0.05)]
    pub theta: f64,
    #[arg(long, default_value_t = 4)]
    pub smax: usize,
    #[arg(long, default_value = "estimate")]
    pub sigma: String,
    /// Enumeration budget.
    #[arg(long, default_value_t = 1_000_000)]
    pub budget: u64,
    #[arg(long)]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub reduction: ReductionFlags,
    #[arg(long, default_value_t = 0.05)]
    pub theta: f64,
    #[arg(long, default_value_t = 4)]
    pub smax: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub budget: u64,
    /// Comma-separated covariate values of a query point for prediction
    /// intervals (one value per covariate column).
    #[arg(long)]
    pub xnew: Option<String>,
    /// Interval level.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long)]
    pub output: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CompareMethod {
    Marginal,
    Lasso,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub method: CompareMethod,
    /// Target size of the retained set.
    #[arg(long)]
    pub shat: usize,
    #[arg(long)]
    pub output: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Experiment {
    /// Write a generated dataset as CSV.
    Generate,
    /// Spurious-correlation shrinkage across a sample-size grid.
    Spurious,
    /// First-round retention against the closed-form bound.
    Retention,
    /// Companion-count means against the closed forms.
    Companions,
    /// Confidence-set coverage and the exact null rate.
    Coverage,
    /// Mean likelihood-ratio statistic against df + noncentrality.
    Noncentral,
    /// Comparator contrasts in the correlated weak-signal regime.
    Contrast,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub experiment: Experiment,
    #[arg(long, default_value_t = 100)]
    pub replicates: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path: a CSV file for `generate`, a report directory otherwise.
    #[arg(long)]
    pub output: String,
    /// Rows of the generated dataset.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Columns of the generated dataset.
    #[arg(long, default_value_t = 125)]
    pub p: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run only the criteria with these ids (comma-separated).
    #[arg(long)]
    pub only: Option<String>,
}

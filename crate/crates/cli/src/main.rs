use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod tables;

/// Linked-shrinkage Bayesian regression with two-way interactions.
#[derive(Debug, Parser)]
#[command(name = "linkshrink", version)]
struct Cli {
    /// Worker threads (chains and replicate fits).
    #[arg(long, global = true, env = "LINKSHRINK_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model and write posterior summaries.
    Fit(FitArgs),
    /// Posterior Shapley values for individuals.
    Shapley(ExplainArgs),
    /// Global importance and personalized unit-change effects.
    Importance(ExplainArgs),
    /// Generate a synthetic dataset with known coefficients.
    Simulate(SimulateArgs),
    /// Run the evaluation protocol on synthetic data.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SamplerArgs {
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub keep: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// TOML file with default settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub response: Option<String>,
    #[arg(long)]
    pub variant: Option<String>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fit on the standardized response.
    #[arg(long)]
    pub standardize_response: bool,
    /// Also write every retained draw to draws.csv.
    #[arg(long)]
    pub dump_draws: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub fit: FitArgs,
    /// Output directory of an earlier `fit --dump-draws`.
    #[arg(long = "fit")]
    pub fit_dir: Option<PathBuf>,
    /// File with the individuals to explain.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub rows: Option<usize>,
    /// Comma-separated covariates to report.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Cross-check against exact subset enumeration.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long)]
    pub unit_effect: Option<String>,
    #[arg(long)]
    pub stratify: Option<String>,
    #[arg(long)]
    pub per_draw: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n_master: Option<usize>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long)]
    pub n_continuous: Option<usize>,
    #[arg(long)]
    pub n_binary: Option<usize>,
    /// Comma-separated level counts, one per categorical covariate.
    #[arg(long, value_delimiter = ',')]
    pub categorical_levels: Option<Vec<usize>>,
    #[arg(long)]
    pub n_noise: Option<usize>,
    /// `random` or `linked`.
    #[arg(long)]
    pub truth: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub synth: SynthArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<String>,
    #[command(flatten)]
    pub synth: SynthArgs,
    /// Number of training sets.
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub detection_subsets: Option<usize>,
    #[arg(long)]
    pub coverage_individuals: Option<usize>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure with its exit code: 2 for usage and data problems, 1 for
/// internal errors.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, kind: "usage", message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self { code: 1, kind: "internal", message: message.into() }
    }
}

impl From<linkshrink::Error> for CliError {
    fn from(e: linkshrink::Error) -> Self {
        Self { code: if e.is_internal() { 1 } else { 2 }, kind: e.kind(), message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: internal: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Shapley(a) => commands::shapley(&a),
        Command::Importance(a) => commands::importance(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.message.replace('\n', " ");
            eprintln!("error: {}: {message}", e.kind);
            ExitCode::from(e.code)
        }
    }
}

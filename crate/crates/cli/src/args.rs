use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "dcmmi", version, about = "LCDM estimation and modification indices")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "DCMMI_THREADS")]
    pub threads: Option<usize>,

    /// More progress output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Suppress warnings.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an LCDM-family model by marginal maximum likelihood.
    Fit(FitArgs),
    /// Modification indices for a fitted model.
    Mi(MiArgs),
    /// Posterior-mode classification of examinees.
    Classify(ClassifyArgs),
    /// Monte Carlo Type I error and power studies.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Lcdm,
    Dina,
    Mains,
    Custom,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub responses: PathBuf,
    #[arg(long)]
    pub qmatrix: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// Per-item effect masks (JSON); only with `--model custom`.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Highest order of the log-linear structural model (default: saturated).
    #[arg(long)]
    pub structural_order: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CandidatesArg {
    Qmatrix,
    Model,
    Both,
}

#[derive(Debug, Args)]
pub struct MiArgs {
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long)]
    pub responses: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub candidates: CandidatesArg,
    #[arg(long, default_value_t = 2)]
    pub max_order: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Number of tests for the Bonferroni level (default: indices computed).
    #[arg(long)]
    pub m_override: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub table: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long)]
    pub responses: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StudyArg {
    #[value(name = "type1-q")]
    Type1Q,
    #[value(name = "power-q")]
    PowerQ,
    #[value(name = "type1-dina")]
    Type1Dina,
    #[value(name = "power-dina")]
    PowerDina,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EffectArg {
    Large,
    Smaller,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub study: StudyArg,
    #[arg(long, value_enum)]
    pub effect: EffectArg,
    #[arg(long)]
    pub examinees: usize,
    #[arg(long)]
    pub reps: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

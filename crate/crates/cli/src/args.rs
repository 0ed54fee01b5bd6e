use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use musiclab_core::{Condition, PolicyKind, QualitySource};

#[derive(Debug, Parser)]
#[command(
    name = "musiclab",
    version,
    about = "Cultural market simulation with optimized song rankings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a scenario file with literal appeal, quality and visibility vectors.
    GenScenario(GenScenarioArgs),
    /// Run a multi-world simulation and write traces and a summary.
    Simulate(SimulateArgs),
    /// Print the performance ranking for one market state.
    Rank(RankArgs),
    /// Compute metric reports from one or more simulation output directories.
    Metrics(MetricsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    #[value(alias = "gaussian-independent")]
    Gaussian,
    NegativeCorrelation,
}

#[derive(Debug, Args)]
pub struct GenScenarioArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Appeal jitter for the negative-correlation kind.
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    DRank,
    PRank,
    RandRank,
}

impl From<PolicyArg> for PolicyKind {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::DRank => PolicyKind::DownloadRank,
            PolicyArg::PRank => PolicyKind::PerformanceRank,
            PolicyArg::RandRank => PolicyKind::RandomRank,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConditionArg {
    Si,
    In,
}

impl From<ConditionArg> for Condition {
    fn from(c: ConditionArg) -> Self {
        match c {
            ConditionArg::Si => Condition::SocialInfluence,
            ConditionArg::In => Condition::Independent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QualityArg {
    True,
    Estimated,
}

impl From<QualityArg> for QualitySource {
    fn from(q: QualityArg) -> Self {
        match q {
            QualityArg::True => QualitySource::TrueQuality,
            QualityArg::Estimated => QualitySource::EstimatedQuality,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub worlds: Option<u64>,
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long)]
    pub refresh_rate: Option<u64>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    #[arg(long, value_enum)]
    pub condition: Option<ConditionArg>,
    #[arg(long, value_enum)]
    pub quality: Option<QualityArg>,
    /// Worker threads; all available cores when absent.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory; overrides `output.dir` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Lfap,
    Parametric,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// TOML file with appeal, quality, visibility and optionally downloads, alpha, condition.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "lfap")]
    pub solver: SolverArg,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Simulation output directory; repeat to pool the worlds of several runs.
    #[arg(long, required = true)]
    pub traces: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
    /// Number of highest-quality songs in the estimation-error curve.
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    /// Skip worlds without downloads instead of failing.
    #[arg(long)]
    pub drop_empty_worlds: bool,
}

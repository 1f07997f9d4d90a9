use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "fairstream", version, about = "Fairness-aware streaming decision trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Prequential run of one learner; writes report, summary, tree dump and prediction log.
    Run(RunArgs),
    /// One prequential run per gamma value; writes a merged summary.
    SweepGamma(SweepGammaArgs),
    /// One prequential run per window size (ensemble window or drift-monitor window).
    SweepWindow(SweepWindowArgs),
    /// Runs two learners on the same stream and compares their decisions.
    Compare(CompareArgs),
    /// Trains a learner over the stream and writes its tree dump.
    DumpTree(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LearnerKind {
    /// Hoeffding tree (information gain)
    Ht,
    /// Fairness-aware Hoeffding tree (FIG)
    Faht,
    /// Fairness-aware Hoeffding tree with the adaptive criterion (AFIG)
    FahtAfig,
    /// Adaptive tree with drift monitoring and alternate subtrees
    Cfaht,
    /// Sliding-window ensemble
    Ensemble,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Ht => "ht",
            LearnerKind::Faht => "faht",
            LearnerKind::FahtAfig => "faht-afig",
            LearnerKind::Cfaht => "cfaht",
            LearnerKind::Ensemble => "ensemble",
        }
    }

    pub fn takes_gamma(self) -> bool {
        matches!(self, LearnerKind::FahtAfig | LearnerKind::Cfaht)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaseKind {
    Ht,
    Faht,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Data file (CSV, optionally .gz)
    #[arg(long)]
    pub data: PathBuf,
    /// Schema file
    #[arg(long)]
    pub schema: PathBuf,
    /// Reorder the stream by a nominal attribute (stable, missing values last)
    #[arg(long)]
    pub order_by: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub report_every: u64,
    /// Output directory
    #[arg(long, short)]
    pub output: PathBuf,
    /// Reserved; all learners are deterministic
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Fairness weight of the adaptive criterion (faht-afig, cfaht) [default: 1]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Hoeffding confidence
    #[arg(long, default_value_t = 1e-7)]
    pub delta: f64,
    /// Tie threshold
    #[arg(long, default_value_t = 0.05)]
    pub tau: f64,
    /// Instances between split attempts at a leaf
    #[arg(long, default_value_t = 200)]
    pub grace: u64,
    /// Candidate thresholds per numeric attribute
    #[arg(long, default_value_t = 10)]
    pub split_points: usize,
    /// Drift-monitor window W (cfaht) [default: 1000]
    #[arg(long)]
    pub window: Option<usize>,
    /// Drift-monitor confidence (cfaht) [default: 1e-5]
    #[arg(long)]
    pub drift_delta: Option<f64>,
    /// Disable drift monitoring and alternates (cfaht)
    #[arg(long)]
    pub no_monitor: bool,
    /// Instances per ensemble window w (ensemble) [default: 1000]
    #[arg(long)]
    pub ensemble_window: Option<usize>,
    /// Ensemble capacity E (ensemble) [default: 10]
    #[arg(long)]
    pub capacity: Option<usize>,
    /// Ensemble member learner (ensemble) [default: faht]
    #[arg(long, value_enum)]
    pub base: Option<BaseKind>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub learner: LearnerKind,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepGammaArgs {
    #[arg(long, value_enum, default_value = "faht-afig")]
    pub learner: LearnerKind,
    /// Comma-separated gamma values
    #[arg(long, value_delimiter = ',', default_value = "10000,1000,100,10,1")]
    pub gammas: Vec<f64>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepWindowArgs {
    /// ensemble sweeps w, cfaht sweeps the monitor window W
    #[arg(long, value_enum, default_value = "ensemble")]
    pub learner: LearnerKind,
    /// Comma-separated window sizes
    #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000,4000")]
    pub windows: Vec<usize>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long, value_enum)]
    pub learner_a: LearnerKind,
    #[arg(long, value_enum)]
    pub learner_b: LearnerKind,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "obswin",
    version,
    about = "Observability analysis for autonomous systems x' = f(x), y = h(x)",
    long_about = "Checks the rank condition on the stacked Lie derivatives, estimates the \
                  observation window needed to tell initial states apart, and builds a \
                  class-K lower bound on the windowed output energy.\n\n\
                  SYSTEM is a spec file path or the name of a built-in example \
                  (example1, example2-kink, example2-smooth, linear-contraction, double-integrator)."
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Seed for low-discrepancy shifts and multi-start points
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores)
    #[arg(long, global = true, env = "OBSWIN_JOBS")]
    pub jobs: Option<usize>,
    /// Directory for report files and their index
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// What to print on standard output
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Relative integration tolerance
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub rtol: f64,
    /// Absolute integration tolerance
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub atol: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Jacobian rank of the stacked Lie derivatives over sampled states
    Rank(RankCmd),
    /// First time the outputs of two initial states separate
    Distinguish(DistinguishCmd),
    /// Observation-window estimate over sampled pairs
    Window(WindowCmd),
    /// Minimal windowed output energy at each pair distance
    Alpha0(Alpha0Cmd),
    /// Class-K lower bound on the windowed output energy
    Kfun(KfunCmd),
    /// Full pipeline on a built-in example with its reference settings
    Reproduce(ReproduceCmd),
    /// Parse a spec file and report well-posedness warnings
    Validate(ValidateCmd),
}

#[derive(Debug, Clone, Args)]
pub struct RankOpts {
    /// Number of stacked output derivatives (default: state dimension)
    #[arg(long = "N")]
    pub order: Option<usize>,
    /// Relative singular-value threshold
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Grid points per axis
    #[arg(long)]
    pub grid: Option<usize>,
    /// Low-discrepancy sample count
    #[arg(long)]
    pub samples: Option<usize>,
    /// Distance to a conditional's switching surface treated as on the seam
    #[arg(long, default_value_t = 1e-9)]
    pub seam_margin: f64,
}

#[derive(Debug, Clone, Args)]
pub struct WindowOpts {
    /// Longest observation time tried
    #[arg(long = "Tmax", default_value_t = 10.0)]
    pub t_max: f64,
    /// Output distance that counts as distinguished
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    /// Smallest pair distance sampled
    #[arg(long)]
    pub rmin: Option<f64>,
    /// Pair plan: grid:K, lowdisc:M or boundary:M
    #[arg(long)]
    pub pairs: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SearchOpts {
    /// Observation horizon of the output energy
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    /// Increasing pair distances, comma separated
    #[arg(long, value_delimiter = ',')]
    pub rgrid: Vec<f64>,
    /// Multi-start count per distance
    #[arg(long, default_value_t = 32)]
    pub starts: usize,
    /// Objective evaluations per start
    #[arg(long, default_value_t = 400)]
    pub evals: usize,
}

#[derive(Debug, Args)]
pub struct RankCmd {
    pub system: String,
    #[command(flatten)]
    pub rank: RankOpts,
}

#[derive(Debug, Args)]
pub struct DistinguishCmd {
    pub system: String,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x1: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x2: Vec<f64>,
    #[arg(long = "Tmax", default_value_t = 10.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
}

#[derive(Debug, Args)]
pub struct WindowCmd {
    pub system: String,
    #[command(flatten)]
    pub window: WindowOpts,
    /// Distance ladder for the window curve, comma separated
    #[arg(long, value_delimiter = ',')]
    pub rgrid: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct Alpha0Cmd {
    pub system: String,
    #[command(flatten)]
    pub search: SearchOpts,
}

#[derive(Debug, Args)]
pub struct KfunCmd {
    pub system: String,
    #[command(flatten)]
    pub search: SearchOpts,
    #[command(flatten)]
    pub rank: RankOpts,
    #[command(flatten)]
    pub window: WindowOpts,
    /// Build the bound even when the rank or window check is negative
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct ReproduceCmd {
    pub name: String,
}

#[derive(Debug, Args)]
pub struct ValidateCmd {
    pub system: String,
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kflip_core::Backend;

#[derive(Debug, Parser)]
#[command(
    name = "kflip",
    version,
    about = "Exact mixing analysis of the lazy k-flip walk"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalue table with multiplicities.
    Spectrum(SpectrumArgs),
    /// Per-step total variation and l2 curve.
    Tv(TvArgs),
    /// Step counts and distance bounds, plus the examples-table reproduction.
    Bounds(BoundsArgs),
    /// Monte Carlo and exact coupling-time tails.
    Couple(CoupleArgs),
    /// Exact certificates for the probability lemmas and spectral claims.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Exact,
    Float,
    Auto,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Backend {
        match b {
            BackendArg::Exact => Backend::Exact,
            BackendArg::Float => Backend::Float,
            BackendArg::Auto => Backend::Auto,
        }
    }
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output format; defaults to csv for curves and json for reports.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file. Without it, KFLIP_OUT_DIR/<command>.<ext> if that
    /// variable is set, else stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    /// Switch to the (Z/mZ)^n walk.
    #[arg(long)]
    pub m: Option<usize>,
    /// Holding probability of the hypercube walk, as a rational like 1/2.
    #[arg(long, default_value = "1/2")]
    pub p: String,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct TvArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    /// Switch to the (Z/mZ)^n walk.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value = "1/2")]
    pub p: String,
    /// Last step of the curve; rows run over 0..=steps.
    #[arg(long)]
    pub steps: u64,
    #[arg(long, value_enum, default_value = "auto")]
    pub backend: BackendArg,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Also report the (Z/mZ)^n bounds.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    #[arg(long, value_enum, default_value = "auto")]
    pub backend: BackendArg,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct CoupleArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    /// Monte Carlo trials; 0 skips the simulation.
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Tail horizon and per-trial step cap.
    #[arg(long, default_value_t = 200)]
    pub steps: u64,
    /// Skip the exact absorbing-chain tail.
    #[arg(long)]
    pub no_exact: bool,
    #[arg(long, value_enum, default_value = "auto")]
    pub backend: BackendArg,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Lemma {
    Probineq,
    General,
    Eig34,
    Marginal,
    Symmetry,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Convention {
    Lazy,
    Move,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub lemma: Lemma,
    /// Single dimension to check.
    #[arg(long)]
    pub n: Option<usize>,
    /// Check every admissible dimension up to this one.
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Flip size (marginal check only).
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated lemma parts (general only).
    #[arg(long, value_delimiter = ',', default_values_t = vec![1u8, 2, 3, 4, 5, 6, 7, 8, 9])]
    pub parts: Vec<u8>,
    /// Whether probabilities include the 1/2 chance of holding.
    #[arg(long, value_enum, default_value = "lazy")]
    pub convention: Convention,
    #[command(flatten)]
    pub output: Output,
}

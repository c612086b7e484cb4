use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ffsense_core::experiment::OutputFormat;
use ffsense_core::measurement::{Distribution, Normalization};
use ffsense_core::signals::AmplitudeLaw;
use serde::Deserialize;

const AFTER_HELP: &str = "\
Seeds: generated collections use --seed directly; signals, matrices and noise use
fixed streams derived from it, so a pipeline of files reproduces an inline run.
Threads: RAYON_NUM_THREADS (default: logical cores).
Exit codes: 0 success, 1 computation failed, 2 config error, 3 I/O error.";

#[derive(Debug, Parser)]
#[command(name = "ffsense", version, about = "Block-sparse recovery on fusion frames", after_help = AFTER_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Subspace collections.
    #[command(subcommand)]
    Frames(FramesCmd),
    /// Block-sparse signals.
    #[command(subcommand)]
    Signal(SignalCmd),
    /// Measurement matrices and measurements.
    #[command(subcommand)]
    Measure(MeasureCmd),
    /// Mixed l2,1 recovery.
    #[command(subcommand)]
    Recover(RecoverCmd),
    /// Restricted isometry constants.
    #[command(subcommand)]
    Rip(RipCmd),
    /// Measurement bounds.
    #[command(subcommand)]
    Bounds(BoundsCmd),
    /// Seeded parameter sweeps.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
}

#[derive(Debug, Subcommand)]
pub enum FramesCmd {
    /// Generate a collection.
    Gen(InstanceArgs),
    /// Coherence, packing diameter and the coherence floor of a collection.
    Coherence(InstanceArgs),
}

#[derive(Debug, Subcommand)]
pub enum SignalCmd {
    /// Draw an s-sparse signal on a collection.
    Gen(InstanceArgs),
}

#[derive(Debug, Subcommand)]
pub enum MeasureCmd {
    /// Draw an m x N measurement matrix.
    Sample(InstanceArgs),
    /// Measure a signal: y = (A (x) I_d) x, plus optional noise of norm --eta.
    Apply(InstanceArgs),
}

#[derive(Debug, Subcommand)]
pub enum RecoverCmd {
    /// Equality-constrained recovery.
    Eq(InstanceArgs),
    /// Noise-constrained recovery with radius --eta.
    Noisy(InstanceArgs),
}

#[derive(Debug, Subcommand)]
pub enum RipCmd {
    /// Exact fusion RIP constant by support enumeration.
    Exact(InstanceArgs),
    /// Monte Carlo lower bound from --trials random supports.
    Mc(InstanceArgs),
}

#[derive(Debug, Subcommand)]
pub enum BoundsCmd {
    /// Evaluate every bound at one parameter point.
    Eval(BoundsArgs),
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCmd {
    /// Recovery success over a sparsity x measurement grid.
    Phase(ExperimentArgs),
    /// Recovery error as a function of the noise level.
    Noise(ExperimentArgs),
    /// FRIP constants over a sparsity x measurement grid.
    Frip(ExperimentArgs),
    /// Reference bounds over the sparsity grid.
    Bounds(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyArg {
    Random,
    Orthogonal,
    Angle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistributionArg {
    Gaussian,
    Bernoulli,
    UniformScaled,
}

impl From<DistributionArg> for Distribution {
    fn from(d: DistributionArg) -> Self {
        match d {
            DistributionArg::Gaussian => Distribution::Gaussian,
            DistributionArg::Bernoulli => Distribution::Bernoulli,
            DistributionArg::UniformScaled => Distribution::UniformScaled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizationArg {
    /// Scale 1/sqrt(m).
    InvSqrtRows,
    None,
}

impl From<NormalizationArg> for Normalization {
    fn from(n: NormalizationArg) -> Self {
        match n {
            NormalizationArg::InvSqrtRows => Normalization::InvSqrtRows,
            NormalizationArg::None => Normalization::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AmplitudeArg {
    UnitNormBlocks,
    GaussianBlocks,
}

impl From<AmplitudeArg> for AmplitudeLaw {
    fn from(a: AmplitudeArg) -> Self {
        match a {
            AmplitudeArg::UnitNormBlocks => AmplitudeLaw::UnitNormBlocks,
            AmplitudeArg::GaussianBlocks => AmplitudeLaw::GaussianBlocks,
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON settings file; flags on the command line take precedence.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Ambient dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Subspace dimension.
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of subspaces.
    #[arg(long = "N", value_name = "N")]
    pub n: Option<usize>,
    /// Sparsity; experiments take a comma-separated grid.
    #[arg(long, value_delimiter = ',')]
    pub s: Vec<usize>,
    /// Number of measurements; experiments take a comma-separated grid.
    #[arg(long, value_delimiter = ',')]
    pub m: Vec<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// Everything needed to build or load a single instance.
#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    #[command(flatten)]
    pub common: Common,
    /// Collection file; generated from --d --k --N --seed when absent.
    #[arg(long, value_name = "PATH")]
    pub collection: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Angle of the angle family, radians.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Matrix file; drawn as m x N when absent.
    #[arg(long, value_name = "PATH")]
    pub matrix: Option<PathBuf>,
    /// Signal file; drawn s-sparse when absent.
    #[arg(long, value_name = "PATH")]
    pub signal: Option<PathBuf>,
    /// Measurement vector file; computed from the signal when absent.
    #[arg(long, value_name = "PATH")]
    pub measurements: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub distribution: Option<DistributionArg>,
    #[arg(long, value_enum)]
    pub normalization: Option<NormalizationArg>,
    #[arg(long, value_enum)]
    pub amplitude: Option<AmplitudeArg>,
    /// Noise norm; the constraint radius for noisy recovery.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Sampled supports for Monte Carlo RIP.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol_gap: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Coherence; the coherence floor for (d, k, N) when absent.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Subgaussian parameter of the ensemble.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Target isometry constant of the scalar bound.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Failure probability.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Log exponent of the nonuniform bound.
    #[arg(long)]
    pub beta: Option<u32>,
    /// Universal constant.
    #[arg(long)]
    pub c: Option<f64>,
    /// Fusion coherence of the matrix.
    #[arg(long)]
    pub mu_f: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Angle grid of the angle family, radians.
    #[arg(long, value_delimiter = ',')]
    pub theta: Vec<f64>,
    /// Noise grid.
    #[arg(long, value_delimiter = ',')]
    pub eta: Vec<f64>,
    /// Trials per cell.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, value_enum)]
    pub distribution: Option<DistributionArg>,
    /// Draw a fresh random collection for every trial.
    #[arg(long)]
    pub resample_collection: bool,
}

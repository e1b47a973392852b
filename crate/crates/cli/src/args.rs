use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use varfilt::harness::FilterSpec;

#[derive(Debug, Parser)]
#[command(name = "varfilt", version, about = "Space-variant variance-reduction filtering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build or inspect filter bank files.
    #[command(subcommand)]
    Bank(BankCommand),
    /// Maximum cumulative and incremental VRP per iteration.
    Tables(TablesArgs),
    /// Apply the space-variant filter to a raster.
    Filter(FilterArgs),
    /// Build variance reduction ratio maps.
    #[command(subcommand)]
    Vrr(VrrCommand),
    /// Gaussian variance-equalization experiment.
    Test1(Test1Args),
    /// Poisson after-log variance experiment.
    Test2(Test2Args),
    /// Edge-preserving denoising: edge VRR map, recursive filter, blend.
    Denoise(DenoiseArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Fixed,
    Recursive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Grad,
    Pm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum QSourceArg {
    Measured,
    Expected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CountSourceArg {
    Expected,
    PerPixel,
}

#[derive(Debug, Subcommand)]
pub enum BankCommand {
    /// Precompute a bank and write it to a bank file.
    Build(BankBuildArgs),
    /// Print a bank file as text.
    Dump(BankDumpArgs),
}

#[derive(Debug, Args)]
pub struct BankBuildArgs {
    /// Kernel half-width; kernels are (2L+1)x(2L+1).
    #[arg(long = "L", default_value_t = 1)]
    pub half_width: usize,
    #[arg(long, value_enum, default_value_t = Mode::Recursive)]
    pub mode: Mode,
    #[arg(long, default_value_t = varfilt::filterbank::DEFAULT_BINS)]
    pub bins: usize,
    /// Use the closed-form inversion (3x3 recursive banks only).
    #[arg(long)]
    pub closed_form: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BankDumpArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    /// Comma-separated half-widths.
    #[arg(long = "L", value_delimiter = ',', default_values_t = [1, 2, 3])]
    pub half_widths: Vec<usize>,
    #[arg(long, default_value_t = 8)]
    pub iters: usize,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Input raster (FRAW or PGM).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Ratio map (FRAW).
    #[arg(long)]
    pub q: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Recursive)]
    pub mode: Mode,
    #[arg(long = "L", default_value_t = 1)]
    pub half_width: usize,
    #[arg(long, default_value_t = varfilt::svfilter::DEFAULT_Q_MIN)]
    pub q_min: f64,
    #[arg(long, default_value_t = varfilt::svfilter::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long, default_value_t = varfilt::filterbank::DEFAULT_BINS)]
    pub bins: usize,
    /// Bank file from `bank build`; built on the fly when omitted.
    #[arg(long)]
    pub bank: Option<PathBuf>,
    /// Take the natural log of the filtered output.
    #[arg(long)]
    pub log_after: bool,
    /// Values are raised to this floor before `--log-after`.
    #[arg(long, default_value_t = 0.5)]
    pub log_floor: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-iteration CSV report (recursive mode).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum VrrCommand {
    /// `q = v / target` from a variance map.
    Variance(VrrVarianceArgs),
    /// `q = 1 / (counts · target)` from pre-log counts.
    Counts(VrrCountsArgs),
    /// Edge-adaptive map from image gradients.
    Edge(VrrEdgeArgs),
}

#[derive(Debug, Args)]
pub struct VrrVarianceArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub target: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VrrCountsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub target: f64,
    /// Raise counts to this floor instead of rejecting non-positive counts.
    #[arg(long)]
    pub floor: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct EdgeArgs {
    /// Noise variance of the input image.
    #[arg(long)]
    pub v0: f64,
    #[arg(long, value_enum, default_value_t = Method::Grad)]
    pub method: Method,
    /// Perona-Malik multiplier; defaults to the cap.
    #[arg(long)]
    pub strength: Option<f64>,
    #[arg(long, default_value_t = varfilt::vrrmaps::DEFAULT_Q_CAP)]
    pub q_cap: f64,
    #[arg(long, default_value_t = varfilt::vrrmaps::DEFAULT_EPSILON)]
    pub epsilon: f64,
}

#[derive(Debug, Args)]
pub struct VrrEdgeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub edge: EdgeArgs,
    /// Smooth with a 3x3 box before taking the gradient.
    #[arg(long)]
    pub presmooth: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 128)]
    pub sample_dim: usize,
    #[arg(long, default_value_t = 100)]
    pub roi: usize,
    #[arg(long, default_value_t = varfilt::filterbank::DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long, default_value_t = varfilt::svfilter::DEFAULT_Q_MIN)]
    pub q_min: f64,
    #[arg(long, default_value_t = varfilt::svfilter::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Test1Args {
    /// `fixed:K` or `recursive:K`.
    #[arg(long, default_value = "recursive:3")]
    pub filter: FilterSpec,
    #[arg(long, default_value_t = 100)]
    pub repeats: usize,
    #[arg(long, default_value_t = 200)]
    pub n_samples: usize,
    #[arg(long, default_value_t = 1.0)]
    pub v_target: f64,
    #[arg(long, value_enum, default_value_t = QSourceArg::Measured)]
    pub q_source: QSourceArg,
    #[command(flatten)]
    pub common: ExperimentArgs,
}

#[derive(Debug, Args)]
pub struct Test2Args {
    #[arg(long, default_value = "recursive:3")]
    pub filter: FilterSpec,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long, default_value_t = 100)]
    pub n_samples: usize,
    #[arg(long, default_value_t = 10.0)]
    pub lambda_min: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub lambda_max: f64,
    /// After-log target variance; `1 / lambda-max` when omitted.
    #[arg(long)]
    pub u_target: Option<f64>,
    #[arg(long, value_enum, default_value_t = CountSourceArg::Expected)]
    pub count_source: CountSourceArg,
    #[arg(long, default_value_t = 0.5)]
    pub log_floor: f64,
    #[command(flatten)]
    pub common: ExperimentArgs,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub edge: EdgeArgs,
    /// Skip the 3x3 box smoothing before the gradient.
    #[arg(long)]
    pub no_presmooth: bool,
    /// Weight of the original image in the output.
    #[arg(long, default_value_t = 0.0)]
    pub blend: f64,
    #[arg(long = "L", default_value_t = 1)]
    pub half_width: usize,
    #[arg(long, default_value_t = varfilt::svfilter::DEFAULT_Q_MIN)]
    pub q_min: f64,
    #[arg(long, default_value_t = varfilt::svfilter::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long, default_value_t = varfilt::filterbank::DEFAULT_BINS)]
    pub bins: usize,
    /// Also write the ratio map (FRAW).
    #[arg(long)]
    pub q_out: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

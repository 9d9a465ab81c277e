use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rpr_core::ScanOrder;

#[derive(Debug, Parser)]
#[command(
    name = "rpr3",
    version,
    about = "Joint-space singularity analysis for 3-RPR planar manipulators"
)]
pub struct Cli {
    /// Worker threads for the parallel kernels (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Read and print angles in degrees instead of radians. Data files are always radians.
    #[arg(long, global = true)]
    pub degrees: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Singular curves of one constant-rho1 slice.
    Slice(SliceArgs),
    /// Singularity surface as a stack of slices.
    Sweep(SweepArgs),
    /// Largest singularity-free cube around a starting center.
    Maxbox(MaxboxArgs),
    /// Workspace image of a box report by direct kinematics.
    Image(ImageArgs),
    /// Singularity diagnostics for one pose or joint vector.
    Check(CheckArgs),
    /// Re-run the command recorded in a manifest and compare outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScanArg {
    Theta,
    Alpha,
    Both,
}

impl From<ScanArg> for ScanOrder {
    fn from(s: ScanArg) -> Self {
        match s {
            ScanArg::Theta => ScanOrder::ThetaOuter,
            ScanArg::Alpha => ScanOrder::AlphaOuter,
            ScanArg::Both => ScanOrder::Both,
        }
    }
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Samples of theta1 over one turn.
    #[arg(long, default_value_t = 720)]
    pub n_theta1: usize,
    /// Samples of alpha over one turn.
    #[arg(long, default_value_t = 720)]
    pub n_alpha: usize,
    /// Root refinement tolerance on the residual.
    #[arg(long, default_value_t = 1e-10)]
    pub tol_root: f64,
    /// Accepted range of rho2 and rho3, as MIN:MAX.
    #[arg(long, default_value = "1e-9:50", value_parser = parse_pair)]
    pub rho_bounds: [f64; 2],
    /// Which grid variable is scanned for roots.
    #[arg(long, value_enum, default_value_t = ScanArg::Both)]
    pub scan: ScanArg,
}

#[derive(Debug, Args)]
pub struct SliceArgs {
    /// Geometry config file.
    pub geometry: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub rho1: f64,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Output CSV; the manifest is written next to it.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write a gnuplot script to this path.
    #[arg(long)]
    pub gnuplot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub geometry: PathBuf,
    /// Slice positions as START:END:STEP.
    #[arg(long, default_value = "0:50:0.5", allow_hyphen_values = true, value_parser = parse_range)]
    pub rho1: [f64; 3],
    #[command(flatten)]
    pub grid: GridArgs,
    /// Output CSV; the manifest is written next to it.
    #[arg(short, long)]
    pub output: PathBuf,
    /// PLY output (default: the CSV path with a .ply extension).
    #[arg(long)]
    pub ply: Option<PathBuf>,
    #[arg(long)]
    pub gnuplot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MaxboxArgs {
    /// Cloud CSV written by `sweep`.
    pub cloud: PathBuf,
    /// Starting center RHO1,RHO2,RHO3.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_triple)]
    pub center: [f64; 3],
    #[arg(long, default_value_t = 0.1)]
    pub security: f64,
    /// Search domain LO1,LO2,LO3:HI1,HI2,HI3 (default: from the cloud's manifest).
    #[arg(long, allow_hyphen_values = true, value_parser = parse_domain)]
    pub domain: Option<[[f64; 3]; 2]>,
    #[arg(long, default_value_t = 1.0)]
    pub initial_step: f64,
    #[arg(long, default_value_t = 0.5)]
    pub reduction: f64,
    #[arg(long, default_value_t = 0.125)]
    pub min_step: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    /// Re-slice the box's joint ranges for this geometry and report singular points inside it.
    #[arg(long, value_name = "GEOMETRY")]
    pub verify: Option<PathBuf>,
    #[arg(long, default_value_t = 0.25, requires = "verify")]
    pub verify_step: f64,
    #[arg(long, default_value_t = 1440, requires = "verify")]
    pub verify_grid: usize,
    /// Box report (TOML).
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImageArgs {
    pub geometry: PathBuf,
    /// Box report written by `maxbox`.
    pub report: PathBuf,
    /// Grid points per joint axis.
    #[arg(long, default_value_t = 25)]
    pub n: usize,
    #[arg(long, default_value_t = 3600)]
    pub alpha_grid: usize,
    /// Workspace CSV.
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long)]
    pub ply: Option<PathBuf>,
    #[arg(long)]
    pub gnuplot: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Target {
    /// Pose X,Y,ALPHA.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_triple)]
    pub pose: Option<[f64; 3]>,
    /// Joint vector RHO1,RHO2,RHO3.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_triple)]
    pub joints: Option<[f64; 3]>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub geometry: PathBuf,
    #[command(flatten)]
    pub target: Target,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

fn parse_numbers(s: &str, sep: char) -> Result<Vec<f64>, String> {
    s.split(sep)
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("{t:?} is not a number"))
        })
        .collect()
}

pub fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    parse_numbers(s, ',')?
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected 3 comma-separated numbers, got {}", v.len()))
}

pub fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    parse_numbers(s, ':')?
        .try_into()
        .map_err(|_| "expected MIN:MAX".to_string())
}

pub fn parse_range(s: &str) -> Result<[f64; 3], String> {
    parse_numbers(s, ':')?
        .try_into()
        .map_err(|_| "expected START:END:STEP".to_string())
}

pub fn parse_domain(s: &str) -> Result<[[f64; 3]; 2], String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or("expected LO1,LO2,LO3:HI1,HI2,HI3")?;
    Ok([parse_triple(lo)?, parse_triple(hi)?])
}

//! `wl1`: command-line front end for weighted ℓ1 recovery.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

mod commands;
mod config;

#[derive(Debug)]
pub enum CliError {
    /// Invalid flag or argument value.
    Domain(String),
    /// Missing or unreadable input, unwritable output, malformed file.
    Io(String),
    /// The single solve did not converge; the report was already printed.
    NotConverged,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Io(_) => 2,
            CliError::NotConverged => 3,
        }
    }
}

impl From<wl1_core::Error> for CliError {
    fn from(e: wl1_core::Error) -> Self {
        use wl1_core::Error as E;
        match e {
            E::Io(_) | E::Format { .. } => CliError::Io(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "wl1", version, about = "Weighted l1 recovery with partial support information")]
pub struct Cli {
    /// File of `key = value` lines (keys are long flag names of the subcommand);
    /// flags on the command line take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Recovery-condition constants, the reduced condition and the bound grid.
    Theory(TheoryArgs),
    /// Solve one weighted basis-pursuit-denoise problem.
    Solve(SolveArgs),
    /// Sparse-signal sweep over measurement counts (presets fig4a, fig4b).
    SweepSparse(SweepArgs),
    /// Sparse-signal sweep over estimate sizes (presets fig5a, fig5b).
    SweepRho(SweepArgs),
    /// Compressible-signal sweep (presets fig6, fig7, fig8).
    SweepCompressible(SweepArgs),
    /// Block-wise recovery of an 8-bit grayscale frame sequence.
    Video(VideoArgs),
    /// Block-wise recovery of a 16-bit mono WAV stream over a grid of weights.
    Audio(AudioArgs),
    /// Exact restricted isometry constant of a small Gaussian matrix.
    Rip(RipArgs),
}

#[derive(Args, Debug)]
pub struct TheoryArgs {
    /// Oversize factor a > 1.
    #[arg(long, default_value_t = 3.0)]
    pub a: f64,
    /// Sparsity k >= 1; a·k must be an integer.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Relative estimate size rho >= 0.
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    /// Estimate accuracy alpha in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Weight omega in [0, 1] on the estimate.
    #[arg(long, default_value_t = 0.5)]
    pub omega: f64,
    /// RIP constant of order a·k, in [0, 1).
    #[arg(long)]
    pub delta_ak: Option<f64>,
    /// RIP constant of order (a+1)·k, in [0, 1).
    #[arg(long)]
    pub delta_a1k: Option<f64>,
    /// Shorthand setting both RIP constants, in [0, 1); also the grid's delta.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Emit the (omega, alpha, rho) grid of delta_hat and bound constants as CSV.
    #[arg(long)]
    pub grid: bool,
    /// Estimate sizes of the grid, comma separated, each >= 0.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
    pub grid_rhos: Vec<f64>,
    /// Number of evenly spaced omega values in [0, 1] (>= 2).
    #[arg(long, default_value_t = 11)]
    pub grid_omegas: usize,
    /// Number of evenly spaced alpha values in [0, 1] (>= 2).
    #[arg(long, default_value_t = 21)]
    pub grid_alphas: usize,
    /// Print the largest admissible u/k of the reduced condition.
    #[arg(long)]
    pub reduced_u: bool,
    /// RIP constant of order 2k in [0, 1) for --reduced-u.
    #[arg(long)]
    pub delta2k: Option<f64>,
    /// CSV of (label, delta_name, value) rows; with --reduced-u each delta_2k row is evaluated.
    #[arg(long, value_name = "PATH")]
    pub delta_csv: Option<PathBuf>,
    /// Print the root of the modified-CS condition with no unknown support.
    #[arg(long)]
    pub vaswani_root: bool,
    /// Write CSV output here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Measurement matrix CSV, one row per line. Without it a synthetic instance is drawn.
    #[arg(long, value_name = "PATH", requires = "y")]
    pub matrix: Option<PathBuf>,
    /// Measurement vector file (numbers separated by commas or newlines).
    #[arg(long, value_name = "PATH", requires = "matrix")]
    pub y: Option<PathBuf>,
    /// Weight file with entries in [0, 1]; overrides --estimate/--omega.
    #[arg(long, value_name = "PATH")]
    pub weights: Option<PathBuf>,
    /// Support estimate as comma-separated indices in [0, N) (file mode).
    #[arg(long, value_delimiter = ',')]
    pub estimate: Option<Vec<usize>>,
    /// Weight in [0, 1] on the estimate.
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    /// Residual bound epsilon >= 0 (defaults: 0 in file mode, the noise norm in synthetic mode).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Synthetic: ambient dimension N >= 1.
    #[arg(long, default_value_t = 256)]
    pub signal_len: usize,
    /// Synthetic: number of measurements n >= 1.
    #[arg(long, default_value_t = 128)]
    pub measurements: usize,
    /// Synthetic: sparsity k in [1, N].
    #[arg(long, default_value_t = 16)]
    pub k: usize,
    /// Synthetic: relative estimate size rho >= 0.
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    /// Synthetic: estimate accuracy alpha in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Synthetic: noise norm as a fraction >= 0 of the signal norm.
    #[arg(long, default_value_t = 0.0)]
    pub noise_fraction: f64,
    /// Seed for every random draw.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Inner iteration budget per ball radius (>= 1).
    #[arg(long, default_value_t = 10_000)]
    pub max_inner: usize,
    /// Outer iteration budget (>= 1).
    #[arg(long, default_value_t = 100)]
    pub max_outer: usize,
    /// Relative optimality tolerance > 0.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Use the penalized fallback instead of Pareto root finding.
    #[arg(long)]
    pub penalized: bool,
    /// Write the solution here, one value per line.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Named experiment grid (defaults: fig4a, fig5a, fig6 for the three sweeps).
    #[arg(long)]
    pub preset: Option<String>,
    /// Base seed of the sweep.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trials per cell (>= 1), overriding the preset.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Weights in [0, 1], comma separated, overriding the preset.
    #[arg(long, value_delimiter = ',')]
    pub omegas: Option<Vec<f64>>,
    /// Estimate accuracies in [0, 1], comma separated, overriding the preset.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Per-trial CSV output.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Optional per-cell mean/std CSV.
    #[arg(long, value_name = "PATH")]
    pub aggregate: Option<PathBuf>,
    /// Optional wide plot-data CSV (one column per omega).
    #[arg(long, value_name = "PATH")]
    pub plot: Option<PathBuf>,
    /// Worker threads (>= 1); results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct VideoArgs {
    /// Raw planar 8-bit frames. Without it, use --synthetic.
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Generate a correlated synthetic sequence instead of reading one.
    #[arg(long, conflicts_with = "input")]
    pub synthetic: bool,
    /// Frame height, even and >= 2.
    #[arg(long, default_value_t = 144)]
    pub height: usize,
    /// Frame width, even and >= 2.
    #[arg(long, default_value_t = 176)]
    pub width: usize,
    /// Number of frames >= 1.
    #[arg(long, default_value_t = 30)]
    pub frames: usize,
    /// Synthetic: fraction in (0, 1) of nonzero DCT coefficients per quadrant.
    #[arg(long, default_value_t = 0.12)]
    pub sparsity: f64,
    /// Sample fraction of the first frame, in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub n0: f64,
    /// Sample fraction of later frames, in (0, 1].
    #[arg(long, default_value_t = 1.0 / 2.2)]
    pub nj: f64,
    /// Weight in [0, 1] on the carried-over estimate (1 gives standard l1).
    #[arg(long, default_value_t = 0.5)]
    pub omega: f64,
    /// Energy share in (0, 1] kept by the support rule.
    #[arg(long, default_value_t = 0.97)]
    pub energy: f64,
    /// Seed for the sample positions (and the synthetic sequence).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Metrics CSV (index,n_meas,omega,psnr_db); stdout when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Write the recovered frames (rounded to 8 bits) as raw planar data.
    #[arg(long, value_name = "PATH")]
    pub recovered: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AudioArgs {
    /// 16-bit PCM mono WAV input. Without it, use --synthetic.
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Generate a speech-like synthetic stream instead of reading one.
    #[arg(long, conflicts_with = "input")]
    pub synthetic: bool,
    /// Synthetic: number of blocks >= 1.
    #[arg(long, default_value_t = 8)]
    pub blocks: usize,
    /// Synthetic: sample rate in Hz (>= 1).
    #[arg(long, default_value_t = 44_100)]
    pub sample_rate: u32,
    /// Block length N >= 1; the tail beyond whole blocks is dropped.
    #[arg(long, default_value_t = 2048)]
    pub block_len: usize,
    /// Fraction in (0, 1] of samples kept.
    #[arg(long, default_value_t = 0.25)]
    pub fraction: f64,
    /// Weights in [0, 1], comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0,0.16666666666666666,0.3333333333333333,0.5,0.6666666666666666,0.8333333333333334,1"
    )]
    pub omegas: Vec<f64>,
    /// Bins at or below this frequency (Hz, >= 0) join the estimate.
    #[arg(long, default_value_t = 4000.0)]
    pub cutoff: f64,
    /// The n_j/divisor largest previous-block coefficients join the estimate (>= 1).
    #[arg(long, default_value_t = 16)]
    pub topk_divisor: usize,
    /// Seed for the sample positions (and the synthetic stream).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Metrics CSV (block,n_meas,omega,snr_db); stdout when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Write the recovery at the best weight as WAV.
    #[arg(long, value_name = "PATH")]
    pub recovered: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RipArgs {
    /// Rows n >= 1.
    #[arg(long)]
    pub n: usize,
    /// Columns N >= k.
    #[arg(long = "N")]
    pub cols: usize,
    /// Sparsity order k >= 1.
    #[arg(long)]
    pub k: usize,
    /// Seed of the Gaussian draw.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse(mut argv: Vec<OsString>) -> Result<Cli, (CliError, Option<clap::Error>)> {
    let root = Cli::command().mut_subcommands(|s| s.args_override_self(true));
    if let Some(path) = config::take_config_path(&mut argv).map_err(|e| (e, None))? {
        config::merge(&mut argv, &path, &root).map_err(|e| (e, None))?;
    }
    let matches = root
        .try_get_matches_from(argv)
        .map_err(|e| (CliError::Domain(String::new()), Some(e)))?;
    Cli::from_arg_matches(&matches).map_err(|e| (CliError::Domain(String::new()), Some(e)))
}

fn main() -> ExitCode {
    let cli = match parse(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err((_, Some(e))) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
        Err((e, None)) => return report(e),
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    match &e {
        CliError::Domain(m) => eprintln!("error: {m}"),
        CliError::Io(m) => eprintln!("error: {m}"),
        CliError::NotConverged => eprintln!("error: solver did not converge"),
    }
    ExitCode::from(e.exit_code())
}

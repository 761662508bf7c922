//! `gap-minmax`: gap eigenvalues of split operators and radial Dirac
//! channels, with verification suites and CSV/JSON artifacts.
//!
//! Exit codes: 0 success, 1 usage error, 2 hypothesis or bracket failure,
//! 3 failed property or invariant (a `replay.txt` is left in the output
//! directory).

mod artifacts;
mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Settings;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "gap-minmax", version, about = "Min-max eigenvalues in spectral gaps", allow_negative_numbers = true)]
struct Cli {
    /// Flat `key = value` file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for artifacts [default: out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run batches on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

/// Channel, potential and grid selection shared by the Dirac subcommands.
#[derive(Debug, Args, Default)]
pub struct ChannelArgs {
    /// Spin-orbit quantum number, a nonzero integer [default: -1].
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<i32>,
    /// Coulomb coupling ν in [0, 1) [default: 0.5].
    #[arg(long)]
    pub nu: Option<f64>,
    /// Rest mass m [default: 1].
    #[arg(long)]
    pub mass: Option<f64>,
    /// Regularization ε of −ν/(r+ε); 0 means the pure Coulomb potential.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Two-column table `r v` of a bounded potential added to −ν/r.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Table interpolation: linear or cubic [default: linear].
    #[arg(long)]
    pub interp: Option<String>,
    /// B-spline order of the upper component.
    #[arg(long)]
    pub order: Option<usize>,
    /// Number of grid intervals.
    #[arg(long)]
    pub intervals: Option<usize>,
    /// Ratio between consecutive interval lengths.
    #[arg(long)]
    pub stretch: Option<f64>,
    /// Outer radius of the box.
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Use the refined grid preset.
    #[arg(long)]
    pub refined: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Gap eigenvalues of one radial Dirac channel.
    Solve {
        #[command(flatten)]
        channel: ChannelArgs,
        /// talman or free-energy [default: talman].
        #[arg(long)]
        split: Option<String>,
        /// Number of levels [default: 1].
        #[arg(long)]
        kmax: Option<usize>,
        /// Bisection tolerance [default: 1e-10].
        #[arg(long)]
        tol: Option<f64>,
        /// Also write the split operator as `matrix.txt`.
        #[arg(long)]
        export_matrix: bool,
    },
    /// Dense-oracle fuzzing and energy-ordering property suites.
    Verify {
        #[command(flatten)]
        channel: ChannelArgs,
        /// Number of random admissible operators checked against the dense oracle.
        #[arg(long)]
        fuzz: Option<usize>,
        /// Operator dimension, `n` or `lo:hi` [default: 4:40].
        #[arg(long)]
        dim: Option<String>,
        /// Number of property samples.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Check one operator from a matrix file.
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Run the energy-ordering properties on a Dirac channel.
        #[arg(long)]
        channel_properties: bool,
    },
    /// Coupling-constant sweep of the regularized potential, or an
    /// ε-refinement with `--refine`.
    Sweep {
        #[command(flatten)]
        channel: ChannelArgs,
        /// `lo:hi:step` [default: 0:0.9:0.1].
        #[arg(long)]
        nu_grid: Option<String>,
        #[arg(long)]
        refine: bool,
        /// Descending ε values for `--refine` [default: 0.2,0.1,0.05,0.01].
        #[arg(long)]
        eps_list: Option<String>,
    },
    /// Hardy-type inequality margins on a family of test functions.
    Hardy {
        #[command(flatten)]
        channel: ChannelArgs,
        /// random, bumps or ground [default: random].
        #[arg(long)]
        family: Option<String>,
        /// Family size [default: 200].
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Bump support radii for `--family bumps` [default: 1,0.5,0.25,0.125].
        #[arg(long)]
        scales: Option<String>,
    },
    /// Gap eigenvalues of an operator given in the matrix text format.
    Matrix {
        /// Matrix file (`dim_plus dim_minus` header, then A and optionally S).
        #[arg(long)]
        file: Option<PathBuf>,
        /// Number of levels [default: all].
        #[arg(long)]
        kmax: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Prints JSON artifacts as plain-text tables.
    Report {
        /// JSON files written by the other subcommands.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Solve { .. } => "solve",
            Self::Verify { .. } => "verify",
            Self::Sweep { .. } => "sweep",
            Self::Hardy { .. } => "hardy",
            Self::Matrix { .. } => "matrix",
            Self::Report { .. } => "report",
        }
    }
}

fn run(cli: Cli, args: &[String]) -> Result<(), CliError> {
    let settings = Settings::load(cli.config.as_deref())?;
    let out: PathBuf = settings.or("out", cli.out, PathBuf::from("out"))?;
    let execution = if settings.switch("sequential", cli.sequential)? {
        gap_minmax::Execution::Sequential
    } else {
        gap_minmax::Execution::Parallel
    };
    let ctx = commands::Context { settings, out, execution, command: cli.command.name(), args };
    match cli.command {
        Command::Solve { channel, split, kmax, tol, export_matrix } => {
            commands::solve(&ctx, &channel, split, kmax, tol, export_matrix)
        }
        Command::Verify { channel, fuzz, dim, samples, seed, matrix, channel_properties } => {
            commands::verify(&ctx, &channel, commands::VerifyArgs { fuzz, dim, samples, seed, matrix, channel_properties })
        }
        Command::Sweep { channel, nu_grid, refine, eps_list } => {
            commands::sweep(&ctx, &channel, nu_grid, refine, eps_list)
        }
        Command::Hardy { channel, family, count, seed, scales } => {
            commands::hardy(&ctx, &channel, family, count, seed, scales)
        }
        Command::Matrix { file, kmax, tol } => commands::matrix(&ctx, file, kmax, tol),
        Command::Report { inputs } => report::print(&inputs),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version requests are not errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli, &args[1..]) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

//! Command-line front end of the `bethe` binary.
//!
//! Every command reads an optional `key = value` configuration (see
//! [`config`]), runs its checks and writes a JSON report to `--out` or
//! standard output. The process exits with 0 when the report passes, 1 when
//! it fails and 2 on errors.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_check_r, cmd_identities, cmd_offshell, cmd_rules, cmd_solve, GlobalOptions};
pub use config::RunConfig;
pub use report::{Report, ResidualSummary};

use crate::error::{BetheError, Result};

/// Environment variable capping the worker threads.
pub const THREADS_VAR: &str = "BETHE_THREADS";

/// Exit code of a run whose checks failed.
pub const EXIT_FAIL: i32 = 1;
/// Exit code of a run that stopped on an error.
pub const EXIT_ERROR: i32 = 2;

/// Numerical algebraic Bethe ansatz checks and solvers.
#[derive(Debug, Parser)]
#[command(name = "bethe", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

/// Flags shared by every command.
#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Configuration file with `key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Tolerance override (checks 1e-10, identities 1e-9, Bethe equations 1e-12).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Number of random samples.
    #[arg(long, global = true, default_value_t = commands::DEFAULT_SAMPLES)]
    pub samples: usize,
    /// Seed of every random stream.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write spectra as CSV with header `sector,index,re,im`.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    /// Suppress the one-line verdict on standard error.
    #[arg(long, global = true)]
    pub quiet: bool,
}

/// Available commands.
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ice rule, Yang-Baxter, unitarity and regularity of the R-matrix.
    CheckR,
    /// Weight identity suite and amplitude property checks.
    Identities,
    /// Solve the Bethe equations for `n` particles.
    Solve {
        /// Compare with exact diagonalization of the transfer matrix.
        #[arg(long)]
        spectrum: bool,
    },
    /// Off-shell action of the diagonal monodromy elements on the configured roots.
    Offshell,
    /// Generate and lattice-check all commutation rules.
    Rules,
}

impl Command {
    /// Name used in reports.
    pub fn name(&self) -> &'static str {
        match self {
            Command::CheckR => "check-r",
            Command::Identities => "identities",
            Command::Solve { .. } => "solve",
            Command::Offshell => "offshell",
            Command::Rules => "rules",
        }
    }
}

/// Reads `BETHE_THREADS` and sizes the global worker pool.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| BetheError::InvalidOption(format!("{THREADS_VAR} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| BetheError::InvalidOption(format!("{THREADS_VAR}: {e}")))
}

/// Runs the parsed command and returns its report.
pub fn execute(cli: &Cli) -> Result<Report> {
    let cfg = match &cli.global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let opts = GlobalOptions {
        tol: cli.global.tol,
        samples: cli.global.samples,
        seed: cli.global.seed,
        spectrum: matches!(cli.command, Command::Solve { spectrum: true }),
    };
    match cli.command {
        Command::CheckR => cmd_check_r(&cfg, &opts),
        Command::Identities => cmd_identities(&cfg, &opts),
        Command::Solve { .. } => cmd_solve(&cfg, &opts),
        Command::Offshell => cmd_offshell(&cfg, &opts),
        Command::Rules => cmd_rules(&cfg, &opts),
    }
}

/// Executes the command, writes its outputs and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let outcome = configure_threads().and_then(|()| execute(cli)).and_then(|report| {
        match &cli.global.out {
            Some(path) => report.write_json(path)?,
            None => print!("{}", report.to_json()?),
        }
        if let Some(path) = &cli.global.csv {
            let file = std::fs::File::create(path).map_err(|e| BetheError::Io(format!("{}: {e}", path.display())))?;
            report.write_csv(file)?;
        }
        Ok(report)
    });
    match outcome {
        Ok(report) => {
            if !cli.global.quiet {
                eprintln!(
                    "{}: {} (max residual {:.3e})",
                    report.command,
                    if report.pass { "PASS" } else { "FAIL" },
                    report.residual_summary.max
                );
            }
            if report.pass {
                0
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {}: {e}", cli.command.name());
            EXIT_ERROR
        }
    }
}

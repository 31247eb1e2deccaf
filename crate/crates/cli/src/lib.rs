//! Command-line driver: problem files in, JSON and CSV artifacts out.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::Outcome;
pub use config::{Overrides, Problem};
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "varexp", version, about = "Variable-exponent problem checker and solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Problem file (TOML).
    #[arg(long, global = true)]
    pub problem: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Partition threshold.
    #[arg(long, global = true)]
    pub eta: Option<f64>,

    /// Constant exponent of the reduction (main problems).
    #[arg(long, global = true)]
    pub p1: Option<f64>,

    /// Dimension used in the exponent conditions.
    #[arg(long = "analysis-dim", global = true)]
    pub analysis_dim: Option<usize>,

    /// Node counts, `129` or `65x33`.
    #[arg(long, global = true)]
    pub grid: Option<config::NodeList>,

    /// Seed of the sampled hypothesis checks.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Solver tolerance on the scaled residual.
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    /// Solve even when hypothesis checks fail.
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Verify the hypotheses of the problem.
    Check,
    /// Solve the discrete problem.
    Solve,
    /// Norms of the function in the [norms] section.
    Norms,
    /// Write the reduced constant-exponent problem.
    Transform,
    /// Grid refinement study.
    Study,
}

impl Command {
    pub fn label(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Solve => "solve",
            Command::Norms => "norms",
            Command::Transform => "transform",
            Command::Study => "study",
        }
    }
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            eta: self.eta,
            p1: self.p1,
            analysis_dim: self.analysis_dim,
            grid: self.grid.as_ref().map(|g| g.0.clone()),
            seed: self.seed,
            tol: self.tol,
            force: self.force,
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let path = cli
        .problem
        .as_ref()
        .ok_or_else(|| CliError::Config("--problem <path> is required".into()))?;
    let problem = Problem::load(path, cli.overrides())?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Check => commands::cmd_check(&problem, out),
        Command::Solve => commands::cmd_solve(&problem, out),
        Command::Norms => commands::cmd_norms(&problem, out),
        Command::Transform => commands::cmd_transform(&problem, out),
        Command::Study => commands::cmd_study(&problem, out),
    }
}

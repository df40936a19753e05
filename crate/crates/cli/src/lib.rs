//! `hedger`: run configuration, command dispatch and trajectory files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod table;

use std::ffi::OsString;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, Subcommand};

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "hedger",
    version,
    about = "Plan and check Vega hedging schedules"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for CSV and JSON outputs.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Check the configuration and report model warnings.
    Validate(CommonArgs),
    /// Frozen Vegas, target ratios and market view.
    Greeks(CommonArgs),
    /// Optimal trajectory (closed form or Hamiltonian shooting).
    Plan(CommonArgs),
    /// Direct-transcription trajectory and its gap to the plan.
    Oracle(CommonArgs),
    /// Monte-Carlo mean-variance estimate of the plan.
    Simulate(CommonArgs),
    /// Paired Monte-Carlo comparison of the plan against a baseline.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// `linear`, `immediate`, or a trajectory CSV file.
        #[arg(long, default_value = "linear")]
        baseline: Baseline,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Validate,
    Greeks,
    Plan,
    Oracle,
    Simulate,
    Compare { baseline: Baseline },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Baseline {
    Linear,
    Immediate,
    File(PathBuf),
}

impl FromStr for Baseline {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "linear" => Baseline::Linear,
            "immediate" => Baseline::Immediate,
            other => Baseline::File(PathBuf::from(other)),
        })
    }
}

impl CliCommand {
    fn split(self) -> (Command, CommonArgs) {
        match self {
            CliCommand::Validate(c) => (Command::Validate, c),
            CliCommand::Greeks(c) => (Command::Greeks, c),
            CliCommand::Plan(c) => (Command::Plan, c),
            CliCommand::Oracle(c) => (Command::Oracle, c),
            CliCommand::Simulate(c) => (Command::Simulate, c),
            CliCommand::Compare { common, baseline } => (Command::Compare { baseline }, common),
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
/// Output file paths go to stdout, diagnostics to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (command, common) = cli.command.split();
    match execute(&command, &common) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("hedger: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command, common: &CommonArgs) -> Result<Vec<PathBuf>, CliError> {
    let mut config = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.run.seed = seed;
    }
    commands::ensure_out_dir(&common.out)?;
    let ctx = commands::Context {
        config,
        out: common.out.clone(),
    };
    commands::run(command, &ctx)
}

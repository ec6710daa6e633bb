//! `pmd`: solve tabular MDPs with policy mirror descent, run the stochastic
//! variant with online certificates, validate policies offline and
//! regenerate the benchmark tables.

mod bench;
mod env;
mod output;
mod solve;
mod stochastic;
mod validate;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use env::EnvArgs;

#[derive(Parser, Debug)]
#[command(
    name = "pmd",
    version,
    about = "Policy mirror descent with advantage-gap certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a deterministic solver (PMD or policy iteration).
    Solve(solve::SolveArgs),
    /// Run stochastic PMD with online certificates.
    Spmd(stochastic::SpmdArgs),
    /// Offline certificate for a fixed policy from fresh samples.
    Validate(validate::ValidateArgs),
    /// Regenerate the iteration-count or validation tables.
    Bench(bench::BenchArgs),
    /// Write a built environment in the MDP JSON format.
    Export(ExportArgs),
}

#[derive(clap::Args, Debug, Serialize)]
struct ExportArgs {
    #[command(flatten)]
    env: EnvArgs,
    /// GridWorld placement seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub const EXIT_NOT_CONVERGED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INVALID_MODEL: u8 = 3;
pub const EXIT_ZERO_MU_H: u8 = 4;

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn invalid_model(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID_MODEL,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::runtime(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<pmd_core::Error> for CliError {
    fn from(e: pmd_core::Error) -> Self {
        use pmd_core::Error as E;
        let code = match &e {
            E::InvalidModel(_)
            | E::InvalidPolicy(_)
            | E::NotInSimplex(_)
            | E::ShapeMismatch(_)
            | E::SingularSystem { .. }
            | E::DivergenceUndefined { .. }
            | E::Json(_) => EXIT_INVALID_MODEL,
            E::InvalidConfig(_)
            | E::InvalidStep(_)
            | E::UnsupportedProx(_)
            | E::ZeroInitialGap(_)
            | E::ScheduleExhausted { .. }
            | E::RegularizedModel(_)
            | E::Empty(_) => EXIT_USAGE,
            E::Io(_) => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn export(args: &ExportArgs) -> Result<(), CliError> {
    let model = args.env.build(args.seed)?;
    pmd_core::envs::save_mdp(&model, &args.out).map_err(|e| match e {
        pmd_core::Error::Io(io) => CliError::io(&args.out, io),
        e => e.into(),
    })?;
    println!(
        "wrote {} states x {} actions to {}",
        model.num_states(),
        model.num_actions(),
        args.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => solve::run(a),
        Command::Spmd(a) => stochastic::run(a),
        Command::Validate(a) => validate::run(a),
        Command::Bench(a) => bench::run(a),
        Command::Export(a) => export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

//! Command-line front end: problem files in, compiled programs, run
//! reports, transient traces and netlists out.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
mod error;
pub mod problem;
pub mod report;

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "thermoflow",
    version,
    about = "Thermal-flow coprocessor simulator"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for randomized validation suites.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Include a direct-computation oracle in run reports.
    #[arg(long, global = true)]
    pub oracle: bool,
    /// Leave timing metadata out of reports (for reproducible output).
    #[arg(long, global = true)]
    pub no_timing: bool,
    /// Write the main output here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a problem file into a device configuration document.
    Compile(commands::compile::CompileArgs),
    /// Encode, solve and decode; print a run report.
    Run(commands::run::RunArgs),
    /// Sample the relaxation of a device toward its stationary state.
    Transient(commands::transient::TransientArgs),
    /// Build the electrical analogue and export it as a netlist.
    Circuit(commands::circuit::CircuitArgs),
    /// Run the randomized self-check suites.
    Validate(commands::validate::ValidateArgs),
}

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Compile(args) => commands::compile::execute(args, g),
        Command::Run(args) => commands::run::execute(args, g),
        Command::Transient(args) => commands::transient::execute(args, g),
        Command::Circuit(args) => commands::circuit::execute(args, g),
        Command::Validate(args) => commands::validate::execute(args, g),
    }
}

/// Send the main output to `--output` or stdout.
pub(crate) fn emit(global: &GlobalArgs, text: &str) -> Result<()> {
    match &global.output {
        Some(path) => fs::write(path, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

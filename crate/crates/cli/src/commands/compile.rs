use std::path::PathBuf;

use clap::Args;

use crate::problem::{load, CompiledForm};
use crate::{emit, GlobalArgs, Result};

#[derive(Debug, Args)]
pub struct CompileArgs {
    /// Problem file (JSON).
    pub input: PathBuf,
}

pub fn execute(args: &CompileArgs, global: &GlobalArgs) -> Result<()> {
    let doc = load(&args.input)?;
    let settings = doc.problem.settings();
    for (label, config) in doc.devices() {
        eprintln!(
            "{label}: K = {} modes, n = {} reservoirs (drain included)",
            config.mode_count(),
            config.reservoir_count()
        );
    }
    let spread = match &doc.compiled {
        CompiledForm::Unsigned { program } => {
            program.groups.iter().map(|g| g.spread).fold(0.0, f64::max)
        }
        CompiledForm::Signed { program } => program
            .parts()
            .flat_map(|p| p.program.groups.iter().map(|g| g.spread))
            .fold(0.0, f64::max),
        CompiledForm::Raw { .. } => 0.0,
    };
    eprintln!(
        "drain ratio ε = {:e}, group tolerance = {:e}, max group spread = {spread:e}",
        settings.drain_ratio, settings.group_tol
    );
    let mut text = serde_json::to_string_pretty(&doc).expect("document serializes");
    text.push('\n');
    emit(global, &text)
}

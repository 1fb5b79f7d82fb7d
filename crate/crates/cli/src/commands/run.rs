use std::path::PathBuf;

use clap::Args;

use crate::problem::load;
use crate::report::{build, render};
use crate::{emit, GlobalArgs, Result};

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Problem file or compiled document.
    pub input: PathBuf,
}

pub fn execute(args: &RunArgs, global: &GlobalArgs) -> Result<()> {
    let doc = load(&args.input)?;
    let report = build(&doc, global.oracle, !global.no_timing)?;
    if let Some(oracle) = &report.oracle {
        if oracle.within_bound == Some(false) {
            log::warn!("decoded values fall outside the reported error bound");
        }
    }
    emit(global, &render(&report))
}

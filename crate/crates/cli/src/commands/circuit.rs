use std::path::PathBuf;

use clap::Args;

use thermoflow_core::circuit::{
    build_crossbar, export_netlist, oqs_to_star, star_currents, BarPolicy,
};
use thermoflow_core::physics::{stationary_flows, DeviceConfig};

use crate::problem::load;
use crate::{emit, GlobalArgs, Result};

#[derive(Debug, Args)]
pub struct CircuitArgs {
    /// Problem file or compiled document.
    pub input: PathBuf,
    /// Bar potentials: `max`, `fixed:<Φ>`, `fixed:<Φ0>,<Φ1>,...` or
    /// `grouped:<tol>`. Defaults to the problem's policy.
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long, default_value = "spice")]
    pub format: String,
    /// Which device of a signed program (0 = positive part).
    #[arg(long, default_value_t = 0)]
    pub part: usize,
    /// Export the star circuit of this mode instead of the crossbar.
    #[arg(long)]
    pub star: Option<usize>,
}

/// max over modes and wires of |I·ω − J|, and the same relative to max |J|.
pub fn analogy_residual(config: &DeviceConfig) -> thermoflow_core::Result<(f64, f64)> {
    let flows = stationary_flows(config)?;
    let mut worst = 0.0_f64;
    for k in 0..config.mode_count() {
        let star = oqs_to_star(config, k)?;
        for (&j, i) in star.terminals().iter().zip(star_currents(&star)) {
            worst = worst.max((i * config.frequency(k) - flows.per_channel[k][j]).abs());
        }
    }
    let scale = flows.max_abs();
    Ok((worst, if scale > 0.0 { worst / scale } else { worst }))
}

pub fn execute(args: &CircuitArgs, global: &GlobalArgs) -> Result<()> {
    let doc = load(&args.input)?;
    let config = doc.device(args.part)?;
    let (residual, relative) = analogy_residual(config)?;

    let text = if let Some(mode) = args.star {
        export_netlist(&oqs_to_star(config, mode)?, &args.format)?
    } else {
        let policy_text = args
            .policy
            .clone()
            .unwrap_or_else(|| doc.problem.settings().policy.clone());
        let policy: BarPolicy = policy_text.parse()?;
        let crossbar = build_crossbar(config, &policy)?;
        let netlist = export_netlist(&crossbar, &args.format)?;
        eprintln!("policy: {policy_text}");
        eprintln!(
            "crossbar drop-equation residual: {:e}",
            crossbar.max_bar_residual()
        );
        let negative = crossbar.negative_resistors();
        if !negative.is_empty() {
            log::warn!(
                "{} branches need negative series resistance (first: mode {}, reservoir {})",
                negative.len(),
                negative[0].0,
                negative[0].1
            );
        }
        eprintln!("negative series resistors: {}", negative.len());
        netlist
    };
    emit(global, &text)?;
    eprintln!("max |I·ω − J| residual: {residual:e} (relative {relative:e})");
    Ok(())
}

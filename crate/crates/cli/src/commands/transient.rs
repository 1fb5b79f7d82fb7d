use std::path::PathBuf;

use clap::Args;

use thermoflow_core::dynamics::{evolve, reservoir_sweep, settling_time, sweep_spread, SweepMode};

use crate::problem::{load, require};
use crate::{emit, CliError, GlobalArgs, Result};

#[derive(Debug, Args)]
pub struct TransientArgs {
    /// Problem file or compiled document.
    #[arg(required_unless_present = "sweep_n")]
    pub input: Option<PathBuf>,
    /// End of the sampled interval.
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long, default_value_t = 101)]
    pub samples: usize,
    /// Settling tolerance; defaults to the problem's rel_tol.
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Which device of a signed program (0 = positive part).
    #[arg(long, default_value_t = 0)]
    pub part: usize,
    /// Initial occupancies, comma separated; one value is broadcast.
    /// Defaults to the vacuum state.
    #[arg(long)]
    pub initial: Option<String>,
    /// Settling-time sweep over bath counts: `2..64` (doubling) or `2,4,8`.
    #[arg(long, conflicts_with_all = ["input", "t_end", "initial"])]
    pub sweep_n: Option<String>,
    /// Total rate Γ (fixed-total sweep) and per-link rate (fixed-link sweep).
    #[arg(long, default_value_t = 1.0)]
    pub sweep_rate: f64,
}

pub fn execute(args: &TransientArgs, global: &GlobalArgs) -> Result<()> {
    if let Some(spec) = &args.sweep_n {
        return sweep(args, spec, global);
    }
    let doc = load(&require(&args.input, "transient")?)?;
    let config = doc.device(args.part)?;
    let t_end = args
        .t_end
        .ok_or_else(|| CliError::Usage("--t-end is required".into()))?;
    let rel_tol = args.rel_tol.unwrap_or(doc.problem.settings().rel_tol);
    let initial = match &args.initial {
        None => vec![0.0; config.mode_count()],
        Some(text) => parse_initial(text, config.mode_count())?,
    };
    let trace = evolve(config, &initial, t_end, args.samples)?;

    let mut out = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["time".to_string()];
    header.extend((0..config.mode_count()).map(|k| format!("n_{k}")));
    header.extend((0..config.reservoir_count()).map(|j| format!("J_{j}")));
    out.write_record(&header)?;
    for ((t, occ), flows) in trace.times.iter().zip(&trace.occupancies).zip(&trace.flows) {
        let row = std::iter::once(t)
            .chain(occ)
            .chain(flows)
            .map(|x| format!("{x:e}"));
        out.write_record(row)?;
    }
    emit(global, &csv_text(out)?)?;

    let settle = settling_time(config, &initial, rel_tol)?;
    eprintln!("settling time: {settle} (rel_tol {rel_tol:e})");
    if settle > t_end {
        eprintln!("note: the trace ends before the device settles");
    }
    Ok(())
}

fn parse_initial(text: &str, modes: usize) -> Result<Vec<f64>> {
    let values = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<f64>, _>>()
        .map_err(|e| CliError::Usage(format!("--initial: {e}")))?;
    match values.len() {
        1 => Ok(vec![values[0]; modes]),
        n if n == modes => Ok(values),
        n => Err(CliError::Usage(format!(
            "--initial has {n} values for {modes} modes"
        ))),
    }
}

/// `a..b` doubles from a up to b; otherwise a comma-separated list.
pub fn parse_counts(spec: &str) -> Result<Vec<usize>> {
    let bad = || CliError::Usage(format!("--sweep-n: cannot parse '{spec}'"));
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        if lo == 0 || hi < lo {
            return Err(bad());
        }
        let mut counts = Vec::new();
        let mut n = lo;
        while n <= hi {
            counts.push(n);
            n *= 2;
        }
        Ok(counts)
    } else {
        spec.split(',')
            .map(|v| v.trim().parse().map_err(|_| bad()))
            .collect()
    }
}

fn sweep(args: &TransientArgs, spec: &str, global: &GlobalArgs) -> Result<()> {
    let counts = parse_counts(spec)?;
    let rel_tol = args
        .rel_tol
        .unwrap_or(thermoflow_core::dynamics::DEFAULT_SETTLING_TOL);
    let fixed_total =
        reservoir_sweep(&counts, args.sweep_rate, SweepMode::FixedTotalRate, rel_tol)?;
    let fixed_link = reservoir_sweep(&counts, args.sweep_rate, SweepMode::FixedLinkRate, rel_tol)?;

    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record([
        "baths",
        "settling_fixed_total_rate",
        "settling_fixed_link_rate",
    ])?;
    for (a, b) in fixed_total.iter().zip(&fixed_link) {
        out.write_record([
            a.baths.to_string(),
            format!("{:e}", a.settling_time),
            format!("{:e}", b.settling_time),
        ])?;
    }
    emit(global, &csv_text(out)?)?;
    eprintln!(
        "max spread, fixed total rate: {:.3e}",
        sweep_spread(&fixed_total)
    );
    eprintln!(
        "max spread, fixed link rate: {:.3e}",
        sweep_spread(&fixed_link)
    );
    Ok(())
}

fn csv_text(out: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = out
        .into_inner()
        .map_err(|e| CliError::Write(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

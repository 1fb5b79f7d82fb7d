//! Randomized self-checks of the whole pipeline.

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thermoflow_core::circuit::{build_crossbar, BarPolicy};
use thermoflow_core::compiler::{decode_matvec, encode_matvec, EncodingSettings};
use thermoflow_core::dynamics::evolve;
use thermoflow_core::physics::{
    entropy_scale, stationary_flows, stationary_flows_pairwise, DeviceConfig,
};
use thermoflow_core::random;

use super::circuit::analogy_residual;
use crate::{emit, CliError, GlobalArgs, Result};

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Cases per suite.
    #[arg(long, default_value_t = 200)]
    pub cases: usize,
}

struct Suite {
    name: &'static str,
    /// Worst observed value of the checked quantity and its limit.
    worst: f64,
    limit: f64,
}

impl Suite {
    fn new(name: &'static str, limit: f64) -> Self {
        Suite {
            name,
            worst: 0.0,
            limit,
        }
    }

    fn observe(&mut self, value: f64) {
        // NaN counts as a failure
        if value.is_nan() || value > self.worst {
            self.worst = value;
        }
    }

    fn passed(&self) -> bool {
        self.worst <= self.limit
    }
}

/// Largest term ω γ max n feeding any channel.
fn term_scale(config: &DeviceConfig) -> thermoflow_core::Result<f64> {
    let mut scale = 0.0_f64;
    for k in 0..config.mode_count() {
        let max_n = config.occupancies(k)?.into_iter().fold(0.0, f64::max);
        for g in &config.couplings()[k] {
            scale = scale.max(config.frequency(k) * g * max_n);
        }
    }
    Ok(scale)
}

fn ratio(value: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        value / scale
    } else {
        value
    }
}

pub fn execute(args: &ValidateArgs, global: &GlobalArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(global.seed);
    let settings = EncodingSettings::default();

    let mut oracle = Suite::new("oracle: |decoded - P·b| / bound", 1.0);
    for _ in 0..args.cases {
        let m = rng.gen_range(1..=16);
        let n = rng.gen_range(1..=16);
        let p = random::stochastic_matrix(&mut rng, m, n);
        let b = random::uniform_vector(&mut rng, n, 1e-6, 10.0);
        let program = encode_matvec(&p, &b, &settings)?;
        let decoded = decode_matvec(&program, &stationary_flows(&program.config)?)?;
        for (i, row) in p.iter().enumerate() {
            let want: f64 = row.iter().zip(&b).map(|(a, x)| a * x).sum();
            oracle.observe((decoded.values[i] - want).abs() / decoded.error_bound[i]);
        }
    }

    let mut forms = Suite::new("forms: direct vs pairwise flows", 1e-12);
    let mut conservation = Suite::new("conservation: |Σ J| / Σ |J|", 1e-12);
    let mut second_law = Suite::new("second law: -σ / scale", 1e-12);
    let mut analogy = Suite::new("analogy: |I·ω - J| / max |J|", 1e-12);
    let mut crossbar = Suite::new("crossbar: drop-equation residual", 1e-12);
    let mut relaxation = Suite::new("relaxation: late flows vs stationary", 1e-10);
    for _ in 0..args.cases {
        let config = random::device_config(&mut rng, 8, 32);
        let direct = stationary_flows(&config)?;
        let pairwise = stationary_flows_pairwise(&config)?;
        let scale = term_scale(&config)?;
        let gap = direct
            .per_channel
            .iter()
            .flatten()
            .zip(pairwise.per_channel.iter().flatten())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        forms.observe(ratio(gap, scale));
        conservation.observe(direct.conservation_residual());
        second_law.observe(ratio(-direct.entropy_rate, entropy_scale(&config, &direct)));
        analogy.observe(analogy_residual(&config)?.1);
        crossbar.observe(build_crossbar(&config, &BarPolicy::Max)?.max_bar_residual());

        let min_rate = (0..config.mode_count())
            .map(|k| config.total_rate(k))
            .fold(f64::INFINITY, f64::min);
        let initial: Vec<f64> = (0..config.mode_count())
            .map(|_| rng.gen_range(0.0..10.0))
            .collect();
        let trace = evolve(&config, &initial, 40.0 / min_rate, 2)?;
        let late = trace.flows.last().expect("two samples");
        let gap = late
            .iter()
            .zip(&direct.per_reservoir)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        relaxation.observe(ratio(gap, scale));
    }

    let suites = [
        oracle,
        forms,
        conservation,
        second_law,
        analogy,
        crossbar,
        relaxation,
    ];
    let mut text = format!("seed {}, {} cases per suite\n", global.seed, args.cases);
    for s in &suites {
        text.push_str(&format!(
            "{} {}: worst {:e} (limit {:e})\n",
            if s.passed() { "PASS" } else { "FAIL" },
            s.name,
            s.worst,
            s.limit
        ));
    }
    emit(global, &text)?;
    let failed: Vec<&str> = suites
        .iter()
        .filter(|s| !s.passed())
        .map(|s| s.name)
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::SuiteFailed(failed.join("; ")))
    }
}

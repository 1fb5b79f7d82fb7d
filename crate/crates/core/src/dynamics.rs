//! Relaxation of mode occupancies toward the stationary state.
//!
//! Modelling choice: each mode obeys the scalar rate equation
//!
//! ```text
//! d⟨n_κ⟩/dt = Σ_j γ[κ][j] (n_j(ω_κ, T_j) − ⟨n_κ⟩) = Γ_κ (ñ_κ − ⟨n_κ⟩)
//! ```
//!
//! whose unique fixed point ⟨n_κ⟩ = ñ_κ reproduces the stationary flows of
//! [`crate::physics::stationary_flows`]. Modes are uncoupled, so the
//! solution is evaluated in closed form and long-lived collective modes
//! cannot occur.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{weighted_occupancy, DeviceConfig, Mode, Reservoir, T_FLOOR};

/// Denominator floor for relative deviations when ñ_κ = 0.
pub const SETTLING_FLOOR: f64 = 1e-15;

/// Tolerance used for [`TransientTrace::settled_at`].
pub const DEFAULT_SETTLING_TOL: f64 = 1e-6;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientTrace {
    pub times: Vec<f64>,
    /// `occupancies[t][κ]`
    pub occupancies: Vec<Vec<f64>>,
    /// `flows[t][j]`: total flow from reservoir j into the system.
    pub flows: Vec<Vec<f64>>,
    /// Settling time at [`DEFAULT_SETTLING_TOL`], if reached by the end of
    /// the trace.
    pub settled_at: Option<f64>,
}

/// Per-mode closed-form solution: stationary value, rate and initial offset.
struct Relaxation {
    target: f64,
    rate: f64,
    offset: f64,
}

impl Relaxation {
    fn at(&self, t: f64) -> f64 {
        self.target + self.offset * (-self.rate * t).exp()
    }
}

fn relaxations(config: &DeviceConfig, initial: &[f64]) -> Result<Vec<Relaxation>> {
    if initial.len() != config.mode_count() {
        return Err(Error::InvalidProblem(format!(
            "{} initial occupancies for {} modes",
            initial.len(),
            config.mode_count()
        )));
    }
    if let Some(k) = initial.iter().position(|n| !(n.is_finite() && *n >= 0.0)) {
        return Err(Error::domain(
            "initial occupancy",
            initial[k],
            "must be finite and non-negative",
        ));
    }
    (0..config.mode_count())
        .map(|k| {
            let target = weighted_occupancy(config, k)?;
            Ok(Relaxation {
                target,
                rate: config.total_rate(k),
                offset: initial[k] - target,
            })
        })
        .collect()
}

/// Stationary occupancies ñ_κ of every mode.
pub fn stationary_occupancies(config: &DeviceConfig) -> Result<Vec<f64>> {
    (0..config.mode_count())
        .map(|k| weighted_occupancy(config, k))
        .collect()
}

/// Sample the exact relaxation on `sample_count` equispaced times in [0, t_end].
pub fn evolve(
    config: &DeviceConfig,
    initial: &[f64],
    t_end: f64,
    sample_count: usize,
) -> Result<TransientTrace> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::domain("t_end", t_end, "must be positive"));
    }
    if sample_count < 2 {
        return Err(Error::InvalidProblem(format!(
            "need at least 2 samples, got {sample_count}"
        )));
    }
    let modes = relaxations(config, initial)?;
    let occupancy_table = (0..config.mode_count())
        .map(|k| config.occupancies(k))
        .collect::<Result<Vec<_>>>()?;

    let mut trace = TransientTrace {
        times: Vec::with_capacity(sample_count),
        occupancies: Vec::with_capacity(sample_count),
        flows: Vec::with_capacity(sample_count),
        settled_at: None,
    };
    let step = t_end / (sample_count - 1) as f64;
    for i in 0..sample_count {
        let t = if i + 1 == sample_count {
            t_end
        } else {
            step * i as f64
        };
        let occ: Vec<f64> = modes.iter().map(|m| m.at(t).max(0.0)).collect();
        let mut flows = vec![0.0; config.reservoir_count()];
        for (k, n_k) in occ.iter().enumerate() {
            let omega = config.frequency(k);
            for (j, flow) in flows.iter_mut().enumerate() {
                *flow += omega * config.couplings()[k][j] * (occupancy_table[k][j] - n_k);
            }
        }
        trace.times.push(t);
        trace.occupancies.push(occ);
        trace.flows.push(flows);
    }
    let settle = settling_time_of(&modes, DEFAULT_SETTLING_TOL);
    trace.settled_at = (settle <= t_end).then_some(settle);
    Ok(trace)
}

fn settling_time_of(modes: &[Relaxation], rel_tol: f64) -> f64 {
    modes
        .iter()
        .filter(|m| m.offset != 0.0)
        .map(|m| {
            let ratio = m.offset.abs() / (rel_tol * m.target.max(SETTLING_FLOOR));
            (ratio.ln() / m.rate).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// Smallest t with max_κ |⟨n_κ⟩(t) − ñ_κ| / max(ñ_κ, floor) ≤ rel_tol.
///
/// Returns 0 when every mode already starts within tolerance.
pub fn settling_time(config: &DeviceConfig, initial: &[f64], rel_tol: f64) -> Result<f64> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::domain("rel_tol", rel_tol, "must lie in (0, 1)"));
    }
    Ok(settling_time_of(&relaxations(config, initial)?, rel_tol))
}

/// Relaxation time interval [Q_low/ω, Q_high/ω] in seconds of a resonator
/// of free-space wavelength `wavelength_m`, with ω = 2πc/λ.
pub fn qfactor_estimate(wavelength_m: f64, q_low: f64, q_high: f64) -> Result<(f64, f64)> {
    for (name, v) in [
        ("wavelength", wavelength_m),
        ("q_low", q_low),
        ("q_high", q_high),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::domain(name, v, "must be positive"));
        }
    }
    let omega = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / wavelength_m;
    Ok((q_low / omega, q_high / omega))
}

/// How coupling is redistributed when the reservoir count changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Total rate Γ fixed; each link gets Γ/(n+1).
    FixedTotalRate,
    /// Each link keeps rate γ; Γ grows with the reservoir count.
    FixedLinkRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Number of baths n (the drain is extra).
    pub baths: usize,
    pub total_rate: f64,
    pub settling_time: f64,
}

/// Single-mode device with `baths` baths at spread-out occupancies in
/// [0.5, 2] and a drain at the temperature floor.
fn sweep_config(baths: usize, rate_per_link: f64) -> Result<DeviceConfig> {
    let omega = 1.0;
    let mut reservoirs = vec![Reservoir::drain(T_FLOOR)];
    for j in 0..baths {
        let occupancy = 0.5 + 1.5 * j as f64 / baths.max(2).saturating_sub(1) as f64;
        reservoirs.push(Reservoir::bath(crate::physics::inverse_temperature(
            omega, occupancy,
        )?));
    }
    DeviceConfig::new(
        vec![Mode::new(omega, 0)],
        reservoirs,
        vec![vec![rate_per_link; baths + 1]],
    )
}

/// Settling time from an initial occupancy of 2ñ (unit relative deviation)
/// as the number of baths varies.
pub fn reservoir_sweep(
    bath_counts: &[usize],
    rate: f64,
    mode: SweepMode,
    rel_tol: f64,
) -> Result<Vec<SweepPoint>> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::domain("rate", rate, "must be positive"));
    }
    bath_counts
        .iter()
        .map(|&baths| {
            if baths == 0 {
                return Err(Error::InvalidProblem(
                    "sweep needs at least one bath".into(),
                ));
            }
            let link = match mode {
                SweepMode::FixedTotalRate => rate / (baths + 1) as f64,
                SweepMode::FixedLinkRate => rate,
            };
            let config = sweep_config(baths, link)?;
            let initial: Vec<f64> = stationary_occupancies(&config)?
                .iter()
                .map(|n| 2.0 * n)
                .collect();
            Ok(SweepPoint {
                baths,
                total_rate: config.total_rate(0),
                settling_time: settling_time(&config, &initial, rel_tol)?,
            })
        })
        .collect()
}

/// (max − min) / min over a sweep's settling times.
pub fn sweep_spread(points: &[SweepPoint]) -> f64 {
    let max = points
        .iter()
        .map(|p| p.settling_time)
        .fold(f64::MIN, f64::max);
    let min = points
        .iter()
        .map(|p| p.settling_time)
        .fold(f64::MAX, f64::min);
    if min > 0.0 {
        (max - min) / min
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{inverse_temperature, stationary_flows};
    use approx::assert_relative_eq;

    /// One mode, Γ = `rate`, ñ = `target`, drain at floor.
    fn single_mode(rate: f64, target: f64) -> DeviceConfig {
        let mut reservoirs = vec![Reservoir::drain(T_FLOOR)];
        let mut row = vec![0.0];
        if target > 0.0 {
            reservoirs.push(Reservoir::bath(inverse_temperature(1.0, target).unwrap()));
            row.push(rate);
        } else {
            reservoirs.push(Reservoir::bath(T_FLOOR));
            row[0] = rate / 2.0;
            row.push(rate / 2.0);
        }
        DeviceConfig::new(vec![Mode::new(1.0, 0)], reservoirs, vec![row]).unwrap()
    }

    #[test]
    fn starting_at_fixed_point_is_constant() {
        let cfg = single_mode(1.0, 0.8);
        let target = stationary_occupancies(&cfg).unwrap();
        let trace = evolve(&cfg, &target, 5.0, 11).unwrap();
        assert_eq!(trace.settled_at, Some(0.0));
        for occ in &trace.occupancies {
            assert_eq!(occ[0], target[0]);
        }
        let flows = stationary_flows(&cfg).unwrap();
        for f in &trace.flows {
            assert_eq!(f, &flows.per_reservoir);
        }
    }

    #[test]
    fn analytic_exponential_decay() {
        let cfg = single_mode(1.0, 0.0);
        let trace = evolve(&cfg, &[1.0], std::f64::consts::LN_10, 2).unwrap();
        assert_relative_eq!(trace.occupancies[1][0], 0.1, max_relative = 1e-14);
        assert_relative_eq!(trace.occupancies[0][0], 1.0);
    }

    #[test]
    fn deviation_is_monotone() {
        let cfg = single_mode(0.7, 1.3);
        let trace = evolve(&cfg, &[0.0], 20.0, 200).unwrap();
        let dev: Vec<f64> = trace
            .occupancies
            .iter()
            .map(|o| (o[0] - 1.3).abs())
            .collect();
        assert!(dev.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn settling_time_analytic() {
        let cfg = single_mode(1.0, 0.5);
        let t = settling_time(&cfg, &[1.0], 1e-6).unwrap();
        // ln(1e6)
        assert_relative_eq!(t, 13.815_510_557_964_274, max_relative = 1e-12);
        let fast = single_mode(2.0, 0.5);
        assert_relative_eq!(
            settling_time(&fast, &[1.0], 1e-6).unwrap(),
            t / 2.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn settling_time_zero_at_fixed_point() {
        let cfg = single_mode(1.0, 0.5);
        assert_eq!(settling_time(&cfg, &[0.5], 1e-6).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        let cfg = single_mode(1.0, 0.5);
        assert!(evolve(&cfg, &[-0.1], 1.0, 10).is_err());
        assert!(evolve(&cfg, &[0.1], 0.0, 10).is_err());
        assert!(evolve(&cfg, &[0.1], 1.0, 1).is_err());
        assert!(evolve(&cfg, &[0.1, 0.2], 1.0, 10).is_err());
        assert!(settling_time(&cfg, &[0.1], 1.0).is_err());
    }

    #[test]
    fn qfactor_examples() {
        let (lo, hi) = qfactor_estimate(1e-3, 1e2, 1e4).unwrap();
        assert_relative_eq!(lo, 5.308_837_458_876_145e-11, max_relative = 1e-12);
        assert_relative_eq!(hi, 5.308_837_458_876_145e-9, max_relative = 1e-12);

        let omega = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / 0.5;
        let (one, _) = qfactor_estimate(0.5, omega, omega).unwrap();
        assert_relative_eq!(one, 1.0, max_relative = 1e-15);

        let (half, _) = qfactor_estimate(0.5e-3, 1e2, 1e4).unwrap();
        assert_relative_eq!(half, lo / 2.0, max_relative = 1e-15);
        assert!(qfactor_estimate(0.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn sweep_fixed_total_is_flat_and_fixed_link_is_not() {
        let counts = [2, 4, 8, 16, 32, 64];
        let flat = reservoir_sweep(&counts, 1.0, SweepMode::FixedTotalRate, 1e-6).unwrap();
        assert!(sweep_spread(&flat) < 0.01);
        let growing = reservoir_sweep(&counts, 1.0, SweepMode::FixedLinkRate, 1e-6).unwrap();
        assert!(growing
            .windows(2)
            .all(|w| w[1].settling_time < w[0].settling_time));
    }
}

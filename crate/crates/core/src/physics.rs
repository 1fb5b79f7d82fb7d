//! Closed-form thermodynamics of K uncoupled bosonic modes exchanging energy
//! with n+1 thermal reservoirs under Markovian (global) dissipation.
//!
//! Natural units are used throughout: ħ = k_B = 1, so frequencies and
//! temperatures share one unit and occupancies depend only on ω/T.
//! Converting from SI is the caller's business.
//!
//! Reservoir 0 is always the drain. Couplings are stored mode-major,
//! `couplings[mode][reservoir]`, and a positive flow `J[κ][j]` means energy
//! moving from reservoir `j` into the system through mode `κ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowest admissible reservoir temperature. Stands in for an ideal T = 0
/// drain, where the entropy production rate would diverge.
pub const T_FLOOR: f64 = 1e-9;

/// Occupancies below this value are flushed to exactly zero.
pub const OCCUPANCY_FLUSH: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    /// Angular frequency ω_κ.
    pub frequency: f64,
    #[serde(default)]
    pub group_id: u32,
}

impl Mode {
    pub fn new(frequency: f64, group_id: u32) -> Self {
        Mode {
            frequency,
            group_id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reservoir {
    pub temperature: f64,
    #[serde(default)]
    pub is_drain: bool,
}

impl Reservoir {
    pub fn drain(temperature: f64) -> Self {
        Reservoir {
            temperature,
            is_drain: true,
        }
    }

    pub fn bath(temperature: f64) -> Self {
        Reservoir {
            temperature,
            is_drain: false,
        }
    }
}

/// Raw, unvalidated form of a [`DeviceConfig`]; used for deserialization.
#[derive(Debug, Clone, Deserialize)]
struct RawDeviceConfig {
    modes: Vec<Mode>,
    reservoirs: Vec<Reservoir>,
    couplings: Vec<Vec<f64>>,
}

/// Full physical description of the device: modes, reservoirs and the
/// dissipation rates γ[κ][j] linking them.
///
/// Construction validates every invariant, so downstream code can index
/// freely. Instances are immutable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDeviceConfig")]
pub struct DeviceConfig {
    modes: Vec<Mode>,
    reservoirs: Vec<Reservoir>,
    couplings: Vec<Vec<f64>>,
}

impl TryFrom<RawDeviceConfig> for DeviceConfig {
    type Error = Error;

    fn try_from(raw: RawDeviceConfig) -> Result<Self> {
        DeviceConfig::new(raw.modes, raw.reservoirs, raw.couplings)
    }
}

impl DeviceConfig {
    pub fn new(
        modes: Vec<Mode>,
        reservoirs: Vec<Reservoir>,
        couplings: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidConfig("at least one mode is required".into()));
        }
        if reservoirs.len() < 2 {
            return Err(Error::InvalidConfig(
                "at least two reservoirs (drain plus one bath) are required".into(),
            ));
        }
        for (k, mode) in modes.iter().enumerate() {
            if !(mode.frequency.is_finite() && mode.frequency > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "mode {k}: frequency must be positive and finite, got {}",
                    mode.frequency
                )));
            }
        }
        if !reservoirs[0].is_drain {
            return Err(Error::InvalidConfig(
                "reservoir 0 must be flagged as the drain".into(),
            ));
        }
        for (j, res) in reservoirs.iter().enumerate() {
            if j > 0 && res.is_drain {
                return Err(Error::InvalidConfig(format!(
                    "reservoir {j}: only reservoir 0 may be the drain"
                )));
            }
            if !(res.temperature.is_finite() && res.temperature >= T_FLOOR) {
                return Err(Error::InvalidConfig(format!(
                    "reservoir {j}: temperature must be finite and >= {T_FLOOR:e}, got {}",
                    res.temperature
                )));
            }
        }
        if couplings.len() != modes.len() {
            return Err(Error::InvalidConfig(format!(
                "coupling matrix has {} rows, expected one per mode ({})",
                couplings.len(),
                modes.len()
            )));
        }
        for (k, row) in couplings.iter().enumerate() {
            if row.len() != reservoirs.len() {
                return Err(Error::InvalidConfig(format!(
                    "coupling row {k} has {} entries, expected {}",
                    row.len(),
                    reservoirs.len()
                )));
            }
            if let Some(j) = row.iter().position(|g| !(g.is_finite() && *g >= 0.0)) {
                return Err(Error::InvalidConfig(format!(
                    "coupling [{k}][{j}] must be finite and non-negative, got {}",
                    row[j]
                )));
            }
            if row.iter().sum::<f64>() <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "mode {k} is isolated (all couplings zero)"
                )));
            }
        }
        Ok(DeviceConfig {
            modes,
            reservoirs,
            couplings,
        })
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn reservoirs(&self) -> &[Reservoir] {
        &self.reservoirs
    }

    pub fn couplings(&self) -> &[Vec<f64>] {
        &self.couplings
    }

    /// Number of modes, K.
    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// Number of reservoirs including the drain, n+1.
    pub fn reservoir_count(&self) -> usize {
        self.reservoirs.len()
    }

    pub fn frequency(&self, mode: usize) -> f64 {
        self.modes[mode].frequency
    }

    pub fn temperature(&self, reservoir: usize) -> f64 {
        self.reservoirs[reservoir].temperature
    }

    /// Total dissipation rate Γ_κ = Σ_j γ[κ][j].
    pub fn total_rate(&self, mode: usize) -> f64 {
        self.couplings[mode].iter().sum()
    }

    /// Occupancy n_j(ω_κ, T_j) of reservoir `reservoir` at the frequency of `mode`.
    pub fn occupancy(&self, mode: usize, reservoir: usize) -> Result<f64> {
        bose_occupancy(self.frequency(mode), self.temperature(reservoir))
    }

    /// All occupancies seen by one mode, indexed by reservoir.
    pub fn occupancies(&self, mode: usize) -> Result<Vec<f64>> {
        (0..self.reservoir_count())
            .map(|j| self.occupancy(mode, j))
            .collect()
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.modes.len() {
            return Err(Error::InvalidConfig(format!(
                "mode index {mode} out of range (K = {})",
                self.modes.len()
            )));
        }
        Ok(())
    }
}

/// Bose–Einstein occupancy 1/(exp(ω/T) − 1).
///
/// Evaluated through `exp_m1` so that ω/T ≪ 1 keeps full precision; results
/// below [`OCCUPANCY_FLUSH`] are returned as exactly 0.
pub fn bose_occupancy(frequency: f64, temperature: f64) -> Result<f64> {
    if !(frequency > 0.0) || !frequency.is_finite() {
        return Err(Error::domain("frequency", frequency, "must be positive"));
    }
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::domain(
            "temperature",
            temperature,
            "must be positive",
        ));
    }
    let n = 1.0 / (frequency / temperature).exp_m1();
    Ok(if n < OCCUPANCY_FLUSH { 0.0 } else { n })
}

/// Temperature at which a bosonic reservoir has occupancy `occupancy` at
/// `frequency`: T = ω / ln(1 + 1/b).
pub fn inverse_temperature(frequency: f64, occupancy: f64) -> Result<f64> {
    if !(frequency > 0.0) || !frequency.is_finite() {
        return Err(Error::domain("frequency", frequency, "must be positive"));
    }
    if !(occupancy > 0.0) || !occupancy.is_finite() {
        return Err(Error::domain("occupancy", occupancy, "must be positive"));
    }
    Ok(frequency / occupancy.recip().ln_1p())
}

/// Normalized coupling weights p[κ][j] = γ[κ][j] / Σ_m γ[κ][m].
pub fn coupling_weights(config: &DeviceConfig, mode: usize) -> Result<Vec<f64>> {
    config.check_mode(mode)?;
    normalize_row(&config.couplings[mode])
        .ok_or_else(|| Error::InvalidConfig(format!("mode {mode} has an all-zero coupling row")))
}

pub(crate) fn normalize_row(row: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = row.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    Some(row.iter().map(|g| g / total).collect())
}

/// Coupling-weighted occupancy ñ(ω_κ) = Σ_j p[κ][j] n_j(ω_κ, T_j); the
/// stationary occupancy of mode κ.
///
/// Summed as offsets from the most strongly coupled reservoir, so equal
/// occupancies give ñ exactly (and zero flows at equilibrium).
pub fn weighted_occupancy(config: &DeviceConfig, mode: usize) -> Result<f64> {
    let weights = coupling_weights(config, mode)?;
    let occ = config.occupancies(mode)?;
    let anchor = (0..weights.len()).fold(0, |a, j| if weights[j] > weights[a] { j } else { a });
    let offset: f64 = weights
        .iter()
        .zip(&occ)
        .map(|(p, n)| p * (n - occ[anchor]))
        .sum();
    Ok(occ[anchor] + offset)
}

/// Stationary energy flows and the entropy production they imply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    /// `per_channel[κ][j]`: flow from reservoir j into the system through mode κ.
    pub per_channel: Vec<Vec<f64>>,
    /// `per_reservoir[j] = Σ_κ per_channel[κ][j]`.
    pub per_reservoir: Vec<f64>,
    pub entropy_rate: f64,
}

impl FlowReport {
    fn from_channels(config: &DeviceConfig, per_channel: Vec<Vec<f64>>) -> Result<Self> {
        let per_reservoir = column_sums(&per_channel, config.reservoir_count());
        let entropy_rate = entropy_rate_of(config, &per_reservoir)?;
        Ok(FlowReport {
            per_channel,
            per_reservoir,
            entropy_rate,
        })
    }

    /// |Σ_j J_j| / Σ_j |J_j|, or 0 when every flow vanishes.
    pub fn conservation_residual(&self) -> f64 {
        let scale: f64 = self.per_reservoir.iter().map(|j| j.abs()).sum();
        if scale == 0.0 {
            return 0.0;
        }
        self.per_reservoir.iter().sum::<f64>().abs() / scale
    }

    pub fn max_abs(&self) -> f64 {
        self.per_channel
            .iter()
            .flatten()
            .fold(0.0_f64, |m, j| m.max(j.abs()))
    }
}

pub(crate) fn column_sums(rows: &[Vec<f64>], width: usize) -> Vec<f64> {
    let mut sums = vec![0.0; width];
    for row in rows {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    sums
}

/// Stationary flows J[κ][j] = ω_κ γ[κ][j] (n_j(ω_κ, T_j) − ñ(ω_κ)).
pub fn stationary_flows(config: &DeviceConfig) -> Result<FlowReport> {
    let per_channel = (0..config.mode_count())
        .map(|k| {
            let omega = config.frequency(k);
            let occ = config.occupancies(k)?;
            let n_tilde = weighted_occupancy(config, k)?;
            Ok(config.couplings[k]
                .iter()
                .zip(&occ)
                .map(|(g, n)| omega * g * (n - n_tilde))
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    FlowReport::from_channels(config, per_channel)
}

/// Same flows written as a sum over reservoir pairs:
/// J[κ][j] = ω_κ Σ_q γ[κ][j] γ[κ][q] / Γ_κ · (n_j − n_q).
///
/// Never forms ñ, which makes it an independent check on [`stationary_flows`].
pub fn stationary_flows_pairwise(config: &DeviceConfig) -> Result<FlowReport> {
    let per_channel = (0..config.mode_count())
        .map(|k| {
            let omega = config.frequency(k);
            let occ = config.occupancies(k)?;
            let row = &config.couplings[k];
            let total = config.total_rate(k);
            Ok((0..row.len())
                .map(|j| {
                    let pair_sum: f64 = (0..row.len())
                        .map(|q| row[j] * row[q] / total * (occ[j] - occ[q]))
                        .sum();
                    omega * pair_sum
                })
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    FlowReport::from_channels(config, per_channel)
}

/// Cold-drain approximation of the drain flow of a single mode, together
/// with the exact value it approximates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrainApproximation {
    /// −ω_κ γ[κ][0] Σ_{q≥1} p[κ][q] n_q(ω_κ, T_q)
    pub approx: f64,
    /// J[κ][0] from the full stationary formula.
    pub exact: f64,
    /// |approx − exact|, the encoding error of the drain readout.
    pub discrepancy: f64,
}

pub fn drain_flow_approx(config: &DeviceConfig, mode: usize) -> Result<DrainApproximation> {
    let weights = coupling_weights(config, mode)?;
    let occ = config.occupancies(mode)?;
    let omega = config.frequency(mode);
    let gamma0 = config.couplings[mode][0];
    let dot: f64 = weights[1..].iter().zip(&occ[1..]).map(|(p, n)| p * n).sum();
    let approx = -omega * gamma0 * dot;
    let n_tilde: f64 = weights.iter().zip(&occ).map(|(p, n)| p * n).sum();
    let exact = omega * gamma0 * (occ[0] - n_tilde);
    Ok(DrainApproximation {
        approx,
        exact,
        discrepancy: (approx - exact).abs(),
    })
}

/// Stationary entropy production rate σ = −Σ_j J_j / T_j.
pub fn entropy_production_rate(config: &DeviceConfig, flows: &FlowReport) -> Result<f64> {
    if flows.per_reservoir.len() != config.reservoir_count() {
        return Err(Error::InvalidConfig(format!(
            "flow report has {} reservoirs, config has {}",
            flows.per_reservoir.len(),
            config.reservoir_count()
        )));
    }
    entropy_rate_of(config, &flows.per_reservoir)
}

fn entropy_rate_of(config: &DeviceConfig, per_reservoir: &[f64]) -> Result<f64> {
    let mut sigma = 0.0;
    for (res, flow) in config.reservoirs.iter().zip(per_reservoir) {
        if !(res.temperature >= T_FLOOR) {
            return Err(Error::domain(
                "temperature",
                res.temperature,
                "below the temperature floor",
            ));
        }
        sigma -= flow / res.temperature;
    }
    Ok(sigma)
}

/// Σ_j |J_j / T_j|: the natural scale for judging the sign of σ.
pub fn entropy_scale(config: &DeviceConfig, flows: &FlowReport) -> f64 {
    config
        .reservoirs
        .iter()
        .zip(&flows.per_reservoir)
        .map(|(r, j)| (j / r.temperature).abs())
        .sum()
}

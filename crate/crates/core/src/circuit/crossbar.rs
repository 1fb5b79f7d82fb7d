use serde::{Deserialize, Serialize};

use super::star::{currents_by_reservoir, oqs_to_star};
use crate::error::{Error, Result};
use crate::physics::DeviceConfig;

/// How the reservoir bar potentials Φ_j are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarPolicy {
    /// Φ_j = max_κ φ[κ][j].
    Max,
    /// The same Φ on every bar; must not undercut any node potential.
    Uniform(f64),
    /// One Φ per bar.
    PerBar(Vec<f64>),
    /// Grouped-mode computing setup: Φ_j = max_κ φ[κ][j] and every r = 0.
    /// Exact only when modes share occupancies; accepted when each bar's
    /// node potentials agree within `tol` (relative).
    Grouped { tol: f64 },
}

impl std::str::FromStr for BarPolicy {
    type Err = Error;

    /// `max`, `grouped:<tol>`, `fixed:<Φ>` or `fixed:<Φ0>,<Φ1>,...`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidProblem(format!("unrecognised bar policy '{s}'"));
        let parse_list = |v: &str| -> Result<Vec<f64>> {
            v.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| bad()))
                .collect()
        };
        match s.split_once(':') {
            None if s == "max" => Ok(BarPolicy::Max),
            Some(("fixed", v)) => {
                let values = parse_list(v)?;
                if values.len() == 1 {
                    Ok(BarPolicy::Uniform(values[0]))
                } else {
                    Ok(BarPolicy::PerBar(values))
                }
            }
            Some(("grouped", v)) => Ok(BarPolicy::Grouped {
                tol: v.trim().parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchState {
    /// Non-zero current through r[κ][j].
    Active,
    /// Zero current with φ = Φ: r = 0, a plain connection.
    PassThrough,
    /// Zero current with φ ≠ Φ: the branch must be left open.
    Open,
    /// No coupling between the mode and this reservoir.
    Absent,
}

/// Crossbar equivalent of a device: mode bars b_κ and reservoir bars c_j
/// joined at each crossing by R[κ][j] = 1/γ[κ][j] in series with r[κ][j].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossbarCircuit {
    /// `conductances[κ][j] = γ[κ][j]`
    pub conductances: Vec<Vec<f64>>,
    /// `node_potentials[κ][j] = n_j(ω_κ, T_j)`
    pub node_potentials: Vec<Vec<f64>>,
    pub bar_potentials: Vec<f64>,
    pub series_resistors: Vec<Vec<f64>>,
    /// Mapped branch currents I[κ][j] = J[κ][j]/ω_κ.
    pub currents: Vec<Vec<f64>>,
    pub branch_states: Vec<Vec<BranchState>>,
    pub policy: BarPolicy,
}

impl CrossbarCircuit {
    pub fn modes(&self) -> usize {
        self.conductances.len()
    }

    pub fn bars(&self) -> usize {
        self.bar_potentials.len()
    }

    /// Branches whose series resistor came out negative. These occur when
    /// current leaves a bath through a mode whose node sits below Φ_j.
    pub fn negative_resistors(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (k, row) in self.series_resistors.iter().enumerate() {
            for (j, r) in row.iter().enumerate() {
                if *r < 0.0 {
                    out.push((k, j));
                }
            }
        }
        out
    }

    /// max over non-zero-current branches of |Φ_j − φ[κ][j] − I[κ][j] r[κ][j]| / |Φ_j|
    /// (absolute when Φ_j = 0).
    pub fn max_bar_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for k in 0..self.modes() {
            for j in 0..self.bars() {
                if self.branch_states[k][j] != BranchState::Active {
                    continue;
                }
                let phi_bar = self.bar_potentials[j];
                let residual = (phi_bar
                    - self.node_potentials[k][j]
                    - self.currents[k][j] * self.series_resistors[k][j])
                    .abs();
                let scale = if phi_bar != 0.0 { phi_bar.abs() } else { 1.0 };
                worst = worst.max(residual / scale);
            }
        }
        worst
    }

    /// Chain conductances 1/(r + R) of the connected branches of one mode bar.
    fn chains(&self, k: usize) -> Result<Vec<(usize, f64)>> {
        let mut chains = Vec::new();
        for j in 0..self.bars() {
            match self.branch_states[k][j] {
                BranchState::Active | BranchState::PassThrough => {
                    let total = self.series_resistors[k][j] + 1.0 / self.conductances[k][j];
                    if total == 0.0 {
                        return Err(Error::Numerical(format!(
                            "branch ({k}, {j}) has zero total resistance"
                        )));
                    }
                    chains.push((j, total.recip()));
                }
                BranchState::Open | BranchState::Absent => {}
            }
        }
        Ok(chains)
    }

    /// Condition number of the forward solve, max over mode bars of
    /// Σ|g| / |Σg| for the chain conductances g. 1 when no series resistor
    /// is negative; infinite when a mode bar is undetermined.
    pub fn forward_condition(&self) -> Result<f64> {
        let mut worst = 1.0_f64;
        for k in 0..self.modes() {
            let chains = self.chains(k)?;
            if chains.is_empty() {
                continue;
            }
            let total: f64 = chains.iter().map(|(_, g)| g).sum();
            let magnitude: f64 = chains.iter().map(|(_, g)| g.abs()).sum();
            worst = worst.max(magnitude / total.abs());
        }
        Ok(worst)
    }

    /// Solve the circuit forward from the bar potentials and resistors
    /// alone: each mode bar settles at the conductance-weighted mean of
    /// the bar potentials it is chained to, with chain conductance
    /// 1/(r[κ][j] + R[κ][j]). Returns the branch currents.
    pub fn solve_currents(&self) -> Result<Vec<Vec<f64>>> {
        let mut out = vec![vec![0.0; self.bars()]; self.modes()];
        for (k, row) in out.iter_mut().enumerate() {
            let chains = self.chains(k)?;
            if chains.is_empty() {
                // floating mode bar: every branch open, no current
                continue;
            }
            // negative series resistors can cancel the chain conductances;
            // e.g. a uniform Φ on every bar leaves the mode bar undetermined
            let total_g: f64 = chains.iter().map(|(_, g)| g).sum();
            let magnitude: f64 = chains.iter().map(|(_, g)| g.abs()).sum();
            if !(total_g.abs() > 1e-12 * magnitude) || !total_g.is_finite() {
                return Err(Error::Numerical(format!(
                    "mode bar {k} has singular total conductance"
                )));
            }
            // mode bar potential relative to the first chained bar
            let anchor = self.bar_potentials[chains[0].0];
            let shift: f64 = chains
                .iter()
                .map(|(j, g)| g / total_g * (self.bar_potentials[*j] - anchor))
                .sum();
            for (j, g) in chains {
                row[j] = g * ((self.bar_potentials[j] - anchor) - shift);
            }
        }
        Ok(out)
    }

    /// |Σ_j I[κ][j]| per mode bar, relative to Σ_j γ[κ][j] |φ[κ][j]|, the
    /// size of the terms that cancel in the sum.
    pub fn kirchhoff_residuals(&self) -> Vec<f64> {
        (0..self.modes())
            .map(|k| {
                let scale: f64 = self.conductances[k]
                    .iter()
                    .zip(&self.node_potentials[k])
                    .map(|(g, phi)| g * phi.abs())
                    .sum();
                let sum: f64 = self.currents[k].iter().sum();
                if scale == 0.0 {
                    sum.abs()
                } else {
                    sum.abs() / scale
                }
            })
            .collect()
    }
}

/// Build the crossbar of a device under a bar-potential policy.
///
/// r[κ][j] = (Φ_j − φ[κ][j]) / I[κ][j] on branches carrying current;
/// zero-current branches are marked pass-through or open.
pub fn build_crossbar(config: &DeviceConfig, policy: &BarPolicy) -> Result<CrossbarCircuit> {
    let k_count = config.mode_count();
    let width = config.reservoir_count();
    let mut conductances = Vec::with_capacity(k_count);
    let mut node_potentials = Vec::with_capacity(k_count);
    let mut currents = Vec::with_capacity(k_count);
    for k in 0..k_count {
        conductances.push(config.couplings()[k].clone());
        node_potentials.push(config.occupancies(k)?);
        currents.push(currents_by_reservoir(&oqs_to_star(config, k)?, width));
    }

    let column_max: Vec<f64> = (0..width)
        .map(|j| {
            node_potentials
                .iter()
                .map(|row: &Vec<f64>| row[j])
                .fold(f64::MIN, f64::max)
        })
        .collect();
    let bar_potentials = match policy {
        BarPolicy::Max => column_max.clone(),
        BarPolicy::Uniform(v) => vec![*v; width],
        BarPolicy::PerBar(values) => {
            if values.len() != width {
                return Err(Error::InvalidProblem(format!(
                    "{} bar potentials for {width} reservoirs",
                    values.len()
                )));
            }
            values.clone()
        }
        BarPolicy::Grouped { tol } => {
            for j in 0..width {
                let min = node_potentials
                    .iter()
                    .map(|row| row[j])
                    .fold(f64::MAX, f64::min);
                if column_max[j] - min > tol * column_max[j] {
                    return Err(Error::Solvability(format!(
                        "grouped policy: node potentials on bar {j} span [{min}, {}], \
                         wider than tolerance {tol}",
                        column_max[j]
                    )));
                }
            }
            column_max.clone()
        }
    };
    for (j, (phi_bar, max)) in bar_potentials.iter().zip(&column_max).enumerate() {
        if !phi_bar.is_finite() || phi_bar < max {
            return Err(Error::Solvability(format!(
                "bar {j}: potential {phi_bar} is below max node potential {max}"
            )));
        }
    }

    let grouped = matches!(policy, BarPolicy::Grouped { .. });
    let mut series_resistors = vec![vec![0.0; width]; k_count];
    let mut branch_states = vec![vec![BranchState::Absent; width]; k_count];
    for k in 0..k_count {
        for j in 0..width {
            if conductances[k][j] == 0.0 {
                continue;
            }
            let drop = bar_potentials[j] - node_potentials[k][j];
            let current = currents[k][j];
            branch_states[k][j] = if current != 0.0 {
                if !grouped {
                    series_resistors[k][j] = drop / current;
                }
                BranchState::Active
            } else if drop == 0.0 || grouped {
                BranchState::PassThrough
            } else {
                BranchState::Open
            };
        }
    }

    let crossbar = CrossbarCircuit {
        conductances,
        node_potentials,
        bar_potentials,
        series_resistors,
        currents,
        branch_states,
        policy: policy.clone(),
    };
    let negative = crossbar.negative_resistors();
    if !negative.is_empty() {
        log::debug!(
            "{} crossbar branches need negative series resistance (first: mode {}, reservoir {})",
            negative.len(),
            negative[0].0,
            negative[0].1
        );
    }
    Ok(crossbar)
}

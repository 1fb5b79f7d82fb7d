use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::DeviceConfig;

/// Wires of resistance R_j held at potentials φ_j, joined at one centre node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarCircuit {
    resistances: Vec<f64>,
    potentials: Vec<f64>,
    /// Reservoir index of each wire. Identity for hand-built circuits;
    /// uncoupled reservoirs are skipped when mapping a device.
    terminals: Vec<usize>,
}

impl StarCircuit {
    pub fn new(resistances: Vec<f64>, potentials: Vec<f64>) -> Result<Self> {
        let terminals = (0..resistances.len()).collect();
        Self::with_terminals(resistances, potentials, terminals)
    }

    fn with_terminals(
        resistances: Vec<f64>,
        potentials: Vec<f64>,
        terminals: Vec<usize>,
    ) -> Result<Self> {
        if resistances.is_empty() {
            return Err(Error::InvalidConfig("star circuit has no wires".into()));
        }
        if resistances.len() != potentials.len() {
            return Err(Error::InvalidConfig(format!(
                "{} resistances but {} potentials",
                resistances.len(),
                potentials.len()
            )));
        }
        if let Some(j) = resistances
            .iter()
            .position(|r| !(*r > 0.0 && r.is_finite()))
        {
            return Err(Error::InvalidConfig(format!(
                "resistance {j} must be positive and finite, got {}",
                resistances[j]
            )));
        }
        if let Some(j) = potentials.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig(format!("potential {j} is not finite")));
        }
        Ok(StarCircuit {
            resistances,
            potentials,
            terminals,
        })
    }

    pub fn resistances(&self) -> &[f64] {
        &self.resistances
    }

    pub fn potentials(&self) -> &[f64] {
        &self.potentials
    }

    pub fn terminals(&self) -> &[usize] {
        &self.terminals
    }
}

/// Centre potential φ̃ = Σ_j (φ_j/R_j) / Σ_j (1/R_j), the conductance-weighted
/// mean of the wire potentials.
pub fn star_node_potential(circuit: &StarCircuit) -> f64 {
    let total: f64 = circuit.resistances.iter().map(|r| r.recip()).sum();
    circuit
        .resistances
        .iter()
        .zip(&circuit.potentials)
        .map(|(r, phi)| (r.recip() / total) * phi)
        .sum()
}

/// Wire currents I_j = (φ_j − φ̃)/R_j, positive toward the centre.
pub fn star_currents(circuit: &StarCircuit) -> Vec<f64> {
    let centre = star_node_potential(circuit);
    circuit
        .resistances
        .iter()
        .zip(&circuit.potentials)
        .map(|(r, phi)| (phi - centre) / r)
        .collect()
}

/// Star equivalent of one mode: 1/R_j = γ[κ][j], φ_j = n_j(ω_κ, T_j).
///
/// Wire currents are then excitation-number flows γ(n_j − ñ); the energy
/// flow is J[κ][j] = ω_κ I_j. Reservoirs with zero coupling are left out
/// (open branch).
pub fn oqs_to_star(config: &DeviceConfig, mode: usize) -> Result<StarCircuit> {
    if mode >= config.mode_count() {
        return Err(Error::InvalidConfig(format!(
            "mode index {mode} out of range (K = {})",
            config.mode_count()
        )));
    }
    let occ = config.occupancies(mode)?;
    let (mut r, mut phi, mut terminals) = (Vec::new(), Vec::new(), Vec::new());
    for (j, &g) in config.couplings()[mode].iter().enumerate() {
        if g > 0.0 {
            r.push(1.0 / g);
            phi.push(occ[j]);
            terminals.push(j);
        }
    }
    StarCircuit::with_terminals(r, phi, terminals)
}

/// Currents of a mapped star scattered back onto all reservoirs (zero for
/// open branches).
pub fn currents_by_reservoir(circuit: &StarCircuit, reservoirs: usize) -> Vec<f64> {
    let mut out = vec![0.0; reservoirs];
    for (j, i) in circuit.terminals.iter().zip(star_currents(circuit)) {
        out[*j] = i;
    }
    out
}

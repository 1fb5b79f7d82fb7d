//! Electrical analogue of the device.
//!
//! Each mode is a star circuit with conductance γ[κ][j] and potential
//! n_j(ω_κ, T_j) on wire j. The wire current I[κ][j] is the excitation
//! flow, and the energy flow is J[κ][j] = ω_κ I[κ][j]. Tying equal-j
//! terminals to shared bars through series resistors turns the set of
//! stars into a crossbar.

mod crossbar;
mod netlist;
mod star;

pub use crossbar::{build_crossbar, BarPolicy, BranchState, CrossbarCircuit};
pub use netlist::{export_netlist, Card, CircuitRef, Netlist, NetlistFormat, NetlistKind};
pub use star::{
    currents_by_reservoir, oqs_to_star, star_currents, star_node_potential, StarCircuit,
};

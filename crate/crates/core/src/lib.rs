//! Simulator and compiler for a thermodynamic linear-algebra coprocessor.
//!
//! A set of bosonic modes couples to thermal reservoirs; the stationary
//! energy flows into a cold drain reservoir compute weighted sums of the
//! reservoir occupancies. This crate evaluates those flows in closed form
//! ([`physics`]), compiles non-negative and signed matrix-vector products
//! into device parameters and decodes the results ([`compiler`]), models
//! the relaxation to the stationary state ([`dynamics`]), and builds the
//! equivalent resistor circuits ([`circuit`]).
//!
//! All quantities use natural units, ħ = k_B = 1.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod compiler;
pub mod dynamics;
mod error;
pub mod physics;
pub mod random;

pub use error::{Error, Result};

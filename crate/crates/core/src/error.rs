use thiserror::Error;

/// Errors raised by the simulator and compiler.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of a physical formula.
    #[error("domain error: {quantity} = {value} ({reason})")]
    Domain {
        quantity: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// A device configuration or compiled program violates an invariant.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A linear-algebra problem cannot be encoded as given.
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    /// A circuit constraint cannot be satisfied (e.g. bar potential below
    /// the largest node potential it must feed).
    #[error("solvability: {0}")]
    Solvability(String),

    /// A computation produced a non-finite or otherwise unusable number.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("netlist parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(quantity: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain {
            quantity,
            value,
            reason,
        }
    }
}

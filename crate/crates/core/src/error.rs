use thiserror::Error;

/// Errors raised by the simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("atom count must be at least {min}, got {got}")]
    AtomCount { got: usize, min: usize },

    #[error("atom count {got} exceeds the supported maximum of {max} for {context}")]
    TooManyAtoms {
        got: usize,
        max: usize,
        context: &'static str,
    },

    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },

    #[error("{name} = {value} is out of range: {reason}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("expected {expected} amplitudes, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("state is not normalized: |psi|^2 = {0}")]
    NotNormalized(f64),

    #[error("Q/(2S) = {0} is at or beyond pi/2 where cos(Q/2S) <= 0; closed-form slope undefined")]
    SlopeDomain(f64),

    #[error("Trotter evolution did not converge: relative change {change:e} at {steps} steps")]
    TrotterNonConvergence { steps: usize, change: f64 },

    #[error("minimization did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("inconsistent parameters: {0}")]
    Inconsistent(String),

    #[error("invalid grid: {0}")]
    Grid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { name, value })
    }
}

pub(crate) fn ensure_atoms(n_atoms: usize, min: usize) -> Result<()> {
    if n_atoms < min {
        Err(Error::AtomCount { got: n_atoms, min })
    } else {
        Ok(())
    }
}

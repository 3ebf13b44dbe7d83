//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by model evaluation, atomisation, integration and
/// diagnostics.
#[derive(Debug, Error)]
pub enum FtlError {
    /// An argument left the mathematical domain of an operation
    /// (e.g. a negative density passed to a velocity law).
    #[error("domain error: {0}")]
    Domain(String),

    /// Structurally invalid input (zero-mass datum, `n = 0`, mismatched
    /// particle counts, test function outside the stored window, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A particle state stopped being strictly ordered.
    #[error("state corruption: {0}")]
    StateCorruption(String),

    /// The adaptive integrator exhausted its step-halving budget.
    #[error("stiffness: step size underflow after {halvings} halvings at t = {t}")]
    Stiffness { t: f64, halvings: u32 },

    /// A run violated the discrete maximum principle beyond tolerance,
    /// which indicates integrator error rather than model behaviour.
    #[error("maximum principle violated at t = {t}: min gap {min_gap} < floor {floor}")]
    MaximumPrinciple { t: f64, min_gap: f64, floor: f64 },

    /// The requested operation is only defined for a subset of velocity
    /// models (e.g. the improved one-sided bound needs a power law).
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    /// A solver or reference configuration failed validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, FtlError>;

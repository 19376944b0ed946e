//! Error type shared across the simulation library.

use thiserror::Error;

/// Unified error for configuration, I/O, and runtime numeric failures.
#[derive(Debug, Error)]
pub enum SimError {
    /// Invalid configuration or input data. Maps to process exit code 1.
    #[error("configuration error: {0}")]
    Config(String),

    /// A state, derivative, or loss value stopped being finite mid-run.
    /// Maps to process exit code 2.
    #[error("numeric blowup at t = {t} s (step {step}): {detail}")]
    NumericBlowup { step: usize, t: f64, detail: String },

    /// The online estimator's weight norm exceeded its hard cap.
    /// Maps to process exit code 2.
    #[error(
        "estimator diverged at t = {t} s (step {step}): weight norm {norm:.3e} exceeds cap {cap:.3e}"
    )]
    EstimatorDiverged {
        step: usize,
        t: f64,
        norm: f64,
        cap: f64,
    },

    /// A derivative or intermediate value was non-finite at time `t`.
    /// Wrapped into `NumericBlowup` (with step context) by the scenario
    /// runner; surfaces directly from standalone integrator calls.
    #[error("non-finite value in {what} at t = {t} s")]
    NonFinite { t: f64, what: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl SimError {
    /// Process exit code for CLI use: 1 for configuration/input problems,
    /// 2 for numeric aborts mid-simulation.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::NumericBlowup { .. }
            | SimError::EstimatorDiverged { .. }
            | SimError::NonFinite { .. } => 2,
            _ => 1,
        }
    }
}

pub type SimResult<T> = Result<T, SimError>;

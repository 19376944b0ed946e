//! Fixed-schema simulation traces and their CSV form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};

/// Column order of `trace.csv`. The header is part of the tool's
/// external interface and must not drift.
pub const TRACE_HEADER: [&str; 13] = [
    "t", "x1", "x2", "xhat1", "xhat2", "phi_true", "phi_hat", "u_cmd", "u_eff", "s", "V", "loss",
    "wnorm",
];

/// One control period of a closed-loop run. Values are captured at the
/// start of the period: states at `t`, the command applied over
/// `[t, t+dt)`, and the estimator statistics from the most recent
/// completed training step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
    pub xhat1: f64,
    pub xhat2: f64,
    pub phi_true: f64,
    pub phi_hat: f64,
    /// Controller output before the fault acts.
    pub u_cmd: f64,
    /// What the degraded valve actually delivers: `(1 - phi_true) * u_cmd`.
    pub u_eff: f64,
    /// Sliding surface `y - x1_ref` (measured).
    pub s: f64,
    /// Composite observer/surface energy.
    #[serde(rename = "V")]
    pub v: f64,
    /// Estimator training loss (0 until training starts).
    pub loss: f64,
    /// Estimator parameter norm.
    pub wnorm: f64,
}

/// Writes rows with the fixed header. The encoding is deterministic:
/// identical rows give byte-identical files.
pub fn write_trace(path: &Path, rows: &[TraceRow]) -> SimResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace back, insisting on the exact header.
pub fn read_trace(path: &Path) -> SimResult<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let found: Vec<&str> = headers.iter().collect();
    if found != TRACE_HEADER {
        return Err(SimError::Config(format!(
            "trace header mismatch: expected {TRACE_HEADER:?}, found {found:?}"
        )));
    }
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

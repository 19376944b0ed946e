//! Actuator fault profiles and extraction of fault fractions from valve
//! maintenance logs.
//!
//! A fault is the loss-of-effectiveness fraction `phi in [0, 1]` applied
//! multiplicatively to the spray valve: the plant delivers `(1 - phi) * u`.
//! Profiles define synthetic ground truth for simulation; the log-extraction
//! path reconstructs `phi(t)` from commanded vs. delivered valve positions
//! recorded by a historian.

use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};
use crate::plant::{table_value, validate_table};

/// Time profile of the true fault fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FaultProfile {
    Constant {
        level: f64,
    },
    /// Right-continuous jump: `before` for `t < t0`, `after` for `t >= t0`.
    Step {
        t0: f64,
        before: f64,
        after: f64,
    },
    /// Linear transition from `from` at `t0` to `to` at `t1`, held flat
    /// outside `[t0, t1]`.
    Ramp {
        t0: f64,
        from: f64,
        t1: f64,
        to: f64,
    },
    /// Piecewise-linear interpolation through `(t, phi)` breakpoints,
    /// held flat outside the table.
    Table {
        points: Vec<(f64, f64)>,
    },
}

fn level_ok(what: &str, v: f64) -> SimResult<()> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(SimError::Config(format!(
            "fault {what} must lie in [0, 1], got {v}"
        )))
    }
}

impl FaultProfile {
    pub fn validate(&self) -> SimResult<()> {
        match self {
            FaultProfile::Constant { level } => level_ok("level", *level),
            FaultProfile::Step { t0, before, after } => {
                if !t0.is_finite() {
                    return Err(SimError::Config(format!(
                        "fault step t0 must be finite, got {t0}"
                    )));
                }
                level_ok("step before", *before)?;
                level_ok("step after", *after)
            }
            FaultProfile::Ramp { t0, from, t1, to } => {
                level_ok("ramp from", *from)?;
                level_ok("ramp to", *to)?;
                if !t0.is_finite() || !t1.is_finite() || t1 <= t0 {
                    return Err(SimError::Config(format!(
                        "fault ramp needs finite t1 > t0, got t0 = {t0}, t1 = {t1}"
                    )));
                }
                Ok(())
            }
            FaultProfile::Table { points } => {
                validate_table(points)?;
                for &(_, v) in points {
                    level_ok("table value", v)?;
                }
                Ok(())
            }
        }
    }

    /// Fault fraction at time `t`. Total for all finite `t`; validated
    /// profiles always return values in `[0, 1]`.
    pub fn at(&self, t: f64) -> f64 {
        match self {
            FaultProfile::Constant { level } => *level,
            FaultProfile::Step { t0, before, after } => {
                if t < *t0 {
                    *before
                } else {
                    *after
                }
            }
            FaultProfile::Ramp { t0, from, t1, to } => {
                if t <= *t0 {
                    *from
                } else if t >= *t1 {
                    *to
                } else {
                    from + (t - t0) / (t1 - t0) * (to - from)
                }
            }
            FaultProfile::Table { points } => table_value(points, t),
        }
    }

    /// Times after which the profile stops changing discontinuously or
    /// piecewise: step jump, ramp endpoints, table breakpoints. Used to
    /// anchor settling-time measurement after the last fault event.
    pub fn events(&self) -> Vec<f64> {
        match self {
            FaultProfile::Constant { .. } => Vec::new(),
            FaultProfile::Step { t0, .. } => vec![*t0],
            FaultProfile::Ramp { t0, t1, .. } => vec![*t0, *t1],
            FaultProfile::Table { points } => points.iter().map(|&(t, _)| t).collect(),
        }
    }
}

/// One valve historian record: commanded and actually delivered position,
/// both as fractions of full travel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValveLogRecord {
    pub t_s: f64,
    pub u_cmd: f64,
    pub u_actual: f64,
}

/// Thresholds for turning log records into fault samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionConfig {
    /// Commands below this are too small to divide by; such records are
    /// skipped rather than trusted.
    pub cmd_floor: f64,
    /// Tolerated measurement slack before `u_actual > u_cmd` is flagged
    /// as an overdelivery anomaly.
    pub overdelivery_slack: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            cmd_floor: 0.05,
            overdelivery_slack: 0.02,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> SimResult<()> {
        if !(self.cmd_floor.is_finite() && self.cmd_floor > 0.0) {
            return Err(SimError::Config(format!(
                "cmd_floor must be finite and > 0, got {}",
                self.cmd_floor
            )));
        }
        if !(self.overdelivery_slack.is_finite() && self.overdelivery_slack >= 0.0) {
            return Err(SimError::Config(format!(
                "overdelivery_slack must be finite and >= 0, got {}",
                self.overdelivery_slack
            )));
        }
        Ok(())
    }
}

/// Fault evidence extracted from a single log record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultSample {
    /// `Some(phi)` when the command was large enough to divide by;
    /// `None` marks a skipped (sub-floor) record.
    pub phi: Option<f64>,
    /// The valve delivered measurably more than commanded. The sample is
    /// kept (clamped), but flagged for reporting.
    pub overdelivery: bool,
}

/// Loss-of-effectiveness fraction implied by one record:
/// `phi = 1 - u_actual / u_cmd`, clamped to `[0, 1]`.
///
/// Records with `u_cmd < cmd_floor` yield a skip marker (no divide);
/// overdelivery beyond the slack is flagged either way.
pub fn fault_from_record(rec: &ValveLogRecord, cfg: &ExtractionConfig) -> FaultSample {
    let overdelivery = rec.u_actual > rec.u_cmd + cfg.overdelivery_slack;
    if rec.u_cmd < cfg.cmd_floor {
        return FaultSample {
            phi: None,
            overdelivery,
        };
    }
    let phi = (1.0 - rec.u_actual / rec.u_cmd).clamp(0.0, 1.0);
    FaultSample {
        phi: Some(phi),
        overdelivery,
    }
}

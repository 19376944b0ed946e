//! Spray-valve controllers: a fault-compensating one-sided sliding-mode
//! law and a conventional PID baseline.
//!
//! Spray water can only cool. Both controllers therefore command in
//! `[0, u_max]`, and the sliding-mode law is *one-sided by construction*:
//! whenever the sliding surface `s = x1 - x1_ref` is at or below zero
//! (steam at or below setpoint) it commands exactly zero spray.
//!
//! The sliding-mode command is rescaled by the estimated remaining valve
//! effectiveness `1 - phi_hat`, which restores control authority under a
//! loss-of-effectiveness fault without retuning.

use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};
use crate::plant::{table_slope, table_value, validate_table};

/// Highest fault fraction the compensation divides by; estimates above
/// this are treated as 0.95 so the command stays bounded even when the
/// estimator reports a near-total loss.
pub const PHI_COMP_CEIL: f64 = 0.95;

/// Sliding-mode controller parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmcConfig {
    /// Reaching gain: full corrective authority once `s >= delta`.
    pub k: f64,
    /// Boundary-layer width (degrees C) over which the command ramps in.
    pub delta: f64,
    /// Regularizer in the effectiveness division, keeps `1 - phi_hat + epsilon > 0`.
    pub epsilon: f64,
    /// Actuator ceiling (valve fraction).
    pub u_max: f64,
}

impl SmcConfig {
    pub fn validate(&self) -> SimResult<()> {
        for (name, v) in [
            ("k", self.k),
            ("delta", self.delta),
            ("epsilon", self.epsilon),
            ("u_max", self.u_max),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(SimError::Config(format!(
                    "smc parameter {name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Sliding-mode command and the intermediate quantities worth logging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmcOutput {
    /// Valve command in `[0, u_max]`.
    pub u: f64,
    /// Sliding surface `x1 - x1_ref`.
    pub s: f64,
    /// Pre-compensation reaching term `k * min(1, s/delta)` (0 for `s <= 0`).
    pub v: f64,
}

/// One-sided boundary-layer sliding-mode law with fault compensation:
///
/// ```text
/// s = x1 - x1_ref
/// v = k * min(1, s/delta)              for s > 0, else 0
/// u = min(v / (1 - phi_hat + epsilon), u_max)
/// ```
///
/// `phi_hat` is clamped to `[0, PHI_COMP_CEIL]` before the division.
/// For `s <= 0` the command is exactly zero — spray cannot heat.
pub fn smc_compute(x1: f64, x1_ref: f64, phi_hat: f64, cfg: &SmcConfig) -> SmcOutput {
    let s = x1 - x1_ref;
    if s <= 0.0 {
        return SmcOutput { u: 0.0, s, v: 0.0 };
    }
    let v = cfg.k * (s / cfg.delta).min(1.0);
    let phi = phi_hat.clamp(0.0, PHI_COMP_CEIL);
    let u = (v / (1.0 - phi + cfg.epsilon)).min(cfg.u_max);
    SmcOutput { u, s, v }
}

/// PID baseline parameters. The error convention is `e = x1 - x1_ref`:
/// positive error (over-temperature) opens the spray valve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidConfig {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Actuator ceiling shared with the sliding-mode law.
    pub u_max: f64,
    /// Hard clamp on the integral state (anti-windup backstop).
    pub i_min: f64,
    pub i_max: f64,
}

impl PidConfig {
    pub fn validate(&self) -> SimResult<()> {
        for (name, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !v.is_finite() || v < 0.0 {
                return Err(SimError::Config(format!(
                    "pid gain {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if !(self.u_max.is_finite() && self.u_max > 0.0) {
            return Err(SimError::Config(format!(
                "pid u_max must be finite and > 0, got {}",
                self.u_max
            )));
        }
        if !(self.i_min <= 0.0 && 0.0 <= self.i_max) {
            return Err(SimError::Config(format!(
                "pid integral clamp must bracket zero, got [{}, {}]",
                self.i_min, self.i_max
            )));
        }
        Ok(())
    }
}

/// Integrator and derivative memory between calls.
#[derive(Debug, Clone, Copy, Default)]
pub struct PidState {
    pub integral: f64,
    prev_error: Option<f64>,
}

/// One PID evaluation at sample time `dt`.
///
/// The command is `clamp(kp*e + ki*I + kd*de, 0, u_max)`. Anti-windup is
/// conditional integration: the integral is frozen while the *unclamped*
/// output is saturated in the same direction as the error, and the
/// integral state is additionally hard-clamped to `[i_min, i_max]`.
/// Integration runs after the output is formed, so the command at time
/// `t` depends only on errors up to and including `t - dt`'s integral.
pub fn pid_step(state: &mut PidState, x1: f64, x1_ref: f64, dt: f64, cfg: &PidConfig) -> f64 {
    let e = x1 - x1_ref;
    let de = match state.prev_error {
        Some(prev) => (e - prev) / dt,
        None => 0.0,
    };
    let unclamped = cfg.kp * e + cfg.ki * state.integral + cfg.kd * de;
    let u = unclamped.clamp(0.0, cfg.u_max);
    let windup_high = unclamped > cfg.u_max && e > 0.0;
    let windup_low = unclamped < 0.0 && e < 0.0;
    if !(windup_high || windup_low) {
        state.integral = (state.integral + e * dt).clamp(cfg.i_min, cfg.i_max);
    }
    state.prev_error = Some(e);
    u
}

/// Setpoint profile for the controlled temperature `x1`, with its
/// analytic rate for feedforward-style consumers and reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Reference {
    Constant {
        value: f64,
    },
    /// Right-continuous setpoint jump. The reported rate is 0 on both
    /// sides; the jump time itself is exposed through `events`.
    Step {
        t0: f64,
        before: f64,
        after: f64,
    },
    /// Piecewise-linear setpoint schedule, held flat outside the table;
    /// the rate is the current segment's slope.
    Table {
        points: Vec<(f64, f64)>,
    },
}

impl Reference {
    pub fn validate(&self) -> SimResult<()> {
        match self {
            Reference::Constant { value } => {
                if value.is_finite() {
                    Ok(())
                } else {
                    Err(SimError::Config(format!(
                        "reference value must be finite, got {value}"
                    )))
                }
            }
            Reference::Step { t0, before, after } => {
                if t0.is_finite() && before.is_finite() && after.is_finite() {
                    Ok(())
                } else {
                    Err(SimError::Config(
                        "reference step fields must be finite".into(),
                    ))
                }
            }
            Reference::Table { points } => validate_table(points),
        }
    }

    /// `(setpoint, rate)` at time `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match self {
            Reference::Constant { value } => (*value, 0.0),
            Reference::Step { t0, before, after } => {
                let v = if t < *t0 { *before } else { *after };
                (v, 0.0)
            }
            Reference::Table { points } => (table_value(points, t), table_slope(points, t)),
        }
    }

    /// Times of setpoint discontinuities or schedule breakpoints.
    pub fn events(&self) -> Vec<f64> {
        match self {
            Reference::Constant { .. } => Vec::new(),
            Reference::Step { t0, .. } => vec![*t0],
            Reference::Table { points } => points.iter().map(|&(t, _)| t).collect(),
        }
    }

    /// Largest setpoint magnitude the profile can ever produce (piecewise
    /// profiles attain their extremes at breakpoints).
    pub fn bound(&self) -> f64 {
        match self {
            Reference::Constant { value } => value.abs(),
            Reference::Step { before, after, .. } => before.abs().max(after.abs()),
            Reference::Table { points } => points.iter().map(|&(_, v)| v.abs()).fold(0.0, f64::max),
        }
    }
}

//! Sliding-mode observer for the two-state superheater model.
//!
//! The observer runs a copy of the plant model at the estimated state and
//! the estimated fault fraction, corrected by boundary-layer sliding
//! injections driven by the measured output error `e1 = y - xhat1`:
//!
//! ```text
//! dxhat1 = k2*(k1*d1 + d7*(xhat2 - xhat1) - d3)           + lambda1 * sat(e1/delta1)
//! dxhat2 = k3*((d2 + ue)*(d4 - xhat2) - ue*(d4 - d5)
//!              + m_in*d6)                                  + lambda2 * sat(e1/delta2)
//! ue = (1 - phi_hat) * u * u_scale
//! ```
//!
//! Both injections are driven by the measurable output error; the second
//! channel receives it through its own boundary-layer width `delta2`.
//! `sat` is the unit saturation, so each correction is bounded by its
//! gain and the boundary layers keep the discretized dynamics
//! chattering-free.

use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};
use crate::plant::{
    faulty_rhs, rk4_step, Deriv, DisturbanceGenerator, Disturbances, PlantParams, PlantState,
};

/// Injection gains and boundary-layer widths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObserverGains {
    pub lambda1: f64,
    pub lambda2: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl ObserverGains {
    pub fn validate(&self) -> SimResult<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !v.is_finite() || v < 0.0 {
                return Err(SimError::Config(format!(
                    "observer gain {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        for (name, v) in [("delta1", self.delta1), ("delta2", self.delta2)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(SimError::Config(format!(
                    "observer boundary layer {name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Estimated plant state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObserverState {
    pub xhat1: f64,
    pub xhat2: f64,
}

/// Unit saturation: identity inside [-1, 1], clamped outside.
pub fn sat(z: f64) -> f64 {
    z.clamp(-1.0, 1.0)
}

/// Observer derivative at one instant: model copy at the estimates plus
/// the two output-error injections.
pub fn observer_rhs(
    xh: &ObserverState,
    y: f64,
    u: f64,
    phi_hat: f64,
    d: &Disturbances,
    p: &PlantParams,
    g: &ObserverGains,
) -> SimResult<Deriv> {
    let e1 = y - xh.xhat1;
    let model = faulty_rhs(
        &PlantState {
            x1: xh.xhat1,
            x2: xh.xhat2,
        },
        u,
        phi_hat,
        d,
        p,
    )?;
    let dxh1 = model.dx1 + g.lambda1 * sat(e1 / g.delta1);
    let dxh2 = model.dx2 + g.lambda2 * sat(e1 / g.delta2);
    if dxh1.is_finite() && dxh2.is_finite() {
        Ok(Deriv {
            dx1: dxh1,
            dx2: dxh2,
        })
    } else {
        Err(SimError::NonFinite {
            t: f64::NAN,
            what: format!("observer derivative ({dxh1}, {dxh2})"),
        })
    }
}

/// One RK4 observer step. The measurement `y`, command `u`, and fault
/// estimate `phi_hat` are zero-order-held over the step; disturbances are
/// evaluated at the substage times, matching the plant integrator.
#[allow(clippy::too_many_arguments)]
pub fn observer_step(
    xh: &ObserverState,
    y: f64,
    u: f64,
    phi_hat: f64,
    t: f64,
    dt: f64,
    gen: &DisturbanceGenerator,
    p: &PlantParams,
    g: &ObserverGains,
) -> SimResult<ObserverState> {
    let (xhat1, xhat2) = rk4_step((xh.xhat1, xh.xhat2), t, dt, |tau, (a, b)| {
        let d = gen.at(tau, p)?;
        let dv = observer_rhs(
            &ObserverState { xhat1: a, xhat2: b },
            y,
            u,
            phi_hat,
            &d,
            p,
            g,
        )?;
        Ok((dv.dx1, dv.dx2))
    })?;
    Ok(ObserverState { xhat1, xhat2 })
}

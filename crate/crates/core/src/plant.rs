//! Superheater / desuperheater steam temperature dynamics.
//!
//! The plant is a two-state lumped thermal model. `x1` is the superheater
//! outlet steam temperature (the measured, controlled output) and `x2` is
//! the desuperheater (attemperator) outlet temperature. Spray water
//! injected through the control valve `u` cools `x2`; gas-side heat input
//! raises `x1`. The valve only enters the `x2` balance, so an actuator
//! fault never acts on `x1` directly — it propagates through `x2`.
//!
//! A loss-of-effectiveness fault scales the *delivered* spray flow:
//! `u_eff = (1 - phi) * u` with `phi in [0, 1]`. `phi = 0` is a healthy
//! valve, `phi = 1` a fully stuck-closed one.
//!
//! Integration is classical fixed-step RK4. Exogenous disturbance channels
//! are re-evaluated at every RK4 substage time; sampled quantities
//! (measurements, commands, fault estimates) are zero-order-held over a
//! step by the callers that build the derivative closures.

use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};

/// Physical plant constants.
///
/// The lumped model coefficients `k1 = H/cp`, `k2 = 1/(rho_s * v_s)` and
/// `k3 = 1/m_out_dsh` are always recomputed from the stored constituents,
/// never cached, so they cannot drift out of sync.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantParams {
    /// Gas-side heat release per unit of the fuel-flow channel `d1`.
    pub heating_value: f64,
    /// Steam specific heat capacity.
    pub cp: f64,
    /// Steam density in the superheater volume.
    pub rho_s: f64,
    /// Superheater steam volume.
    pub v_s: f64,
    /// Desuperheater outlet mass flow (sets the mixing-balance time scale).
    pub m_out_dsh: f64,
    /// Steam mass flow entering the desuperheater energy balance.
    pub m_in: f64,
    /// Spray mass flow delivered per unit of valve command, so `u` can be
    /// a normalized fraction while the energy balance works in flow units.
    #[serde(default = "default_u_scale")]
    pub u_scale: f64,
}

fn default_u_scale() -> f64 {
    1.0
}

impl PlantParams {
    /// Heat-input gain on the superheater balance, `H / cp`.
    pub fn k1(&self) -> f64 {
        self.heating_value / self.cp
    }

    /// Inverse thermal capacitance of the superheater volume,
    /// `1 / (rho_s * v_s)`.
    pub fn k2(&self) -> f64 {
        1.0 / (self.rho_s * self.v_s)
    }

    /// Inverse desuperheater outlet flow, `1 / m_out_dsh`.
    pub fn k3(&self) -> f64 {
        1.0 / self.m_out_dsh
    }

    /// All constituents must be finite and strictly positive.
    pub fn validate(&self) -> SimResult<()> {
        let fields = [
            ("heating_value", self.heating_value),
            ("cp", self.cp),
            ("rho_s", self.rho_s),
            ("v_s", self.v_s),
            ("m_out_dsh", self.m_out_dsh),
            ("m_in", self.m_in),
            ("u_scale", self.u_scale),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v <= 0.0 {
                return Err(SimError::Config(format!(
                    "plant parameter {name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Small round-number parameter set used throughout the test suite:
    /// `k1 = 2.0`, `k2 = 0.05`, `k3 = 0.1`, `m_in = 10`.
    pub fn bench() -> Self {
        PlantParams {
            heating_value: 2.0,
            cp: 1.0,
            rho_s: 20.0,
            v_s: 1.0,
            m_out_dsh: 10.0,
            m_in: 10.0,
            u_scale: 1.0,
        }
    }
}

/// One snapshot of the seven exogenous channels.
///
/// `d1` fuel flow, `d2` desuperheater through-flow coefficient, `d3`
/// heat-loss term, `d4` inlet steam temperature, `d5` spray water
/// temperature, `d6` inlet-temperature rate feed-through, `d7` superheater
/// outlet-flow coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disturbances {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    pub d5: f64,
    pub d6: f64,
    pub d7: f64,
}

impl Disturbances {
    /// Validates the physical sanity conditions this model relies on:
    /// every channel finite, `d7 > 0`, `k2 * d7^2 < 1` (well-posed
    /// outlet-flow coupling), and `d4 > d5` (steam hotter than spray).
    pub fn checked(self, p: &PlantParams) -> SimResult<Self> {
        for (name, v) in [
            ("d1", self.d1),
            ("d2", self.d2),
            ("d3", self.d3),
            ("d4", self.d4),
            ("d5", self.d5),
            ("d6", self.d6),
            ("d7", self.d7),
        ] {
            if !v.is_finite() {
                return Err(SimError::Config(format!(
                    "disturbance channel {name} is not finite ({v})"
                )));
            }
        }
        if self.d7 <= 0.0 {
            return Err(SimError::Config(format!(
                "disturbance d7 must be > 0, got {}",
                self.d7
            )));
        }
        let coupling = p.k2() * self.d7 * self.d7;
        if coupling >= 1.0 {
            return Err(SimError::Config(format!(
                "outlet-flow coupling k2*d7^2 = {coupling} must be < 1"
            )));
        }
        if self.d4 <= self.d5 {
            return Err(SimError::Config(format!(
                "inlet steam temperature d4 = {} must exceed spray temperature d5 = {}",
                self.d4, self.d5
            )));
        }
        Ok(self)
    }
}

/// Scalar time profile for one exogenous channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Signal {
    Constant {
        value: f64,
    },
    /// Right-continuous jump: `before` for `t < t0`, `after` for `t >= t0`.
    Step {
        t0: f64,
        before: f64,
        after: f64,
    },
    /// `mean + amplitude * sin(2*pi*t / period)`.
    Sine {
        mean: f64,
        amplitude: f64,
        period: f64,
    },
    /// Piecewise-linear interpolation through `(t, value)` breakpoints,
    /// held constant outside the table. Breakpoints strictly increasing.
    Table {
        points: Vec<(f64, f64)>,
    },
}

impl Signal {
    pub fn validate(&self) -> SimResult<()> {
        match self {
            Signal::Constant { value } => finite("constant value", *value),
            Signal::Step { t0, before, after } => {
                finite("step t0", *t0)?;
                finite("step before", *before)?;
                finite("step after", *after)
            }
            Signal::Sine {
                mean,
                amplitude,
                period,
            } => {
                finite("sine mean", *mean)?;
                finite("sine amplitude", *amplitude)?;
                finite("sine period", *period)?;
                if *period <= 0.0 {
                    return Err(SimError::Config(format!(
                        "sine period must be > 0, got {period}"
                    )));
                }
                Ok(())
            }
            Signal::Table { points } => validate_table(points),
        }
    }

    /// Value at time `t`. Total for all finite `t`.
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Signal::Constant { value } => *value,
            Signal::Step { t0, before, after } => {
                if t < *t0 {
                    *before
                } else {
                    *after
                }
            }
            Signal::Sine {
                mean,
                amplitude,
                period,
            } => mean + amplitude * (2.0 * std::f64::consts::PI * t / period).sin(),
            Signal::Table { points } => table_value(points, t),
        }
    }

    /// Time derivative at `t`. Steps report 0 on both sides of the jump
    /// (the discontinuity itself is exposed through `events`); tables
    /// report the slope of the segment starting at `t` (later segment
    /// wins at a breakpoint) and 0 outside the table.
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Signal::Constant { .. } | Signal::Step { .. } => 0.0,
            Signal::Sine {
                amplitude, period, ..
            } => {
                let w = 2.0 * std::f64::consts::PI / period;
                amplitude * w * (w * t).cos()
            }
            Signal::Table { points } => table_slope(points, t),
        }
    }

    /// Conservative `(min, max)` range over all time.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Signal::Constant { value } => (*value, *value),
            Signal::Step { before, after, .. } => (before.min(*after), before.max(*after)),
            Signal::Sine {
                mean, amplitude, ..
            } => (mean - amplitude.abs(), mean + amplitude.abs()),
            Signal::Table { points } => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &(_, v) in points {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                (lo, hi)
            }
        }
    }

    /// Times at which the profile changes non-smoothly (step jumps, table
    /// breakpoints). Used to anchor settling-time measurements.
    pub fn events(&self) -> Vec<f64> {
        match self {
            Signal::Constant { .. } | Signal::Sine { .. } => Vec::new(),
            Signal::Step { t0, .. } => vec![*t0],
            Signal::Table { points } => points.iter().map(|&(t, _)| t).collect(),
        }
    }
}

fn finite(what: &str, v: f64) -> SimResult<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(SimError::Config(format!("{what} must be finite, got {v}")))
    }
}

pub(crate) fn validate_table(points: &[(f64, f64)]) -> SimResult<()> {
    if points.is_empty() {
        return Err(SimError::Config(
            "table profile needs at least one breakpoint".into(),
        ));
    }
    for &(t, v) in points {
        finite("table breakpoint time", t)?;
        finite("table breakpoint value", v)?;
    }
    for w in points.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(SimError::Config(format!(
                "table breakpoints must be strictly increasing ({} then {})",
                w[0].0, w[1].0
            )));
        }
    }
    Ok(())
}

/// Linear interpolation through breakpoints, held flat outside the table.
pub(crate) fn table_value(points: &[(f64, f64)], t: f64) -> f64 {
    debug_assert!(!points.is_empty());
    if t <= points[0].0 {
        return points[0].1;
    }
    let last = points[points.len() - 1];
    if t >= last.0 {
        return last.1;
    }
    // points is strictly increasing, so a linear scan finds the segment.
    for w in points.windows(2) {
        let (t0, v0) = w[0];
        let (t1, v1) = w[1];
        if t < t1 {
            let frac = (t - t0) / (t1 - t0);
            return v0 + frac * (v1 - v0);
        }
    }
    last.1
}

pub(crate) fn table_slope(points: &[(f64, f64)], t: f64) -> f64 {
    if points.len() < 2 || t < points[0].0 || t >= points[points.len() - 1].0 {
        return 0.0;
    }
    for w in points.windows(2) {
        let (t0, v0) = w[0];
        let (t1, v1) = w[1];
        if t >= t0 && t < t1 {
            return (v1 - v0) / (t1 - t0);
        }
    }
    0.0
}

/// Time profiles for all seven disturbance channels.
///
/// With `d6_tracks_d4_rate` set, `d6` is served as the analytic time
/// derivative of the `d4` profile (its own profile is ignored), keeping
/// the inlet-temperature rate feed-through consistent with the inlet
/// temperature itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceGenerator {
    pub d1: Signal,
    pub d2: Signal,
    pub d3: Signal,
    pub d4: Signal,
    pub d5: Signal,
    pub d6: Signal,
    pub d7: Signal,
    #[serde(default)]
    pub d6_tracks_d4_rate: bool,
}

impl DisturbanceGenerator {
    /// All seven channels held at fixed values.
    pub fn constant(d: [f64; 7]) -> Self {
        let c = |value| Signal::Constant { value };
        DisturbanceGenerator {
            d1: c(d[0]),
            d2: c(d[1]),
            d3: c(d[2]),
            d4: c(d[3]),
            d5: c(d[4]),
            d6: c(d[5]),
            d7: c(d[6]),
            d6_tracks_d4_rate: false,
        }
    }

    /// Validates each channel profile and checks the physical-sanity
    /// invariants against worst-case channel bounds, so any evaluation
    /// at runtime yields an admissible `Disturbances`.
    pub fn validate(&self, p: &PlantParams) -> SimResult<()> {
        for (name, s) in [
            ("d1", &self.d1),
            ("d2", &self.d2),
            ("d3", &self.d3),
            ("d4", &self.d4),
            ("d5", &self.d5),
            ("d6", &self.d6),
            ("d7", &self.d7),
        ] {
            s.validate()
                .map_err(|e| SimError::Config(format!("disturbance {name}: {e}")))?;
        }
        let (d7_lo, d7_hi) = self.d7.bounds();
        if d7_lo <= 0.0 {
            return Err(SimError::Config(format!(
                "disturbance d7 must stay > 0 (worst case {d7_lo})"
            )));
        }
        let coupling = p.k2() * d7_hi * d7_hi;
        if coupling >= 1.0 {
            return Err(SimError::Config(format!(
                "outlet-flow coupling k2*d7^2 reaches {coupling}; must stay < 1"
            )));
        }
        let (d4_lo, _) = self.d4.bounds();
        let (_, d5_hi) = self.d5.bounds();
        if d4_lo <= d5_hi {
            return Err(SimError::Config(format!(
                "inlet steam temperature d4 (min {d4_lo}) must stay above spray temperature d5 (max {d5_hi})"
            )));
        }
        Ok(())
    }

    /// Channel snapshot at time `t`, checked against the `Disturbances`
    /// invariants.
    pub fn at(&self, t: f64, p: &PlantParams) -> SimResult<Disturbances> {
        let d6 = if self.d6_tracks_d4_rate {
            self.d4.derivative(t)
        } else {
            self.d6.value(t)
        };
        Disturbances {
            d1: self.d1.value(t),
            d2: self.d2.value(t),
            d3: self.d3.value(t),
            d4: self.d4.value(t),
            d5: self.d5.value(t),
            d6,
            d7: self.d7.value(t),
        }
        .checked(p)
    }

    /// Worst-case bound on the gas-side drift `|k1*d1 - d3|`, from the
    /// channel ranges.
    pub fn drift_bound(&self, p: &PlantParams) -> f64 {
        let (d1_lo, d1_hi) = self.d1.bounds();
        let (d3_lo, d3_hi) = self.d3.bounds();
        let k1 = p.k1();
        (k1 * d1_hi - d3_lo).abs().max((k1 * d1_lo - d3_hi).abs())
    }
}

/// Plant state: superheater outlet temperature `x1` and desuperheater
/// outlet temperature `x2`, both in degrees C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub x1: f64,
    pub x2: f64,
}

/// State derivative in degrees C per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deriv {
    pub dx1: f64,
    pub dx2: f64,
}

/// Healthy-valve dynamics; identical arithmetic path to `faulty_rhs` with
/// `phi = 0`, so the two agree bitwise on a healthy plant.
pub fn nominal_rhs(x: &PlantState, u: f64, d: &Disturbances, p: &PlantParams) -> SimResult<Deriv> {
    faulty_rhs(x, u, 0.0, d, p)
}

/// Dynamics with a multiplicative loss-of-effectiveness valve fault.
///
/// ```text
/// dx1 = k2 * (k1*d1 + d7*(x2 - x1) - d3)
/// dx2 = k3 * ((d2 + ue)*(d4 - x2) - ue*(d4 - d5) + m_in*d6),   ue = (1-phi)*u*u_scale
/// ```
///
/// The fault scales only the delivered spray flow `ue`; `dx1` does not
/// depend on `u` or `phi` at all.
pub fn faulty_rhs(
    x: &PlantState,
    u: f64,
    phi: f64,
    d: &Disturbances,
    p: &PlantParams,
) -> SimResult<Deriv> {
    debug_assert!(
        (0.0..=1.0).contains(&phi),
        "fault fraction out of range: {phi}"
    );
    debug_assert!(u >= 0.0, "valve command must be non-negative: {u}");
    let ue = (1.0 - phi) * u * p.u_scale;
    let dx1 = p.k2() * (p.k1() * d.d1 + d.d7 * (x.x2 - x.x1) - d.d3);
    let dx2 = p.k3() * ((d.d2 + ue) * (d.d4 - x.x2) - ue * (d.d4 - d.d5) + p.m_in * d.d6);
    if dx1.is_finite() && dx2.is_finite() {
        Ok(Deriv { dx1, dx2 })
    } else {
        Err(SimError::NonFinite {
            t: f64::NAN,
            what: format!("plant derivative (dx1 = {dx1}, dx2 = {dx2})"),
        })
    }
}

/// One classical RK4 step on a pair of states.
///
/// The derivative closure receives the substage time, so time-varying
/// exogenous inputs are evaluated at `t`, `t + dt/2`, and `t + dt`.
/// Anything meant to be zero-order-held over the step must be captured
/// by the closure as a constant.
pub fn rk4_step<F>(y: (f64, f64), t: f64, dt: f64, mut f: F) -> SimResult<(f64, f64)>
where
    F: FnMut(f64, (f64, f64)) -> SimResult<(f64, f64)>,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::Config(format!("dt must be positive, got {dt}")));
    }
    let k1 = f(t, y)?;
    let k2 = f(t + dt / 2.0, (y.0 + dt / 2.0 * k1.0, y.1 + dt / 2.0 * k1.1))?;
    let k3 = f(t + dt / 2.0, (y.0 + dt / 2.0 * k2.0, y.1 + dt / 2.0 * k2.1))?;
    let k4 = f(t + dt, (y.0 + dt * k3.0, y.1 + dt * k3.1))?;
    let next = (
        y.0 + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        y.1 + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    );
    if next.0.is_finite() && next.1.is_finite() {
        Ok(next)
    } else {
        Err(SimError::NonFinite {
            t,
            what: format!("RK4 state update ({}, {})", next.0, next.1),
        })
    }
}

/// One plant step under a (possibly faulty) valve: `u` and `phi` are
/// held constant over the step, disturbances follow the generator at
/// each substage time.
pub fn plant_step(
    x: &PlantState,
    u: f64,
    phi: f64,
    t: f64,
    dt: f64,
    gen: &DisturbanceGenerator,
    p: &PlantParams,
) -> SimResult<PlantState> {
    let (x1, x2) = rk4_step((x.x1, x.x2), t, dt, |tau, (x1, x2)| {
        let d = gen.at(tau, p)?;
        let dv = faulty_rhs(&PlantState { x1, x2 }, u, phi, &d, p)?;
        Ok((dv.dx1, dv.dx2))
    })?;
    Ok(PlantState { x1, x2 })
}

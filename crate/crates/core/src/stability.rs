//! Stability certificates for the observer/controller/estimator loop.
//!
//! Three kinds of guarantees are collected here:
//!
//! 1. **Observer gain conditions** — strict lower thresholds on the two
//!    sliding injection gains, built from Lipschitz-style bounds of the
//!    plant nonlinearities over a declared operating envelope.
//! 2. **Ultimate-bound report** — a Lyapunov-based radius such that the
//!    combined error/surface vector is uniformly ultimately bounded
//!    inside it, assembled from Young-inequality constants.
//! 3. **Trainer contraction** — a step-size condition under which one
//!    gradient-descent update is a contraction toward the loss minimizer,
//!    plus the resulting geometric bound on weight deviation.
//!
//! All bounds are *sufficient* conditions evaluated with worst-case
//! constants, so the reported radii are typically loose; simulated
//! trajectories are monitored separately (see [`lyapunov_monitor`]) and
//! compared against the certificate rather than substituted for it.

use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};
use crate::observer::ObserverGains;
use crate::plant::PlantParams;

/// Declared ranges the closed loop is certified over. The certificate is
/// only as good as this envelope: trajectories that leave it void the
/// Lipschitz constants derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatingEnvelope {
    /// Spray-chamber temperature range.
    pub x2_min: f64,
    pub x2_max: f64,
    /// Largest effective spray flow the actuator can deliver
    /// (command ceiling times the command-to-flow scale).
    pub u_max_flow: f64,
    /// Steam mass-flow disturbance range.
    pub d2_min: f64,
    pub d2_max: f64,
    /// Spray-water temperature range.
    pub d5_min: f64,
    pub d5_max: f64,
    /// Worst-case fault estimation mismatch carried into the bound.
    pub delta_phi: f64,
}

impl Default for OperatingEnvelope {
    fn default() -> Self {
        Self {
            x2_min: 430.0,
            x2_max: 580.0,
            u_max_flow: 1.0,
            d2_min: 10.0,
            d2_max: 10.0,
            d5_min: 40.0,
            d5_max: 40.0,
            delta_phi: 0.1,
        }
    }
}

impl OperatingEnvelope {
    pub fn validate(&self) -> SimResult<()> {
        let pairs = [
            ("x2", self.x2_min, self.x2_max),
            ("d2", self.d2_min, self.d2_max),
            ("d5", self.d5_min, self.d5_max),
        ];
        for (name, lo, hi) in pairs {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(SimError::Config(format!(
                    "envelope {name} range must be finite with min <= max, got [{lo}, {hi}]"
                )));
            }
        }
        if !(self.u_max_flow.is_finite() && self.u_max_flow >= 0.0) {
            return Err(SimError::Config(format!(
                "envelope u_max_flow must be finite and >= 0, got {}",
                self.u_max_flow
            )));
        }
        if !(self.delta_phi.is_finite() && (0.0..=1.0).contains(&self.delta_phi)) {
            return Err(SimError::Config(format!(
                "envelope delta_phi must lie in [0, 1], got {}",
                self.delta_phi
            )));
        }
        Ok(())
    }
}

/// Worst-case constants extracted from an [`OperatingEnvelope`]:
/// the state-coupling and fault-coupling Lipschitz bounds of the
/// spray-chamber balance, plus magnitude bounds used by the drift term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzBounds {
    /// Bound on the sensitivity of the chamber balance to `x2`
    /// (dominated by steam flow plus full spray flow).
    pub l_x: f64,
    /// Bound on its sensitivity to the fault fraction per unit flow
    /// (largest chamber-to-spray-water temperature gap).
    pub l_phi: f64,
    pub u_max_flow: f64,
    pub delta_phi: f64,
    /// Bound on the measured channel's exogenous drift.
    pub m_b: f64,
    /// Magnitude bound on the chamber temperature itself.
    pub m_x2: f64,
}

/// Evaluates the Lipschitz-style constants over the envelope. `m_b` is
/// the drift bound of the measured channel, available from
/// `DisturbanceGenerator::drift_bound`.
pub fn derive_lipschitz(env: &OperatingEnvelope, m_b: f64) -> SimResult<LipschitzBounds> {
    env.validate()?;
    if !(m_b.is_finite() && m_b >= 0.0) {
        return Err(SimError::Config(format!(
            "drift bound m_b must be finite and >= 0, got {m_b}"
        )));
    }
    Ok(LipschitzBounds {
        l_x: env.d2_max + env.u_max_flow,
        l_phi: (env.x2_max - env.d5_min)
            .abs()
            .max((env.x2_min - env.d5_max).abs()),
        u_max_flow: env.u_max_flow,
        delta_phi: env.delta_phi,
        m_b,
        m_x2: env.x2_min.abs().max(env.x2_max.abs()),
    })
}

/// One gain condition: the configured gain, the strict threshold it must
/// exceed, and how much headroom it has.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainCheck {
    pub gain: f64,
    pub threshold: f64,
    /// `gain - threshold`.
    pub margin_abs: f64,
    /// `gain / threshold - 1`, infinite for a zero threshold met by a
    /// positive gain.
    pub margin_rel: f64,
    /// Strict inequality: `gain > threshold`.
    pub satisfied: bool,
}

impl GainCheck {
    fn new(gain: f64, threshold: f64) -> Self {
        let margin_rel = if threshold > 0.0 {
            gain / threshold - 1.0
        } else if gain > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        Self {
            gain,
            threshold,
            margin_abs: gain - threshold,
            margin_rel,
            satisfied: gain > threshold,
        }
    }
}

/// Both observer gain conditions against one set of bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainCertificate {
    /// Measured-channel injection gain versus coupling through the model.
    pub channel1: GainCheck,
    /// Chamber-channel injection gain versus the worst fault-induced
    /// model error.
    pub channel2: GainCheck,
    pub all_satisfied: bool,
}

/// Strict sufficient conditions on the observer injection gains:
///
/// ```text
/// lambda1 > k2 * d7_max + k3 * l_x
/// lambda2 > k3 * l_phi * u_max_flow
/// ```
///
/// `d7_max` is the largest value the heat-transfer coefficient channel
/// can take over the scenario.
pub fn check_gain_conditions(
    gains: &ObserverGains,
    bounds: &LipschitzBounds,
    p: &PlantParams,
    d7_max: f64,
) -> GainCertificate {
    let th1 = p.k2() * d7_max + p.k3() * bounds.l_x;
    let th2 = p.k3() * bounds.l_phi * bounds.u_max_flow;
    let channel1 = GainCheck::new(gains.lambda1, th1);
    let channel2 = GainCheck::new(gains.lambda2, th2);
    GainCertificate {
        channel1,
        channel2,
        all_satisfied: channel1.satisfied && channel2.satisfied,
    }
}

/// Free constants of the Young-inequality completions in the
/// ultimate-bound derivation. [`YoungConstants::auto`] picks values that
/// keep every damping coefficient positive by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YoungConstants {
    pub alpha: f64,
    pub mu: f64,
    pub c: f64,
    pub beta: f64,
    /// Slack split off the measured-channel damping to absorb the
    /// injection bound (must stay below the damping it is split from).
    pub eta_small: f64,
}

impl YoungConstants {
    /// Default split: `alpha` matches the measured-channel damping,
    /// `mu = c = 1`, `beta` is sized so the chamber-channel damping comes
    /// out at exactly 1/4, and a quarter of the measured damping is
    /// reserved as slack.
    pub fn auto(p: &PlantParams, d7_max: f64, bounds: &LipschitzBounds) -> Self {
        let k2d7 = p.k2() * d7_max;
        let alpha = k2d7;
        let mu = 1.0;
        let c = 1.0;
        let beta = 2.0 * (p.k3() * bounds.l_x + mu / 2.0 + k2d7 * k2d7 / (2.0 * alpha)) + 1.0;
        let kappa1 = 0.5 * (k2d7 - alpha / 2.0);
        Self {
            alpha,
            mu,
            c,
            beta,
            eta_small: kappa1 / 2.0,
        }
    }

    pub fn validate(&self) -> SimResult<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("mu", self.mu),
            ("c", self.c),
            ("beta", self.beta),
            ("eta_small", self.eta_small),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(SimError::Config(format!(
                    "young constant {name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Assembled ultimate-bound certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct UubReport {
    /// Damping coefficient of the measured-channel error.
    pub kappa1: f64,
    /// Damping coefficient of the chamber-channel error.
    pub kappa2: f64,
    /// Damping coefficient of the sliding surface (positive as
    /// collected; treated as a damping margin by construction).
    pub kappa3: f64,
    /// Effective decay rate: the smallest damping after slack.
    pub kappa: f64,
    /// Which coefficient binds `kappa`.
    pub binding: &'static str,
    /// Additive disturbance terms, in the order they are summed.
    pub theta_terms: Vec<(&'static str, f64)>,
    /// Total disturbance level.
    pub theta: f64,
    /// Ultimate bound on the error/surface norm: `sqrt(theta / kappa)`.
    pub radius: f64,
}

/// Builds the ultimate-bound certificate. `ref_bound` caps the setpoint
/// magnitude entering through the surface dynamics. Fails with a
/// configuration error when any damping coefficient is non-positive —
/// there is no certificate at that configuration.
pub fn uub_radius(
    gains: &ObserverGains,
    bounds: &LipschitzBounds,
    young: &YoungConstants,
    p: &PlantParams,
    d7_max: f64,
    ref_bound: f64,
) -> SimResult<UubReport> {
    gains.validate()?;
    young.validate()?;
    if !(ref_bound.is_finite() && ref_bound >= 0.0) {
        return Err(SimError::Config(format!(
            "ref_bound must be finite and >= 0, got {ref_bound}"
        )));
    }
    if !(d7_max.is_finite() && d7_max > 0.0) {
        return Err(SimError::Config(format!(
            "d7_max must be finite and > 0, got {d7_max}"
        )));
    }
    let k2 = p.k2();
    let k3 = p.k3();
    let k2d7 = k2 * d7_max;

    let kappa1 = 0.5 * (k2d7 - young.alpha / 2.0);
    let kappa2 = 0.5
        * (young.beta / 2.0 - k3 * bounds.l_x - young.mu / 2.0 - k2d7 * k2d7 / (2.0 * young.alpha));
    let kappa3 = 0.5 * (k2d7 + young.c / 2.0 + 0.5 * k2d7 * k2d7);

    let candidates = [
        ("kappa1_minus_eta_small", kappa1 - young.eta_small),
        ("kappa2", kappa2),
        ("kappa3", kappa3),
    ];
    let (binding, kappa) = candidates
        .into_iter()
        .reduce(|min, c| if c.1 < min.1 { c } else { min })
        .expect("candidate list is non-empty");
    if kappa <= 0.0 {
        return Err(SimError::Config(format!(
            "no certificate at this configuration: damping coefficient {binding} = {kappa} is not positive"
        )));
    }

    let fault_mismatch = k3 * bounds.l_phi * bounds.u_max_flow * bounds.delta_phi;
    let drift = k2 * (bounds.m_b + d7_max * bounds.m_x2);
    let theta_terms = vec![
        ("theta_lambda1_delta1", gains.lambda1 * gains.delta1),
        (
            "theta_fault_mismatch",
            fault_mismatch * fault_mismatch / (2.0 * young.mu),
        ),
        ("theta_lambda2_delta2", gains.lambda2 * gains.delta2),
        ("theta_drift", drift * drift / (2.0 * young.c)),
        ("theta_ref", 0.5 * ref_bound * ref_bound),
        (
            "theta_young_lambda1",
            gains.lambda1 * gains.lambda1 / (4.0 * young.eta_small),
        ),
        (
            "theta_young_lambda2",
            gains.lambda2 * gains.lambda2 / (2.0 * young.beta),
        ),
    ];
    let theta: f64 = theta_terms.iter().map(|&(_, v)| v).sum();
    let radius = (theta / kappa).sqrt();
    Ok(UubReport {
        kappa1,
        kappa2,
        kappa3,
        kappa,
        binding,
        theta_terms,
        theta,
        radius,
    })
}

/// Parameters of the trainer contraction argument: step size, strong
/// convexity and smoothness of the (surrogate) loss, a bound on the
/// per-step gradient perturbation, and a norm bound on the minimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionParams {
    pub eta: f64,
    pub mu_g: f64,
    pub l_g: f64,
    /// Bound on the gradient noise injected each step (drifting data,
    /// regularization mismatch, ...).
    pub zeta: f64,
    /// Norm bound on the loss minimizer.
    pub m_norm: f64,
}

impl ContractionParams {
    pub fn validate(&self) -> SimResult<()> {
        for (name, v, strict) in [
            ("eta", self.eta, false),
            ("mu_g", self.mu_g, true),
            ("l_g", self.l_g, true),
            ("zeta", self.zeta, false),
            ("m_norm", self.m_norm, false),
        ] {
            let ok = v.is_finite() && if strict { v > 0.0 } else { v >= 0.0 };
            if !ok {
                return Err(SimError::Config(format!(
                    "contraction parameter {name} must be finite and {} got {v}",
                    if strict { "> 0," } else { ">= 0," }
                )));
            }
        }
        if self.l_g < self.mu_g {
            return Err(SimError::Config(format!(
                "smoothness l_g ({}) cannot be below strong convexity mu_g ({})",
                self.l_g, self.mu_g
            )));
        }
        Ok(())
    }
}

/// Per-step contraction factor of gradient descent on a `mu_g`-strongly
/// convex, `l_g`-smooth loss: `sqrt(1 - 2 eta mu_g + eta^2 l_g^2)`.
pub fn contraction_rho(eta: f64, mu_g: f64, l_g: f64) -> SimResult<f64> {
    let arg = 1.0 - 2.0 * eta * mu_g + eta * eta * l_g * l_g;
    if !arg.is_finite() || arg < 0.0 {
        return Err(SimError::Config(format!(
            "contraction factor undefined: 1 - 2*eta*mu_g + eta^2*l_g^2 = {arg}"
        )));
    }
    Ok(arg.sqrt())
}

/// Deviation of the trained weights from the minimizer after `k` steps,
/// starting `w0_dev` away: `rho^k w0_dev + eta zeta (1 - rho^k)/(1 - rho)`.
/// Requires an actual contraction (`rho < 1`).
pub fn weight_deviation_bound(params: &ContractionParams, k: u32, w0_dev: f64) -> SimResult<f64> {
    params.validate()?;
    if !(w0_dev.is_finite() && w0_dev >= 0.0) {
        return Err(SimError::Config(format!(
            "initial deviation must be finite and >= 0, got {w0_dev}"
        )));
    }
    let rho = contraction_rho(params.eta, params.mu_g, params.l_g)?;
    if rho >= 1.0 {
        return Err(SimError::Config(format!(
            "no contraction (rho = {rho} >= 1): reduce the step size or tighten the loss bounds"
        )));
    }
    let rho_k = rho.powi(k as i32);
    Ok(rho_k * w0_dev + params.eta * params.zeta * (1.0 - rho_k) / (1.0 - rho))
}

/// Asymptotic norm bound on the trained weights themselves:
/// `m_norm + eta zeta / (1 - rho)`.
pub fn weight_absolute_bound(params: &ContractionParams) -> SimResult<f64> {
    params.validate()?;
    let rho = contraction_rho(params.eta, params.mu_g, params.l_g)?;
    if rho >= 1.0 {
        return Err(SimError::Config(format!(
            "no contraction (rho = {rho} >= 1): reduce the step size or tighten the loss bounds"
        )));
    }
    Ok(params.m_norm + params.eta * params.zeta / (1.0 - rho))
}

/// Composite energy of the two observer errors and the sliding surface.
pub fn lyapunov_value(e1: f64, e2: f64, s: f64) -> f64 {
    0.5 * (e1 * e1 + e2 * e2 + s * s)
}

/// Summary of a simulated energy trace against the certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovReport {
    pub v_max_overall: f64,
    /// Largest energy in the post-transient half of the record.
    pub v_max_post_transient: f64,
    /// Largest error/surface norm post-transient, `sqrt(2 V)` — directly
    /// comparable to [`UubReport::radius`].
    pub sup_norm_post_transient: f64,
    /// Start of the post-transient half (midpoint of the time span).
    pub t_split: f64,
}

/// Scans `(t, V)` samples, splitting the record at the midpoint of its
/// time span; the second half is treated as post-transient. Samples must
/// be finite and time-ordered.
pub fn lyapunov_monitor(samples: &[(f64, f64)]) -> SimResult<LyapunovReport> {
    let (t0, _) = *samples
        .first()
        .ok_or_else(|| SimError::Config("energy monitor needs at least one sample".into()))?;
    let (t_end, _) = *samples.last().expect("non-empty");
    let t_split = t0 + 0.5 * (t_end - t0);
    let mut v_max_overall = f64::NEG_INFINITY;
    let mut v_max_post = f64::NEG_INFINITY;
    let mut prev_t = f64::NEG_INFINITY;
    for &(t, v) in samples {
        if !t.is_finite() || !v.is_finite() {
            return Err(SimError::NonFinite {
                t,
                what: "energy monitor sample".into(),
            });
        }
        if t <= prev_t {
            return Err(SimError::Config(format!(
                "energy monitor samples must be strictly time-ordered: {t} after {prev_t}"
            )));
        }
        prev_t = t;
        v_max_overall = v_max_overall.max(v);
        if t >= t_split {
            v_max_post = v_max_post.max(v);
        }
    }
    Ok(LyapunovReport {
        v_max_overall,
        v_max_post_transient: v_max_post,
        sup_norm_post_transient: (2.0 * v_max_post).sqrt(),
        t_split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn desk_envelope() -> OperatingEnvelope {
        OperatingEnvelope::default()
    }

    fn desk_gains() -> ObserverGains {
        ObserverGains {
            lambda1: 1.5,
            lambda2: 65.0,
            delta1: 0.5,
            delta2: 0.5,
        }
    }

    #[test]
    fn lipschitz_constants_over_desk_envelope() {
        let p_bounds = derive_lipschitz(&desk_envelope(), 1.99).unwrap();
        assert_eq!(p_bounds.l_x, 11.0, "steam flow 10 plus full spray 1");
        assert_eq!(
            p_bounds.l_phi, 540.0,
            "hottest chamber minus coldest spray water"
        );
        assert_eq!(p_bounds.m_x2, 580.0);
        assert_eq!(p_bounds.m_b, 1.99);

        let closed = OperatingEnvelope {
            u_max_flow: 0.0,
            ..desk_envelope()
        };
        assert_eq!(derive_lipschitz(&closed, 0.0).unwrap().l_x, 10.0);

        let narrow = OperatingEnvelope {
            x2_min: 440.0,
            x2_max: 560.0,
            ..desk_envelope()
        };
        assert_eq!(derive_lipschitz(&narrow, 0.0).unwrap().l_phi, 520.0);
    }

    #[test]
    fn envelope_validation() {
        assert!(desk_envelope().validate().is_ok());
        assert!(OperatingEnvelope {
            x2_min: 600.0,
            ..desk_envelope()
        }
        .validate()
        .is_err());
        assert!(OperatingEnvelope {
            u_max_flow: -1.0,
            ..desk_envelope()
        }
        .validate()
        .is_err());
        assert!(OperatingEnvelope {
            delta_phi: 1.5,
            ..desk_envelope()
        }
        .validate()
        .is_err());
        assert!(OperatingEnvelope {
            d5_min: f64::NAN,
            ..desk_envelope()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn gain_thresholds_at_desk_constants() {
        let p = PlantParams::bench();
        let b = derive_lipschitz(&desk_envelope(), 1.99).unwrap();
        let cert = check_gain_conditions(&desk_gains(), &b, &p, 2.0);
        // 0.05*2 + 0.1*11 and 0.1*540*1.
        assert!((cert.channel1.threshold - 1.2).abs() < 1e-12);
        assert!((cert.channel2.threshold - 54.0).abs() < 1e-12);
        assert!(cert.channel1.satisfied && cert.channel2.satisfied && cert.all_satisfied);
        assert!((cert.channel1.margin_rel - 0.25).abs() < 1e-12);
        assert!((cert.channel1.margin_abs - 0.3).abs() < 1e-12);
        assert!((cert.channel2.margin_rel - (65.0 / 54.0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn gain_conditions_are_strict() {
        let p = PlantParams::bench();
        let b = derive_lipschitz(&desk_envelope(), 1.99).unwrap();
        // Probe the computed thresholds, then configure gains that sit
        // exactly on them: strict conditions must reject equality.
        let probe = check_gain_conditions(&desk_gains(), &b, &p, 2.0);
        let exactly_at = ObserverGains {
            lambda1: probe.channel1.threshold,
            lambda2: probe.channel2.threshold,
            delta1: 0.5,
            delta2: 0.5,
        };
        let cert = check_gain_conditions(&exactly_at, &b, &p, 2.0);
        assert!(
            !cert.channel1.satisfied,
            "equality must not satisfy a strict condition"
        );
        assert!(!cert.channel2.satisfied);
        assert!(!cert.all_satisfied);
        assert_eq!(cert.channel1.margin_abs, 0.0);
        assert_eq!(cert.channel2.margin_abs, 0.0);
    }

    #[test]
    fn a_wider_lipschitz_bound_raises_the_threshold() {
        let p = PlantParams::bench();
        let mut b = derive_lipschitz(&desk_envelope(), 1.99).unwrap();
        b.l_x = 12.0;
        let cert = check_gain_conditions(&desk_gains(), &b, &p, 2.0);
        assert!((cert.channel1.threshold - 1.3).abs() < 1e-12);
        assert!((cert.channel1.margin_abs - 0.2).abs() < 1e-12);
        assert!(cert.channel1.satisfied);
    }

    #[test]
    fn auto_young_constants_at_desk_values() {
        let p = PlantParams::bench();
        let b = derive_lipschitz(&desk_envelope(), 1.99).unwrap();
        let y = YoungConstants::auto(&p, 2.0, &b);
        assert!((y.alpha - 0.1).abs() < 1e-15);
        assert_eq!(y.mu, 1.0);
        assert_eq!(y.c, 1.0);
        assert!((y.beta - 4.3).abs() < 1e-12);
        assert!((y.eta_small - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn ultimate_bound_report_at_desk_values() {
        let p = PlantParams::bench();
        let b = derive_lipschitz(&desk_envelope(), 1.99).unwrap();
        let y = YoungConstants::auto(&p, 2.0, &b);
        let r = uub_radius(&desk_gains(), &b, &y, &p, 2.0, 540.0).unwrap();

        assert!((r.kappa1 - 0.025).abs() < 1e-15);
        assert!((r.kappa2 - 0.25).abs() < 1e-12);
        assert!((r.kappa3 - 0.3025).abs() < 1e-12);
        assert!((r.kappa - 0.0125).abs() < 1e-15);
        assert_eq!(r.binding, "kappa1_minus_eta_small");

        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        assert!(
            rel(r.theta, 148071.88501989245) < 1e-10,
            "theta = {}",
            r.theta
        );
        assert!(
            rel(r.radius, 3441.7656517536743) < 1e-10,
            "radius = {}",
            r.radius
        );

        let names: Vec<&str> = r.theta_terms.iter().map(|&(n, _)| n).collect();
        assert_eq!(
            names,
            vec![
                "theta_lambda1_delta1",
                "theta_fault_mismatch",
                "theta_lambda2_delta2",
                "theta_drift",
                "theta_ref",
                "theta_young_lambda1",
                "theta_young_lambda2",
            ]
        );
        let term = |n: &str| r.theta_terms.iter().find(|&&(m, _)| m == n).unwrap().1;
        assert_eq!(term("theta_ref"), 145800.0);
        assert!((term("theta_lambda1_delta1") - 0.75).abs() < 1e-15);
        assert!((term("theta_fault_mismatch") - 14.58).abs() < 1e-12);
        assert!((term("theta_young_lambda1") - 45.0).abs() < 1e-10);
    }

    #[test]
    fn degenerate_quiet_configuration_has_zero_radius() {
        let p = PlantParams::bench();
        let env = OperatingEnvelope {
            x2_min: 0.0,
            x2_max: 0.0,
            u_max_flow: 0.0,
            d2_min: 0.0,
            d2_max: 0.0,
            d5_min: 0.0,
            d5_max: 0.0,
            delta_phi: 0.0,
        };
        let b = derive_lipschitz(&env, 0.0).unwrap();
        let y = YoungConstants::auto(&p, 2.0, &b);
        let zero_gains = ObserverGains {
            lambda1: 0.0,
            lambda2: 0.0,
            delta1: 0.5,
            delta2: 0.5,
        };
        let r = uub_radius(&zero_gains, &b, &y, &p, 2.0, 0.0).unwrap();
        assert_eq!(r.theta, 0.0);
        assert_eq!(r.radius, 0.0);
    }

    #[test]
    fn injection_chatter_term_scales_linearly_with_its_band() {
        let p = PlantParams::bench();
        let b = derive_lipschitz(&desk_envelope(), 1.99).unwrap();
        let y = YoungConstants::auto(&p, 2.0, &b);
        let g1 = desk_gains();
        let g2 = ObserverGains { delta1: 1.0, ..g1 };
        let t1 = uub_radius(&g1, &b, &y, &p, 2.0, 540.0).unwrap().theta;
        let t2 = uub_radius(&g2, &b, &y, &p, 2.0, 540.0).unwrap().theta;
        assert!((t2 - t1 - g1.lambda1 * g1.delta1).abs() < 1e-9);
    }

    #[test]
    fn oversized_slack_voids_the_certificate() {
        let p = PlantParams::bench();
        let b = derive_lipschitz(&desk_envelope(), 1.99).unwrap();
        let mut y = YoungConstants::auto(&p, 2.0, &b);
        y.eta_small = 1.0; // exceeds kappa1 = 0.025
        let err = uub_radius(&desk_gains(), &b, &y, &p, 2.0, 540.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("no certificate"), "message: {msg}");
        assert!(msg.contains("kappa1_minus_eta_small"), "message: {msg}");
    }

    #[test]
    fn contraction_factor_on_a_reference_quadratic() {
        // Strong convexity 1, smoothness 2, step 1/4.
        let rho = contraction_rho(0.25, 1.0, 2.0).unwrap();
        assert!((rho - 0.8660254037844386).abs() < 1e-15);
    }

    #[test]
    fn gradient_descent_contracts_within_the_certified_factor() {
        // f(w) = 0.5 w1^2 + w2^2 has Hessian diag(1, 2): mu = 1, l = 2.
        let eta = 0.25;
        let rho = contraction_rho(eta, 1.0, 2.0).unwrap();
        let mut w = (3.0f64, -4.0f64);
        let w0_norm = (w.0 * w.0 + w.1 * w.1).sqrt();
        for k in 1..=12 {
            w = (w.0 - eta * w.0, w.1 - eta * 2.0 * w.1);
            let norm = (w.0 * w.0 + w.1 * w.1).sqrt();
            let bound = rho.powi(k) * w0_norm;
            assert!(
                norm <= bound * (1.0 + 1e-12),
                "step {k}: deviation {norm} exceeds certified {bound}"
            );
        }
    }

    #[test]
    fn deviation_bound_interpolates_start_and_asymptote() {
        let params = ContractionParams {
            eta: 0.25,
            mu_g: 1.0,
            l_g: 2.0,
            zeta: 0.4,
            m_norm: 2.0,
        };
        let rho = contraction_rho(params.eta, params.mu_g, params.l_g).unwrap();
        let at0 = weight_deviation_bound(&params, 0, 5.0).unwrap();
        assert!(
            (at0 - 5.0).abs() < 1e-15,
            "zero steps keep the initial deviation"
        );
        let asymptote = params.eta * params.zeta / (1.0 - rho);
        let far = weight_deviation_bound(&params, 500, 5.0).unwrap();
        assert!((far - asymptote).abs() < 1e-12);
        let abs_bound = weight_absolute_bound(&params).unwrap();
        assert!((abs_bound - (params.m_norm + asymptote)).abs() < 1e-12);
    }

    #[test]
    fn no_contraction_is_reported_not_fabricated() {
        // eta = 0 leaves rho = 1: the bound must refuse, not divide by 0.
        let frozen = ContractionParams {
            eta: 0.0,
            mu_g: 1.0,
            l_g: 2.0,
            zeta: 0.4,
            m_norm: 2.0,
        };
        let err = weight_deviation_bound(&frozen, 10, 1.0).unwrap_err();
        assert!(err.to_string().contains("no contraction"), "{err}");
        // Too-large step also breaks the contraction: rho > 1.
        let wild = ContractionParams {
            eta: 1.0,
            mu_g: 1.0,
            l_g: 2.0,
            zeta: 0.4,
            m_norm: 2.0,
        };
        assert!(weight_absolute_bound(&wild).is_err());
        // Invalid ordering of the convexity constants is rejected.
        let bad = ContractionParams {
            eta: 0.1,
            mu_g: 2.0,
            l_g: 1.0,
            zeta: 0.0,
            m_norm: 0.0,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn energy_and_monitor() {
        assert_eq!(lyapunov_value(1.0, 1.0, 1.0), 1.5);
        assert_eq!(lyapunov_value(0.0, 0.0, 0.0), 0.0);

        // Transient energy 10 for the first half, 2 afterwards.
        let samples: Vec<(f64, f64)> = (0..=10)
            .map(|i| (i as f64, if i < 5 { 10.0 } else { 2.0 }))
            .collect();
        let rep = lyapunov_monitor(&samples).unwrap();
        assert_eq!(rep.t_split, 5.0);
        assert_eq!(rep.v_max_overall, 10.0);
        assert_eq!(rep.v_max_post_transient, 2.0);
        assert_eq!(rep.sup_norm_post_transient, 2.0);

        let single = lyapunov_monitor(&[(3.0, 4.0)]).unwrap();
        assert_eq!(single.v_max_post_transient, 4.0);

        assert!(lyapunov_monitor(&[]).is_err());
        assert!(
            lyapunov_monitor(&[(0.0, 1.0), (0.0, 1.0)]).is_err(),
            "duplicate times"
        );
        assert!(lyapunov_monitor(&[(0.0, f64::NAN)]).is_err());
    }

    proptest! {
        #[test]
        fn radius_is_monotone_in_the_reference_bound(
            r1 in 0.0..1000.0f64,
            r2 in 0.0..1000.0f64,
        ) {
            let p = PlantParams::bench();
            let b = derive_lipschitz(&desk_envelope(), 1.99).unwrap();
            let y = YoungConstants::auto(&p, 2.0, &b);
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            let rad_lo = uub_radius(&desk_gains(), &b, &y, &p, 2.0, lo).unwrap().radius;
            let rad_hi = uub_radius(&desk_gains(), &b, &y, &p, 2.0, hi).unwrap().radius;
            prop_assert!(rad_hi >= rad_lo);
        }

        #[test]
        fn contraction_tightens_with_stronger_convexity(
            mu1 in 0.2..1.0f64,
            dmu in 0.01..0.5f64,
        ) {
            // Fixed smoothness 2 and a step small enough for both.
            let eta = 0.05;
            let rho_weak = contraction_rho(eta, mu1, 2.0).unwrap();
            let rho_strong = contraction_rho(eta, mu1 + dmu, 2.0).unwrap();
            prop_assert!(rho_strong < rho_weak);
        }

        #[test]
        fn energy_is_nonnegative(
            e1 in -100.0..100.0f64,
            e2 in -100.0..100.0f64,
            s in -100.0..100.0f64,
        ) {
            prop_assert!(lyapunov_value(e1, e2, s) >= 0.0);
        }
    }
}

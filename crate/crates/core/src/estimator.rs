//! Online neural estimator of the valve fault fraction, trained against
//! the plant physics instead of labels.
//!
//! A small feed-forward network maps `(x1, xhat2, u)` to a fault estimate
//! `phi_hat` in the open interval `(0, 1)`. No measurement of the fault
//! exists, so the trainer scores the network by how well the estimated
//! spray-chamber temperature obeys its own balance equation: over a short
//! moving window of recent samples, the backward-difference slope of
//! `xhat2` is compared with the model right-hand side evaluated at the
//! network's current fault estimate, and the mean squared mismatch is
//! driven down by plain gradient descent with an L2 weight penalty.
//!
//! The gradient is derived by hand (the network is three layers deep at
//! most) so the estimator has no dependency on an autodiff framework and
//! every term can be unit-tested against finite differences.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};
use crate::plant::{Disturbances, PlantParams};

/// Affine normalization applied to each network input:
/// `xi = (value - center) / span`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputScaling {
    pub x1_center: f64,
    pub x1_span: f64,
    pub x2_center: f64,
    pub x2_span: f64,
    pub u_center: f64,
    pub u_span: f64,
}

impl Default for InputScaling {
    fn default() -> Self {
        Self {
            x1_center: 540.0,
            x1_span: 100.0,
            x2_center: 500.0,
            x2_span: 100.0,
            u_center: 0.5,
            u_span: 0.5,
        }
    }
}

impl InputScaling {
    pub fn validate(&self) -> SimResult<()> {
        for (name, v) in [
            ("x1_center", self.x1_center),
            ("x2_center", self.x2_center),
            ("u_center", self.u_center),
        ] {
            if !v.is_finite() {
                return Err(SimError::Config(format!(
                    "input scaling {name} must be finite, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("x1_span", self.x1_span),
            ("x2_span", self.x2_span),
            ("u_span", self.u_span),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(SimError::Config(format!(
                    "input scaling {name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn apply(&self, x1: f64, xhat2: f64, u: f64) -> [f64; 3] {
        [
            (x1 - self.x1_center) / self.x1_span,
            (xhat2 - self.x2_center) / self.x2_span,
            (u - self.u_center) / self.u_span,
        ]
    }
}

/// Estimator hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PinnConfig {
    /// Hidden-layer width.
    pub hidden: usize,
    /// Gradient-descent step size.
    pub eta: f64,
    /// L2 penalty weight on every parameter (matrices and biases).
    pub lambda_reg: f64,
    /// Number of samples held in the training window; training starts
    /// only once the window is full.
    pub window: usize,
    /// Gradient steps taken per simulation step.
    pub updates_per_step: usize,
    /// Training aborts with an error once the parameter norm passes this.
    pub weight_cap: f64,
    /// Standard deviation of the random weight initialization.
    pub init_std: f64,
    pub scaling: InputScaling,
}

impl Default for PinnConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            eta: 1e-3,
            lambda_reg: 1e-3,
            window: 32,
            updates_per_step: 1,
            weight_cap: 1e3,
            init_std: 0.1,
            scaling: InputScaling::default(),
        }
    }
}

impl PinnConfig {
    pub fn validate(&self) -> SimResult<()> {
        if self.hidden == 0 {
            return Err(SimError::Config(
                "estimator hidden width must be >= 1".into(),
            ));
        }
        if self.window < 2 {
            return Err(SimError::Config(format!(
                "estimator window must hold at least 2 samples, got {}",
                self.window
            )));
        }
        if self.updates_per_step == 0 {
            return Err(SimError::Config(
                "estimator updates_per_step must be >= 1".into(),
            ));
        }
        for (name, v, allow_zero) in [
            ("eta", self.eta, true),
            ("lambda_reg", self.lambda_reg, true),
            ("init_std", self.init_std, true),
            ("weight_cap", self.weight_cap, false),
        ] {
            let ok = v.is_finite() && (v > 0.0 || (allow_zero && v == 0.0));
            if !ok {
                return Err(SimError::Config(format!(
                    "estimator {name} must be finite and {} got {v}",
                    if allow_zero { ">= 0," } else { "> 0," }
                )));
            }
        }
        self.scaling.validate()
    }
}

/// Parameters of the 3-input / tanh-hidden / sigmoid-output network.
/// The same shape doubles as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    /// Hidden-layer matrix, one `[f64; 3]` row per hidden unit.
    pub w1: Vec<[f64; 3]>,
    pub b1: Vec<f64>,
    /// Output-layer row vector, one entry per hidden unit.
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl NetworkWeights {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            w1: vec![[0.0; 3]; hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    /// Gaussian initialization; `std == 0` gives exact zeros.
    pub fn random<R: Rng + ?Sized>(hidden: usize, std: f64, rng: &mut R) -> SimResult<Self> {
        if std == 0.0 {
            return Ok(Self::zeros(hidden));
        }
        let dist = Normal::new(0.0, std)
            .map_err(|e| SimError::Config(format!("bad init_std for weight init: {e}")))?;
        let mut draw = || dist.sample(rng);
        let mut w = Self::zeros(hidden);
        for row in &mut w.w1 {
            for v in row.iter_mut() {
                *v = draw();
            }
        }
        for v in &mut w.b1 {
            *v = draw();
        }
        for v in &mut w.w2 {
            *v = draw();
        }
        w.b2 = draw();
        Ok(w)
    }

    pub fn hidden(&self) -> usize {
        self.w1.len()
    }

    pub fn entry_count(&self) -> usize {
        self.w1.len() * 3 + self.b1.len() + self.w2.len() + 1
    }

    /// Flat read access in `w1, b1, w2, b2` order (row-major within `w1`).
    pub fn entry(&self, i: usize) -> f64 {
        *self.entry_ref(i)
    }

    pub fn entry_mut(&mut self, i: usize) -> &mut f64 {
        let n1 = self.w1.len() * 3;
        let nb = self.b1.len();
        let n2 = self.w2.len();
        if i < n1 {
            &mut self.w1[i / 3][i % 3]
        } else if i < n1 + nb {
            &mut self.b1[i - n1]
        } else if i < n1 + nb + n2 {
            &mut self.w2[i - n1 - nb]
        } else {
            assert_eq!(i, n1 + nb + n2, "weight entry index out of range");
            &mut self.b2
        }
    }

    fn entry_ref(&self, i: usize) -> &f64 {
        let n1 = self.w1.len() * 3;
        let nb = self.b1.len();
        let n2 = self.w2.len();
        if i < n1 {
            &self.w1[i / 3][i % 3]
        } else if i < n1 + nb {
            &self.b1[i - n1]
        } else if i < n1 + nb + n2 {
            &self.w2[i - n1 - nb]
        } else {
            assert_eq!(i, n1 + nb + n2, "weight entry index out of range");
            &self.b2
        }
    }

    /// Frobenius norm over every parameter, biases included.
    pub fn frobenius_norm(&self) -> f64 {
        let mut sq = 0.0;
        for i in 0..self.entry_count() {
            let v = self.entry(i);
            sq += v * v;
        }
        sq.sqrt()
    }

    /// `self += a * other`, entry by entry. Shapes must match.
    pub fn axpy(&mut self, a: f64, other: &NetworkWeights) {
        debug_assert_eq!(self.hidden(), other.hidden(), "weight shapes must match");
        for i in 0..self.entry_count() {
            *self.entry_mut(i) += a * other.entry(i);
        }
    }

    /// `(block, row, col, value)` listing for serialization, in the same
    /// order as [`Self::entry`].
    pub fn entries(&self) -> Vec<(&'static str, usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.entry_count());
        for (j, row) in self.w1.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                out.push(("w1", j, k, v));
            }
        }
        for (j, &v) in self.b1.iter().enumerate() {
            out.push(("b1", j, 0, v));
        }
        for (j, &v) in self.w2.iter().enumerate() {
            out.push(("w2", 0, j, v));
        }
        out.push(("b2", 0, 0, self.b2));
        out
    }
}

/// One training observation: the loop state captured at a sample instant,
/// together with the disturbances in effect then.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSample {
    pub t: f64,
    pub x1: f64,
    pub xhat2: f64,
    pub u: f64,
    pub d: Disturbances,
}

impl WindowSample {
    fn validate(&self) -> SimResult<()> {
        for (name, v) in [
            ("t", self.t),
            ("x1", self.x1),
            ("xhat2", self.xhat2),
            ("u", self.u),
        ] {
            if !v.is_finite() {
                return Err(SimError::Config(format!(
                    "training sample field {name} must be finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Result of one call to [`PinnEstimator::update`] when training ran.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats {
    /// Total loss (physics + regularization) evaluated at the start of
    /// the final gradient step of this call.
    pub loss: f64,
    /// Parameter Frobenius norm after the update.
    pub weight_norm: f64,
}

/// The estimator: network weights plus the moving training window.
#[derive(Debug, Clone)]
pub struct PinnEstimator {
    cfg: PinnConfig,
    pub weights: NetworkWeights,
    window: VecDeque<WindowSample>,
}

/// Numerically stable logistic function, clamped so the result is
/// *strictly* inside `(0, 1)` even when the preactivation saturates in
/// floating point.
fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}

impl PinnEstimator {
    pub fn new<R: Rng + ?Sized>(cfg: PinnConfig, rng: &mut R) -> SimResult<Self> {
        cfg.validate()?;
        let weights = NetworkWeights::random(cfg.hidden, cfg.init_std, rng)?;
        Ok(Self {
            cfg,
            weights,
            window: VecDeque::with_capacity(cfg.window),
        })
    }

    /// Builds an estimator around externally supplied weights (tests,
    /// replays, warm starts).
    pub fn with_weights(cfg: PinnConfig, weights: NetworkWeights) -> SimResult<Self> {
        cfg.validate()?;
        if weights.hidden() != cfg.hidden
            || weights.b1.len() != cfg.hidden
            || weights.w2.len() != cfg.hidden
        {
            return Err(SimError::Config(format!(
                "weight shape ({} hidden units) does not match config ({})",
                weights.hidden(),
                cfg.hidden
            )));
        }
        Ok(Self {
            cfg,
            weights,
            window: VecDeque::with_capacity(cfg.window),
        })
    }

    pub fn config(&self) -> &PinnConfig {
        &self.cfg
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn window_full(&self) -> bool {
        self.window.len() == self.cfg.window
    }

    /// Current fault estimate for the given loop state, strictly inside
    /// `(0, 1)`.
    pub fn phi_hat(&self, x1: f64, xhat2: f64, u: f64) -> f64 {
        let xi = self.cfg.scaling.apply(x1, xhat2, u);
        self.forward(&xi).1
    }

    /// Hidden activations and output for a normalized input.
    fn forward(&self, xi: &[f64; 3]) -> (Vec<f64>, f64) {
        let h: Vec<f64> = self
            .weights
            .w1
            .iter()
            .zip(&self.weights.b1)
            .map(|(row, b)| (row[0] * xi[0] + row[1] * xi[1] + row[2] * xi[2] + b).tanh())
            .collect();
        let z2 = self
            .weights
            .w2
            .iter()
            .zip(&h)
            .map(|(w, hj)| w * hj)
            .sum::<f64>()
            + self.weights.b2;
        (h, sigmoid(z2))
    }

    /// Appends a sample; the oldest sample drops out once the window is
    /// at capacity. Sample times must be strictly increasing.
    pub fn push_sample(&mut self, s: WindowSample) -> SimResult<()> {
        s.validate()?;
        if let Some(last) = self.window.back() {
            if s.t <= last.t {
                return Err(SimError::Config(format!(
                    "training samples must have strictly increasing times: {} after {}",
                    s.t, last.t
                )));
            }
        }
        if self.window.len() == self.cfg.window {
            self.window.pop_front();
        }
        self.window.push_back(s);
        Ok(())
    }

    /// Mean squared physics residual over the current window, or `None`
    /// with fewer than two samples.
    ///
    /// For each adjacent pair the residual compares the backward
    /// difference of `xhat2` against the spray-chamber balance evaluated
    /// at the network's fault estimate for the newer sample:
    ///
    /// ```text
    /// r_i = (xhat2_i - xhat2_{i-1}) / (t_i - t_{i-1}) - g_i
    /// g_i = k3 * [ (d2_i + ue_i)(d4_i - xhat2_i) - ue_i (d4_i - d5_i) + m_in d6_i ]
    /// ue_i = (1 - phi_hat_i) * u_i * u_scale
    /// ```
    pub fn physics_loss(&self, p: &PlantParams) -> Option<f64> {
        if self.window.len() < 2 {
            return None;
        }
        Some(self.loss_and_gradient(p, false).0)
    }

    /// Physics loss plus `lambda_reg * ||W||_F^2`, or `None` with fewer
    /// than two samples.
    pub fn total_loss(&self, p: &PlantParams) -> Option<f64> {
        let phys = self.physics_loss(p)?;
        let n = self.weights.frobenius_norm();
        Some(phys + self.cfg.lambda_reg * n * n)
    }

    /// Physics loss over the window plus its gradient with respect to
    /// every parameter. The gradient buffer is only populated when
    /// `with_grad` is set (the pure loss path skips the backward pass);
    /// the regularization term and its gradient are added by the caller.
    fn loss_and_gradient(&self, p: &PlantParams, with_grad: bool) -> (f64, NetworkWeights) {
        let n_res = self.window.len() - 1;
        let mut grads = NetworkWeights::zeros(self.cfg.hidden);
        let k3 = p.k3();
        let mut loss = 0.0;
        let inv = 2.0 / n_res as f64;
        for i in 1..self.window.len() {
            let s = &self.window[i];
            let prev = &self.window[i - 1];
            let dt = s.t - prev.t;
            let xi = self.cfg.scaling.apply(s.x1, s.xhat2, s.u);
            let (h, phi) = self.forward(&xi);
            let ue = (1.0 - phi) * s.u * p.u_scale;
            let g = k3
                * ((s.d.d2 + ue) * (s.d.d4 - s.xhat2) - ue * (s.d.d4 - s.d.d5) + p.m_in * s.d.d6);
            let r = (s.xhat2 - prev.xhat2) / dt - g;
            loss += r * r;
            if with_grad {
                // d r / d phi = k3 * u * u_scale * (d5 - xhat2): a deeper
                // estimated fault removes spray, which raises g when the
                // chamber runs hotter than the spray water.
                let dr_dphi = -k3 * s.u * p.u_scale * (s.xhat2 - s.d.d5);
                let dl_dphi = inv * r * dr_dphi;
                let dl_dz2 = dl_dphi * phi * (1.0 - phi);
                grads.b2 += dl_dz2;
                for (j, &hj) in h.iter().enumerate() {
                    grads.w2[j] += dl_dz2 * hj;
                    let dl_dz1 = dl_dz2 * self.weights.w2[j] * (1.0 - hj * hj);
                    grads.b1[j] += dl_dz1;
                    for (k, xik) in xi.iter().enumerate() {
                        grads.w1[j][k] += dl_dz1 * xik;
                    }
                }
            }
        }
        (loss / n_res as f64, grads)
    }

    /// Total loss (physics + regularization) together with its gradient
    /// with respect to every parameter, without taking a step. `None`
    /// with fewer than two window samples. This is exactly the quantity
    /// [`update`](Self::update) descends on, exposed for diagnostics and
    /// for validating the hand-derived backward pass against finite
    /// differences.
    pub fn total_loss_and_gradient(&self, p: &PlantParams) -> Option<(f64, NetworkWeights)> {
        if self.window.len() < 2 {
            return None;
        }
        let (phys, mut grads) = self.loss_and_gradient(p, true);
        let n = self.weights.frobenius_norm();
        if self.cfg.lambda_reg != 0.0 {
            grads.axpy(2.0 * self.cfg.lambda_reg, &self.weights);
        }
        Some((phys + self.cfg.lambda_reg * n * n, grads))
    }

    /// One training call: `updates_per_step` plain gradient-descent steps
    /// on the total loss. Does nothing (returns `Ok(None)`) until the
    /// window is full. `step` and `t` only label any error raised.
    ///
    /// Errors with `EstimatorDiverged` when the parameter norm exceeds
    /// `weight_cap`, and with `NonFinite` if any parameter stops being a
    /// number.
    pub fn update(
        &mut self,
        p: &PlantParams,
        step: usize,
        t: f64,
    ) -> SimResult<Option<TrainStats>> {
        if !self.window_full() {
            return Ok(None);
        }
        let mut last_loss = 0.0;
        for _ in 0..self.cfg.updates_per_step {
            let (phys, mut grads) = self.loss_and_gradient(p, true);
            let wnorm = self.weights.frobenius_norm();
            last_loss = phys + self.cfg.lambda_reg * wnorm * wnorm;
            if self.cfg.lambda_reg != 0.0 {
                grads.axpy(2.0 * self.cfg.lambda_reg, &self.weights);
            }
            self.weights.axpy(-self.cfg.eta, &grads);
        }
        let norm = self.weights.frobenius_norm();
        if !norm.is_finite() {
            return Err(SimError::NonFinite {
                t,
                what: "estimator weights".into(),
            });
        }
        if norm > self.cfg.weight_cap {
            return Err(SimError::EstimatorDiverged {
                step,
                t,
                norm,
                cap: self.cfg.weight_cap,
            });
        }
        Ok(Some(TrainStats {
            loss: last_loss,
            weight_norm: norm,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::DisturbanceGenerator;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn desk_disturbances() -> Disturbances {
        Disturbances {
            d1: 1.0,
            d2: 10.0,
            d3: 0.01,
            d4: 560.0,
            d5: 40.0,
            d6: 0.0,
            d7: 2.0,
        }
    }

    fn two_unit_weights() -> NetworkWeights {
        NetworkWeights {
            w1: vec![[0.2, -0.3, 0.5], [-0.1, 0.4, 0.25]],
            b1: vec![0.1, -0.2],
            w2: vec![0.7, -0.6],
            b2: 0.05,
        }
    }

    fn cfg_with(hidden: usize) -> PinnConfig {
        PinnConfig {
            hidden,
            ..PinnConfig::default()
        }
    }

    #[test]
    fn pinned_forward_matches_reference() {
        // Hand-computed through the normalization, tanh layer, and
        // logistic output for the two-unit network below.
        let est = PinnEstimator::with_weights(cfg_with(2), two_unit_weights()).unwrap();
        let phi = est.phi_hat(540.0, 465.0, 0.5);
        assert!((phi - 0.5958034273703114).abs() < 1e-12, "phi = {phi}");
    }

    #[test]
    fn zero_weights_output_exactly_half() {
        let est = PinnEstimator::with_weights(cfg_with(4), NetworkWeights::zeros(4)).unwrap();
        assert_eq!(est.phi_hat(540.0, 465.0, 0.5), 0.5);
        assert_eq!(est.phi_hat(1.0e6, -4.0e5, 17.0), 0.5);
    }

    #[test]
    fn saturated_preactivations_stay_strictly_inside_unit_interval() {
        let mut high = NetworkWeights::zeros(2);
        high.b2 = 50.0; // logistic of 50 rounds to 1.0 in f64 without the clamp
        let est = PinnEstimator::with_weights(cfg_with(2), high).unwrap();
        let phi = est.phi_hat(540.0, 465.0, 0.5);
        assert!(phi < 1.0, "estimate must stay strictly below 1");
        assert!(phi > 1.0 - 1e-15);

        let mut low = NetworkWeights::zeros(2);
        low.b2 = -50.0;
        let est = PinnEstimator::with_weights(cfg_with(2), low).unwrap();
        let phi = est.phi_hat(540.0, 465.0, 0.5);
        assert!(phi > 0.0, "estimate must stay strictly above 0");
        assert!(phi < 1e-15);
    }

    #[test]
    fn outputs_stay_inside_unit_interval_under_extreme_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..1000 {
            let std = rng.random_range(0.01..30.0);
            let w = NetworkWeights::random(4, std, &mut rng).unwrap();
            let est = PinnEstimator::with_weights(cfg_with(4), w).unwrap();
            for _ in 0..100 {
                let x1 = rng.random_range(-1.0e5..1.0e5);
                let x2 = rng.random_range(-1.0e5..1.0e5);
                let u = rng.random_range(-1.0e3..1.0e3);
                let phi = est.phi_hat(x1, x2, u);
                assert!(phi > 0.0 && phi < 1.0, "trial {trial}: phi = {phi}");
            }
        }
    }

    /// Fills the window with `xhat2` values that satisfy the backward
    /// difference exactly when the fault is `phi_star` (implicit solve,
    /// since the balance is affine in `xhat2`).
    fn fill_consistent_window(
        est: &mut PinnEstimator,
        p: &PlantParams,
        phi_star: f64,
        n: usize,
        u_of_i: impl Fn(usize) -> f64,
    ) {
        let d = desk_disturbances();
        let dt = 0.5;
        let mut xhat2 = 530.0;
        est.push_sample(WindowSample {
            t: 0.0,
            x1: 535.0,
            xhat2,
            u: u_of_i(0),
            d,
        })
        .unwrap();
        let k3 = p.k3();
        for i in 1..n {
            let u = u_of_i(i);
            let ue = (1.0 - phi_star) * u * p.u_scale;
            let a = k3 * ((d.d2 + ue) * d.d4 - ue * (d.d4 - d.d5) + p.m_in * d.d6);
            let b = k3 * (d.d2 + ue);
            xhat2 = (xhat2 / dt + a) / (1.0 / dt + b);
            est.push_sample(WindowSample {
                t: i as f64 * dt,
                x1: 535.0 + i as f64,
                xhat2,
                u,
                d,
            })
            .unwrap();
        }
    }

    #[test]
    fn residuals_vanish_on_model_consistent_window() {
        // Zero weights output exactly 0.5; a window generated at
        // phi = 0.5 then has zero residual at every pair, so the physics
        // loss is numerically zero and (with zero weights) so is the
        // total loss.
        let p = PlantParams::bench();
        let cfg = PinnConfig {
            window: 8,
            ..cfg_with(4)
        };
        let mut est = PinnEstimator::with_weights(cfg, NetworkWeights::zeros(4)).unwrap();
        fill_consistent_window(&mut est, &p, 0.5, 8, |i| 0.3 + 0.04 * i as f64);
        let phys = est.physics_loss(&p).unwrap();
        assert!(phys < 1e-20, "physics loss = {phys}");
        let total = est.total_loss(&p).unwrap();
        assert!(total < 1e-20, "total loss = {total}");
    }

    #[test]
    fn loss_grows_with_model_mismatch() {
        let p = PlantParams::bench();
        let cfg = PinnConfig {
            window: 8,
            ..cfg_with(4)
        };
        let mut near = PinnEstimator::with_weights(cfg, NetworkWeights::zeros(4)).unwrap();
        let mut far = near.clone();
        fill_consistent_window(&mut near, &p, 0.45, 8, |_| 0.5);
        fill_consistent_window(&mut far, &p, 0.0, 8, |_| 0.5);
        let near_loss = near.physics_loss(&p).unwrap();
        let far_loss = far.physics_loss(&p).unwrap();
        assert!(
            near_loss < far_loss,
            "estimate 0.5: mismatch 0.05 gives {near_loss}, mismatch 0.5 gives {far_loss}"
        );
    }

    #[test]
    fn first_window_sample_only_anchors_the_difference() {
        // The network is never evaluated on the oldest sample, so its
        // command and temperature inputs cannot influence the loss.
        let p = PlantParams::bench();
        let cfg = PinnConfig {
            window: 6,
            ..cfg_with(3)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = NetworkWeights::random(3, 0.4, &mut rng).unwrap();
        let mut a = PinnEstimator::with_weights(cfg, w).unwrap();
        let mut b = a.clone();
        let d = desk_disturbances();
        let mk = |x1, u| WindowSample {
            t: 0.0,
            x1,
            xhat2: 520.0,
            u,
            d,
        };
        a.push_sample(mk(500.0, 0.1)).unwrap();
        b.push_sample(mk(620.0, 0.9)).unwrap();
        for i in 1..6 {
            let s = WindowSample {
                t: i as f64,
                x1: 540.0 + i as f64,
                xhat2: 520.0 - i as f64,
                u: 0.4,
                d,
            };
            a.push_sample(s).unwrap();
            b.push_sample(s).unwrap();
        }
        assert_eq!(a.total_loss(&p).unwrap(), b.total_loss(&p).unwrap());
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let p = PlantParams::bench();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let hidden = 4;
        let mut w = NetworkWeights::zeros(hidden);
        for i in 0..w.entry_count() {
            let mag = rng.random_range(0.1..1.0);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            *w.entry_mut(i) = sign * mag;
        }
        let cfg = PinnConfig {
            window: 8,
            lambda_reg: 1e-2,
            ..cfg_with(hidden)
        };
        let mut est = PinnEstimator::with_weights(cfg, w).unwrap();
        fill_consistent_window(&mut est, &p, 0.4, 8, |i| 0.3 + 0.05 * i as f64);

        let (_, mut analytic) = est.loss_and_gradient(&p, true);
        // Complete the total-loss gradient with the regularization term.
        let w_snapshot = est.weights.clone();
        analytic.axpy(2.0 * est.cfg.lambda_reg, &w_snapshot);

        let h = 1e-5;
        for i in 0..est.weights.entry_count() {
            let orig = est.weights.entry(i);
            *est.weights.entry_mut(i) = orig + h;
            let lp = est.total_loss(&p).unwrap();
            *est.weights.entry_mut(i) = orig - h;
            let lm = est.total_loss(&p).unwrap();
            *est.weights.entry_mut(i) = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let a = analytic.entry(i);
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-3);
            assert!(
                rel < 1e-5,
                "entry {i}: analytic {a} vs finite-difference {numeric} (rel {rel})"
            );
        }
    }

    #[test]
    fn update_descends_on_a_fixed_window() {
        let p = PlantParams::bench();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let hidden = 4;
        let w = NetworkWeights::random(hidden, 0.3, &mut rng).unwrap();
        let base_cfg = PinnConfig {
            window: 8,
            lambda_reg: 1e-3,
            ..cfg_with(hidden)
        };
        let mut base = PinnEstimator::with_weights(base_cfg, w).unwrap();
        fill_consistent_window(&mut base, &p, 0.4, 8, |i| 0.3 + 0.05 * i as f64);
        let before = base.total_loss(&p).unwrap();
        assert!(before > 0.0);

        let descended = [1e-2, 1e-3, 1e-4, 1e-5].iter().any(|&eta| {
            let mut trial = base.clone();
            trial.cfg.eta = eta;
            trial.update(&p, 0, 0.0).unwrap().unwrap();
            trial.total_loss(&p).unwrap() < before
        });
        assert!(
            descended,
            "no step size in the ladder reduced the loss from {before}"
        );
    }

    #[test]
    fn zero_learning_rate_update_is_an_identity() {
        let p = PlantParams::bench();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = NetworkWeights::random(4, 0.3, &mut rng).unwrap();
        let cfg = PinnConfig {
            window: 8,
            eta: 0.0,
            updates_per_step: 3,
            ..cfg_with(4)
        };
        let mut est = PinnEstimator::with_weights(cfg, w.clone()).unwrap();
        fill_consistent_window(&mut est, &p, 0.4, 8, |_| 0.5);
        let stats = est.update(&p, 0, 0.0).unwrap().unwrap();
        assert!(stats.loss.is_finite());
        for i in 0..w.entry_count() {
            assert_eq!(
                est.weights.entry(i),
                w.entry(i),
                "entry {i} moved under eta = 0"
            );
        }
    }

    #[test]
    fn update_waits_for_a_full_window() {
        let p = PlantParams::bench();
        let cfg = PinnConfig {
            window: 4,
            ..cfg_with(2)
        };
        let mut est = PinnEstimator::with_weights(cfg, NetworkWeights::zeros(2)).unwrap();
        let d = desk_disturbances();
        for i in 0..3 {
            est.push_sample(WindowSample {
                t: i as f64,
                x1: 540.0,
                xhat2: 520.0,
                u: 0.4,
                d,
            })
            .unwrap();
            assert!(est.update(&p, i, i as f64).unwrap().is_none());
        }
        est.push_sample(WindowSample {
            t: 3.0,
            x1: 540.0,
            xhat2: 520.0,
            u: 0.4,
            d,
        })
        .unwrap();
        assert!(est.update(&p, 3, 3.0).unwrap().is_some());
    }

    #[test]
    fn weight_cap_raises_divergence_error() {
        let p = PlantParams::bench();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = NetworkWeights::random(4, 0.5, &mut rng).unwrap();
        let cfg = PinnConfig {
            window: 4,
            weight_cap: 1e-6,
            ..cfg_with(4)
        };
        let mut est = PinnEstimator::with_weights(cfg, w).unwrap();
        fill_consistent_window(&mut est, &p, 0.4, 4, |_| 0.5);
        match est.update(&p, 42, 4.2) {
            Err(SimError::EstimatorDiverged {
                step, norm, cap, ..
            }) => {
                assert_eq!(step, 42);
                assert!(norm > cap);
            }
            other => panic!("expected divergence error, got {other:?}"),
        }
    }

    #[test]
    fn window_rejects_non_increasing_times() {
        let cfg = PinnConfig {
            window: 4,
            ..cfg_with(2)
        };
        let mut est = PinnEstimator::with_weights(cfg, NetworkWeights::zeros(2)).unwrap();
        let d = desk_disturbances();
        let s = WindowSample {
            t: 1.0,
            x1: 540.0,
            xhat2: 520.0,
            u: 0.4,
            d,
        };
        est.push_sample(s).unwrap();
        assert!(est.push_sample(s).is_err(), "equal times rejected");
        assert!(
            est.push_sample(WindowSample { t: 0.5, ..s }).is_err(),
            "regress rejected"
        );
        assert!(est.push_sample(WindowSample { t: 1.5, ..s }).is_ok());
    }

    #[test]
    fn window_evicts_oldest_at_capacity() {
        let cfg = PinnConfig {
            window: 3,
            ..cfg_with(2)
        };
        let mut est = PinnEstimator::with_weights(cfg, NetworkWeights::zeros(2)).unwrap();
        let d = desk_disturbances();
        for i in 0..5 {
            est.push_sample(WindowSample {
                t: i as f64,
                x1: 540.0,
                xhat2: 520.0,
                u: 0.4,
                d,
            })
            .unwrap();
        }
        assert_eq!(est.window_len(), 3);
        assert!(est.window_full());
        assert_eq!(est.window[0].t, 2.0, "oldest samples evicted first");
    }

    #[test]
    fn config_validation_rejects_degenerate_setups() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for bad in [
            PinnConfig {
                hidden: 0,
                ..PinnConfig::default()
            },
            PinnConfig {
                window: 1,
                ..PinnConfig::default()
            },
            PinnConfig {
                updates_per_step: 0,
                ..PinnConfig::default()
            },
            PinnConfig {
                eta: -1e-3,
                ..PinnConfig::default()
            },
            PinnConfig {
                eta: f64::NAN,
                ..PinnConfig::default()
            },
            PinnConfig {
                lambda_reg: -0.5,
                ..PinnConfig::default()
            },
            PinnConfig {
                weight_cap: 0.0,
                ..PinnConfig::default()
            },
            PinnConfig {
                scaling: InputScaling {
                    u_span: 0.0,
                    ..InputScaling::default()
                },
                ..PinnConfig::default()
            },
        ] {
            assert!(
                PinnEstimator::new(bad, &mut rng).is_err(),
                "{bad:?} accepted"
            );
        }
        assert!(PinnEstimator::new(PinnConfig::default(), &mut rng).is_ok());
    }

    #[test]
    fn frobenius_norm_counts_every_block() {
        let mut w = NetworkWeights::zeros(2);
        w.w1[0][0] = 3.0;
        w.b1[1] = 4.0;
        assert_eq!(w.frobenius_norm(), 5.0);
        w.w2[0] = 12.0;
        assert_eq!(w.frobenius_norm(), 13.0);
        w.b2 = 84.0;
        assert_eq!(w.frobenius_norm(), 85.0);
    }

    #[test]
    fn entry_indexing_round_trips() {
        let w = two_unit_weights();
        assert_eq!(w.entry_count(), 2 * 3 + 2 + 2 + 1);
        let listed = w.entries();
        assert_eq!(listed.len(), w.entry_count());
        for (i, &(_, _, _, v)) in listed.iter().enumerate() {
            assert_eq!(w.entry(i), v, "entry order must match the listing");
        }
        let mut w2 = w.clone();
        *w2.entry_mut(7) += 1.0; // b1[1]
        assert_eq!(w2.b1[1], w.b1[1] + 1.0);
    }

    #[test]
    fn random_init_is_seed_deterministic() {
        let a = NetworkWeights::random(8, 0.1, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        let b = NetworkWeights::random(8, 0.1, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        assert_eq!(a, b);
        let c = NetworkWeights::random(8, 0.1, &mut ChaCha8Rng::seed_from_u64(100)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generator_sampled_disturbances_feed_the_window() {
        // End-to-end sanity: samples built from the disturbance
        // generator at successive times train without error.
        let p = PlantParams::bench();
        let gen = DisturbanceGenerator::constant([1.0, 10.0, 0.01, 560.0, 40.0, 0.0, 2.0]);
        let cfg = PinnConfig {
            window: 4,
            eta: 1e-4,
            ..cfg_with(4)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut est = PinnEstimator::new(cfg, &mut rng).unwrap();
        for i in 0..6usize {
            let t = i as f64 * 0.1;
            let d = gen.at(t, &p).unwrap();
            est.push_sample(WindowSample {
                t,
                x1: 540.0,
                xhat2: 520.0 - i as f64 * 0.3,
                u: 0.4,
                d,
            })
            .unwrap();
            est.update(&p, i, t).unwrap();
        }
        assert!(est.window_full());
    }

    proptest! {
        #[test]
        fn forward_is_always_a_valid_fraction(
            seed in 0u64..1000,
            x1 in 300.0..800.0f64,
            x2 in 300.0..800.0f64,
            u in 0.0..1.0f64,
        ) {
            let w = NetworkWeights::random(4, 2.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let est = PinnEstimator::with_weights(cfg_with(4), w).unwrap();
            let phi = est.phi_hat(x1, x2, u);
            prop_assert!(phi > 0.0 && phi < 1.0);
        }
    }
}

//! Scenario execution: certificate assembly, the closed-loop simulation
//! stepper, metric evaluation, and output-file writing.
//!
//! Per-step order inside [`simulate`]:
//!
//! 1. read the measurement `y = x1` (plus noise when configured),
//! 2. evaluate the fault estimate with the estimator's current weights
//!    (zero until its training window has filled),
//! 3. compute the control command from `y`, the setpoint, and the
//!    estimate,
//! 4. record the trace row, then integrate the plant under the true
//!    fault and the observer under the estimated one,
//! 5. append the step's sample to the training window and run one
//!    estimator update.
//!
//! The estimate published at step `k` therefore depends only on data
//! available strictly before the plant reacts to anything at step `k`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::controller::{pid_step, smc_compute, PidState};
use crate::error::{SimError, SimResult};
use crate::estimator::{NetworkWeights, PinnEstimator, WindowSample};
use crate::faults::FaultProfile;
use crate::harness::ingest::IngestReport;
use crate::harness::metrics::{compute_metrics, write_metrics, Metrics};
use crate::harness::scenario::{ControllerChoice, ScenarioConfig};
use crate::harness::trace::{write_trace, TraceRow};
use crate::observer::observer_step;
use crate::plant::plant_step;
use crate::stability::{
    check_gain_conditions, derive_lipschitz, lyapunov_value, uub_radius, GainCertificate,
    LipschitzBounds, UubReport, YoungConstants,
};

/// States beyond this magnitude are treated as numerically divergent.
const STATE_CAP: f64 = 1e9;

/// Which control law drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Smc,
    Pid,
}

impl ControllerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerKind::Smc => "smc",
            ControllerKind::Pid => "pid",
        }
    }
}

/// Stability certificate evaluated for a scenario before it runs.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub bounds: LipschitzBounds,
    pub gains: GainCertificate,
    pub young: YoungConstants,
    /// Present when every damping coefficient is positive.
    pub uub: Option<UubReport>,
    pub warnings: Vec<String>,
    pub d7_max: f64,
    pub ref_bound: f64,
}

impl CertificateReport {
    pub fn certificate_ok(&self) -> bool {
        self.gains.all_satisfied && self.uub.is_some()
    }

    /// Renders the flat `key = value` form written to `certificate.txt`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        for (name, check) in [
            ("gain_lambda1", &self.gains.channel1),
            ("gain_lambda2", &self.gains.channel2),
        ] {
            kv(name, format!("{}", check.gain));
            kv(&format!("{name}_threshold"), format!("{}", check.threshold));
            kv(
                &format!("{name}_margin_abs"),
                format!("{}", check.margin_abs),
            );
            kv(
                &format!("{name}_margin_rel"),
                format!("{}", check.margin_rel),
            );
            kv(&format!("{name}_ok"), format!("{}", check.satisfied));
        }
        kv("gains_ok", format!("{}", self.gains.all_satisfied));
        kv("l_x", format!("{}", self.bounds.l_x));
        kv("l_phi", format!("{}", self.bounds.l_phi));
        kv("u_max_flow", format!("{}", self.bounds.u_max_flow));
        kv("delta_phi", format!("{}", self.bounds.delta_phi));
        kv("m_b", format!("{}", self.bounds.m_b));
        kv("m_x2", format!("{}", self.bounds.m_x2));
        kv("d7_max", format!("{}", self.d7_max));
        kv("ref_bound", format!("{}", self.ref_bound));
        kv("young_alpha", format!("{}", self.young.alpha));
        kv("young_mu", format!("{}", self.young.mu));
        kv("young_c", format!("{}", self.young.c));
        kv("young_beta", format!("{}", self.young.beta));
        kv("young_eta_small", format!("{}", self.young.eta_small));
        match &self.uub {
            Some(u) => {
                kv("kappa1", format!("{}", u.kappa1));
                kv("kappa2", format!("{}", u.kappa2));
                kv("kappa3", format!("{}", u.kappa3));
                kv("kappa", format!("{}", u.kappa));
                kv("kappa_binding", u.binding.to_string());
                for (name, value) in &u.theta_terms {
                    kv(&format!("theta_{name}"), format!("{value}"));
                }
                kv("theta", format!("{}", u.theta));
                kv("uub_radius", format!("{}", u.radius));
            }
            None => {
                for w in &self.warnings {
                    kv("certificate_error", w.clone());
                }
            }
        }
        kv("certificate_ok", format!("{}", self.certificate_ok()));
        kv(
            "note_kappa3",
            "surface damping coefficient is positive by construction and enters as a margin"
                .to_string(),
        );
        out
    }
}

/// Evaluates the gain conditions and ultimate bound for a scenario.
/// A failed ultimate bound becomes a warning, not an error: the run can
/// still proceed, it just carries no certificate.
pub fn build_certificate(cfg: &ScenarioConfig) -> SimResult<CertificateReport> {
    let m_b = cfg.disturbances.drift_bound(&cfg.plant);
    let bounds = derive_lipschitz(&cfg.envelope, m_b)?;
    let d7_max = cfg.disturbances.d7.bounds().1;
    let gains = check_gain_conditions(&cfg.observer.gains, &bounds, &cfg.plant, d7_max);
    let young = YoungConstants::auto(&cfg.plant, d7_max, &bounds);
    let ref_bound = cfg.reference.bound();
    let mut warnings = Vec::new();
    if !gains.all_satisfied {
        warnings.push(
            "observer gain conditions are not satisfied; estimation error convergence is not \
             guaranteed"
                .to_string(),
        );
    }
    let uub = match uub_radius(
        &cfg.observer.gains,
        &bounds,
        &young,
        &cfg.plant,
        d7_max,
        ref_bound,
    ) {
        Ok(u) => Some(u),
        Err(e) => {
            warnings.push(e.to_string());
            None
        }
    };
    Ok(CertificateReport {
        bounds,
        gains,
        young,
        uub,
        warnings,
        d7_max,
        ref_bound,
    })
}

/// Raw result of one closed-loop run.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub trace: Vec<TraceRow>,
    pub final_weights: NetworkWeights,
}

/// One run packaged with its evaluated metrics.
#[derive(Debug, Clone)]
pub struct RunnerOutput {
    pub kind: ControllerKind,
    pub trace: Vec<TraceRow>,
    pub metrics: Metrics,
    pub final_weights: NetworkWeights,
}

/// Everything a scenario produces in memory.
#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub certificate: CertificateReport,
    pub fault: FaultProfile,
    pub ingest: Option<IngestReport>,
    pub runs: Vec<RunnerOutput>,
}

fn describe_row(row: &TraceRow) -> String {
    format!(
        "last valid record: t = {}, x1 = {}, x2 = {}, xhat1 = {}, xhat2 = {}, u_cmd = {}",
        row.t, row.x1, row.x2, row.xhat1, row.xhat2, row.u_cmd
    )
}

fn blowup(step: usize, t: f64, what: String, last: &TraceRow) -> SimError {
    SimError::NumericBlowup {
        step,
        t,
        detail: format!("{what}; {}", describe_row(last)),
    }
}

/// Runs the closed loop for one controller. The random stream is
/// re-seeded from the scenario seed on every call, so repeated runs (and
/// the two runs of a side-by-side comparison) see identical estimator
/// initialization and measurement noise.
pub fn simulate(
    cfg: &ScenarioConfig,
    fault: &FaultProfile,
    kind: ControllerKind,
) -> SimResult<SimRun> {
    let p = &cfg.plant;
    let gen = &cfg.disturbances;
    let dt = cfg.dt;
    let steps = cfg.steps();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut est = PinnEstimator::new(cfg.estimator, &mut rng)?;
    let noise = if cfg.noise_std > 0.0 {
        Some(
            Normal::new(0.0, cfg.noise_std)
                .map_err(|e| SimError::Config(format!("invalid measurement noise level: {e}")))?,
        )
    } else {
        None
    };

    let mut x = cfg.initial;
    let mut xh = cfg.observer.initial;
    let mut pid = PidState::default();
    let mut u_prev = 0.0;
    let mut last_loss = 0.0;
    let mut rows: Vec<TraceRow> = Vec::with_capacity(steps + 1);

    for k in 0..=steps {
        let t = k as f64 * dt;
        let d = gen.at(t, p)?;
        let y = match &noise {
            Some(n) => x.x1 + n.sample(&mut rng),
            None => x.x1,
        };
        let phi_hat = if est.window_full() {
            est.phi_hat(y, xh.xhat2, u_prev)
        } else {
            0.0
        };
        let (ref_v, _) = cfg.reference.eval(t);
        let (u_cmd, s) = match kind {
            ControllerKind::Smc => {
                let out = smc_compute(y, ref_v, phi_hat, &cfg.smc);
                (out.u, out.s)
            }
            ControllerKind::Pid => {
                let u = pid_step(&mut pid, y, ref_v, dt, &cfg.pid);
                (u, y - ref_v)
            }
        };
        let phi_true = fault.at(t);
        let row = TraceRow {
            t,
            x1: x.x1,
            x2: x.x2,
            xhat1: xh.xhat1,
            xhat2: xh.xhat2,
            phi_true,
            phi_hat,
            u_cmd,
            u_eff: (1.0 - phi_true) * u_cmd,
            s,
            v: lyapunov_value(x.x1 - xh.xhat1, x.x2 - xh.xhat2, s),
            loss: last_loss,
            wnorm: est.weights.frobenius_norm(),
        };
        rows.push(row);
        est.push_sample(WindowSample {
            t,
            x1: y,
            xhat2: xh.xhat2,
            u: u_cmd,
            d,
        })?;
        u_prev = u_cmd;

        if k == steps {
            break;
        }
        let last = *rows.last().expect("row just pushed");
        x = plant_step(&x, u_cmd, phi_true, t, dt, gen, p)
            .map_err(|e| blowup(k, t, format!("plant integration failed: {e}"), &last))?;
        xh = observer_step(&xh, y, u_cmd, phi_hat, t, dt, gen, p, &cfg.observer.gains)
            .map_err(|e| blowup(k, t, format!("observer integration failed: {e}"), &last))?;
        for (name, v) in [
            ("x1", x.x1),
            ("x2", x.x2),
            ("xhat1", xh.xhat1),
            ("xhat2", xh.xhat2),
        ] {
            if !v.is_finite() || v.abs() > STATE_CAP {
                return Err(blowup(k, t, format!("state {name} diverged to {v}"), &last));
            }
        }
        if let Some(stats) = est.update(p, k, t)? {
            last_loss = stats.loss;
        }
    }

    Ok(SimRun {
        trace: rows,
        final_weights: est.weights.clone(),
    })
}

/// Resolves the fault source, evaluates the certificate, runs the
/// configured controller(s), and computes metrics for each run.
pub fn run_scenario(cfg: &ScenarioConfig) -> SimResult<ScenarioReport> {
    cfg.validate()?;
    let (fault, ingest) = cfg.fault.resolve(&cfg.base_dir)?;
    let certificate = build_certificate(cfg)?;
    let kinds: &[ControllerKind] = match cfg.controller {
        ControllerChoice::Smc => &[ControllerKind::Smc],
        ControllerChoice::Pid => &[ControllerKind::Pid],
        ControllerChoice::Both => &[ControllerKind::Smc, ControllerKind::Pid],
    };
    let mut events = fault.events();
    events.extend(cfg.reference.events());

    let mut runs = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let run = simulate(cfg, &fault, kind)?;
        let metrics = compute_metrics(&run.trace, &cfg.reference, &events)?;
        runs.push(RunnerOutput {
            kind,
            trace: run.trace,
            metrics,
            final_weights: run.final_weights,
        });
    }
    Ok(ScenarioReport {
        certificate,
        fault,
        ingest,
        runs,
    })
}

fn write_weights(path: &Path, w: &NetworkWeights) -> SimResult<()> {
    let mut out = String::from("block,row,col,value\n");
    for (block, row, col, value) in w.entries() {
        let _ = writeln!(out, "{block},{row},{col},{value}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes trace/metrics/certificate (and optionally weights) files into
/// the scenario's output directory, creating it as needed. Single-
/// controller runs use plain names (`trace.csv`); side-by-side runs get
/// a controller suffix (`trace_smc.csv`, `trace_pid.csv`). Returns the
/// directory written to.
pub fn write_outputs(
    report: &ScenarioReport,
    cfg: &ScenarioConfig,
    output_root: Option<&Path>,
) -> SimResult<PathBuf> {
    let dir = cfg.resolved_output_dir(output_root);
    std::fs::create_dir_all(&dir)?;
    let suffixed = report.runs.len() > 1;
    for run in &report.runs {
        let tag = if suffixed {
            format!("_{}", run.kind.as_str())
        } else {
            String::new()
        };
        write_trace(&dir.join(format!("trace{tag}.csv")), &run.trace)?;
        write_metrics(&dir.join(format!("metrics{tag}.txt")), &run.metrics)?;
        if cfg.dump_weights {
            write_weights(&dir.join(format!("weights{tag}.csv")), &run.final_weights)?;
        }
    }
    std::fs::write(dir.join("certificate.txt"), report.certificate.render())?;
    Ok(dir)
}

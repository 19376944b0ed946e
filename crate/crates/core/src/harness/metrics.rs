//! Performance metrics derived from a trace, and the flat `key = value`
//! report files.

use std::fmt::Write as _;
use std::path::Path;

use crate::controller::Reference;
use crate::error::{SimError, SimResult};
use crate::harness::trace::TraceRow;
use crate::stability::lyapunov_monitor;

/// Tracking band half-width used by the settling/occupancy metrics.
pub const BAND_C: f64 = 1.0;

/// Deterministic summary of one closed-loop trace.
///
/// "Post-transient" is the final half of the record by time: the window
/// `[t0 + (t_end - t0)/2, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Largest excursion above the setpoint over the whole trace
    /// (negative if the output never reaches it).
    pub overshoot: f64,
    /// Time from the last fault/reference event until the tracking error
    /// enters the band and stays there. Equals the remaining span (and
    /// `settled` is false) when the trace never settles.
    pub settling_time: f64,
    pub settled: bool,
    /// Fraction of post-transient samples inside the band.
    pub band_occupancy: f64,
    /// Mean `|phi_true - phi_hat|` post-transient.
    pub mean_fault_error: f64,
    /// Mean and max `|x2 - xhat2|` post-transient.
    pub mean_x2_error: f64,
    pub max_x2_error: f64,
    /// Commanded spray integral over the whole run (left rectangles).
    pub spray_usage: f64,
    /// Start of the post-transient window.
    pub post_transient_start: f64,
    /// Largest composite energy post-transient and the corresponding
    /// error/surface norm `sqrt(2 V)`, comparable to the certificate
    /// radius.
    pub v_max_post: f64,
    pub sup_error_norm_post: f64,
}

/// Computes the metrics of a trace against its reference profile.
/// `events` are candidate transient origins (fault and reference event
/// times); events outside the trace span are ignored.
pub fn compute_metrics(
    trace: &[TraceRow],
    reference: &Reference,
    events: &[f64],
) -> SimResult<Metrics> {
    if trace.is_empty() {
        return Err(SimError::Config("metrics need a non-empty trace".into()));
    }
    let t0 = trace[0].t;
    let t_end = trace[trace.len() - 1].t;
    let t_split = t0 + 0.5 * (t_end - t0);

    // Tracking error per row, from the true (noise-free) output.
    let err: Vec<f64> = trace.iter().map(|r| r.x1 - reference.eval(r.t).0).collect();

    let overshoot = err.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    // Settling: scan backwards for the first index from which the band
    // holds through the end, then measure from the last event (or the
    // trace start when no event applies).
    let t_origin = events
        .iter()
        .copied()
        .filter(|t| (t0..=t_end).contains(t))
        .fold(t0, f64::max);
    let mut first_settled: Option<usize> = None;
    for i in (0..trace.len()).rev() {
        if trace[i].t < t_origin {
            break;
        }
        if err[i].abs() <= BAND_C {
            first_settled = Some(i);
        } else {
            break;
        }
    }
    let (settled, settling_time) = match first_settled {
        Some(i) => (true, trace[i].t.max(t_origin) - t_origin),
        None => (false, t_end - t_origin),
    };

    let mut post_n = 0usize;
    let mut in_band = 0usize;
    let mut fault_err_sum = 0.0;
    let mut x2_err_sum = 0.0;
    let mut x2_err_max = 0.0f64;
    for (row, e) in trace.iter().zip(&err) {
        if row.t < t_split {
            continue;
        }
        post_n += 1;
        if e.abs() <= BAND_C {
            in_band += 1;
        }
        fault_err_sum += (row.phi_true - row.phi_hat).abs();
        let x2e = (row.x2 - row.xhat2).abs();
        x2_err_sum += x2e;
        x2_err_max = x2_err_max.max(x2e);
    }
    // The last row always lies at or past the midpoint.
    debug_assert!(post_n > 0);

    let spray_usage: f64 = trace
        .windows(2)
        .map(|w| w[0].u_cmd * (w[1].t - w[0].t))
        .sum();

    let energy: Vec<(f64, f64)> = trace.iter().map(|r| (r.t, r.v)).collect();
    let lyap = lyapunov_monitor(&energy)?;

    Ok(Metrics {
        overshoot,
        settling_time,
        settled,
        band_occupancy: in_band as f64 / post_n as f64,
        mean_fault_error: fault_err_sum / post_n as f64,
        mean_x2_error: x2_err_sum / post_n as f64,
        max_x2_error: x2_err_max,
        spray_usage,
        post_transient_start: t_split,
        v_max_post: lyap.v_max_post_transient,
        sup_error_norm_post: lyap.sup_norm_post_transient,
    })
}

impl Metrics {
    /// Renders the flat `key = value` form written to `metrics.txt`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("overshoot_c", format!("{}", self.overshoot));
        kv("settling_time_s", format!("{}", self.settling_time));
        kv("settled", format!("{}", self.settled));
        kv("band_occupancy", format!("{}", self.band_occupancy));
        kv("band_halfwidth_c", format!("{BAND_C}"));
        kv("mean_fault_error", format!("{}", self.mean_fault_error));
        kv("mean_x2_error_c", format!("{}", self.mean_x2_error));
        kv("max_x2_error_c", format!("{}", self.max_x2_error));
        kv("spray_usage", format!("{}", self.spray_usage));
        kv(
            "post_transient_start_s",
            format!("{}", self.post_transient_start),
        );
        kv("v_max_post", format!("{}", self.v_max_post));
        kv(
            "sup_error_norm_post",
            format!("{}", self.sup_error_norm_post),
        );
        out
    }
}

/// Writes `metrics.txt`.
pub fn write_metrics(path: &Path, m: &Metrics) -> SimResult<()> {
    std::fs::write(path, m.render())?;
    Ok(())
}

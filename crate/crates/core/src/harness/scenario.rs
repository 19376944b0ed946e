//! Scenario files: everything a closed-loop run needs, in one JSON
//! document. See `docs/scenario-schema.md` for the field-by-field
//! reference.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controller::{PidConfig, Reference, SmcConfig};
use crate::error::{SimError, SimResult};
use crate::estimator::PinnConfig;
use crate::faults::{ExtractionConfig, FaultProfile};
use crate::harness::ingest::{ingest_valve_log, replay_fault, IngestReport};
use crate::observer::{ObserverGains, ObserverState};
use crate::plant::{DisturbanceGenerator, PlantParams, PlantState};
use crate::stability::OperatingEnvelope;

/// Which control law(s) to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ControllerChoice {
    #[default]
    Smc,
    Pid,
    /// Run both laws on identical scenarios (same seed, same fault) and
    /// write side-by-side outputs.
    Both,
}

/// Where the fault trajectory comes from: a synthetic profile, or a
/// replayed valve maintenance log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FaultSource {
    Constant {
        level: f64,
    },
    Step {
        t0: f64,
        before: f64,
        after: f64,
    },
    Ramp {
        t0: f64,
        from: f64,
        t1: f64,
        to: f64,
    },
    Table {
        points: Vec<(f64, f64)>,
    },
    /// Ingest a `t_s,u_cmd,u_actual` CSV and replay its extracted fault.
    /// A relative path is resolved against the scenario file's directory.
    Replay {
        path: PathBuf,
        #[serde(default)]
        extraction: ExtractionConfig,
    },
}

impl FaultSource {
    /// Validates what can be validated without touching the filesystem.
    pub fn validate(&self) -> SimResult<()> {
        match self.as_profile() {
            Some(p) => p.validate(),
            None => {
                let FaultSource::Replay { path, extraction } = self else {
                    unreachable!()
                };
                if path.as_os_str().is_empty() {
                    return Err(SimError::Config(
                        "replay fault path must not be empty".into(),
                    ));
                }
                extraction.validate()
            }
        }
    }

    fn as_profile(&self) -> Option<FaultProfile> {
        match self {
            FaultSource::Constant { level } => Some(FaultProfile::Constant { level: *level }),
            FaultSource::Step { t0, before, after } => Some(FaultProfile::Step {
                t0: *t0,
                before: *before,
                after: *after,
            }),
            FaultSource::Ramp { t0, from, t1, to } => Some(FaultProfile::Ramp {
                t0: *t0,
                from: *from,
                t1: *t1,
                to: *to,
            }),
            FaultSource::Table { points } => Some(FaultProfile::Table {
                points: points.clone(),
            }),
            FaultSource::Replay { .. } => None,
        }
    }

    /// Produces the concrete fault profile, ingesting the valve log for
    /// replay sources (relative paths resolve against `base_dir`).
    pub fn resolve(&self, base_dir: &Path) -> SimResult<(FaultProfile, Option<IngestReport>)> {
        match self.as_profile() {
            Some(p) => {
                p.validate()?;
                Ok((p, None))
            }
            None => {
                let FaultSource::Replay { path, extraction } = self else {
                    unreachable!()
                };
                let full = base_dir.join(path);
                let report = ingest_valve_log(&full, extraction)?;
                let profile = replay_fault(&report.records, extraction)?;
                Ok((profile, Some(report)))
            }
        }
    }
}

/// Observer gains plus the state it starts from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSetup {
    pub gains: ObserverGains,
    pub initial: ObserverState,
}

fn default_plant() -> PlantParams {
    PlantParams::bench()
}

fn default_name() -> String {
    "scenario".into()
}

fn default_smc() -> SmcConfig {
    SmcConfig {
        k: 2.0,
        delta: 1.0,
        epsilon: 0.01,
        u_max: 1.0,
    }
}

fn default_pid() -> PidConfig {
    // Conventional loop the comparison baseline uses; the integral clamp
    // brackets the actuator range scaled by the integral gain.
    PidConfig {
        kp: 1.5,
        ki: 96.0,
        kd: 0.0,
        u_max: 1.0,
        i_min: -1.0 / 96.0,
        i_max: 1.0 / 96.0,
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Complete description of one closed-loop experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    /// Simulated span in seconds; must be an integer number of steps.
    pub duration: f64,
    /// Control period in seconds.
    pub dt: f64,
    /// Seed for every stochastic element (weight init, measurement noise).
    pub seed: u64,
    #[serde(default = "default_plant")]
    pub plant: PlantParams,
    pub disturbances: DisturbanceGenerator,
    pub fault: FaultSource,
    pub reference: Reference,
    #[serde(default)]
    pub controller: ControllerChoice,
    #[serde(default = "default_smc")]
    pub smc: SmcConfig,
    #[serde(default = "default_pid")]
    pub pid: PidConfig,
    pub observer: ObserverSetup,
    #[serde(default)]
    pub estimator: PinnConfig,
    #[serde(default)]
    pub envelope: OperatingEnvelope,
    /// Standard deviation of Gaussian measurement noise on `x1`
    /// (0 disables noise entirely).
    #[serde(default)]
    pub noise_std: f64,
    /// Plant state at `t = 0`.
    pub initial: PlantState,
    /// Where outputs are written; relative paths land under the process
    /// working directory unless an output root overrides them.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Also dump the final estimator weights as CSV.
    #[serde(default)]
    pub dump_weights: bool,
    /// Directory the scenario file was loaded from; resolves relative
    /// replay paths. Not part of the JSON schema.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ScenarioConfig {
    /// Loads and validates a scenario JSON file. Relative paths inside
    /// the file resolve against the file's directory.
    pub fn load(path: &Path) -> SimResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            SimError::Config(format!("cannot read scenario {}: {e}", path.display()))
        })?;
        let mut cfg: ScenarioConfig = serde_json::from_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Number of integration steps; the trace has `steps() + 1` rows.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> SimResult<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SimError::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(SimError::Config(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        let ratio = self.duration / self.dt;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-6 * ratio.max(1.0) {
            return Err(SimError::Config(format!(
                "duration must be an integer number of steps: duration {} / dt {} = {ratio}",
                self.duration, self.dt
            )));
        }
        self.plant.validate()?;
        self.disturbances.validate(&self.plant)?;
        self.fault.validate()?;
        self.reference.validate()?;
        self.smc.validate()?;
        self.pid.validate()?;
        self.observer.gains.validate()?;
        for (name, v) in [
            ("observer initial xhat1", self.observer.initial.xhat1),
            ("observer initial xhat2", self.observer.initial.xhat2),
            ("initial x1", self.initial.x1),
            ("initial x2", self.initial.x2),
        ] {
            if !v.is_finite() {
                return Err(SimError::Config(format!("{name} must be finite, got {v}")));
            }
        }
        self.estimator.validate()?;
        self.envelope.validate()?;
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(SimError::Config(format!(
                "noise_std must be finite and >= 0, got {}",
                self.noise_std
            )));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(SimError::Config("output_dir must not be empty".into()));
        }
        Ok(())
    }

    /// Final output directory: `output_root` (typically the
    /// `FTC_OUTPUT_DIR` environment variable) re-roots relative paths;
    /// absolute `output_dir` values are used as-is.
    pub fn resolved_output_dir(&self, output_root: Option<&Path>) -> PathBuf {
        match output_root {
            Some(root) => root.join(&self.output_dir),
            None => self.output_dir.clone(),
        }
    }
}

/// Small, fast scenario used as the shared fixture across harness
/// tests: a ten-second run with a mid-run effectiveness step.
#[cfg(test)]
pub(crate) fn minimal_scenario_json() -> serde_json::Value {
    serde_json::json!({
        "name": "unit",
        "duration": 10.0,
        "dt": 0.1,
        "seed": 7,
        "disturbances": {
            "d1": {"kind": "constant", "value": 1.0},
            "d2": {"kind": "constant", "value": 10.0},
            "d3": {"kind": "constant", "value": 0.01},
            "d4": {"kind": "constant", "value": 560.0},
            "d5": {"kind": "constant", "value": 40.0},
            "d6": {"kind": "constant", "value": 0.0},
            "d7": {"kind": "constant", "value": 2.0}
        },
        "fault": {"kind": "step", "t0": 5.0, "before": 0.0, "after": 0.4},
        "reference": {"kind": "constant", "value": 540.0},
        "observer": {
            "gains": {"lambda1": 1.5, "lambda2": 68.0, "delta1": 0.5, "delta2": 0.5},
            "initial": {"xhat1": 540.0, "xhat2": 529.005}
        },
        "initial": {"x1": 540.0, "x2": 539.005}
    })
}

//! Parameter sweeps: run one scenario across a grid of field overrides.
//!
//! A sweep file names a base scenario and a list of axes; each axis is a
//! scenario field (dotted or JSON-pointer form) plus the values to try.
//! The cartesian product is executed point by point — rightmost axis
//! fastest — each point in its own `point_NNN` directory containing the
//! patched scenario snapshot next to the usual run outputs.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};
use crate::harness::runner::{run_scenario, write_outputs};
use crate::harness::scenario::ScenarioConfig;

/// Upper bound on concurrently running scenario points.
const MAX_WORKERS: usize = 8;

/// One sweep axis: a field to override and the values to try.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    pub field: String,
    pub values: Vec<serde_json::Value>,
}

fn default_sweep_output_dir() -> PathBuf {
    PathBuf::from("sweep_out")
}

/// Parsed sweep file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Base scenario file, relative to the sweep file's directory.
    pub scenario: PathBuf,
    #[serde(default)]
    pub grid: Vec<GridAxis>,
    #[serde(default = "default_sweep_output_dir")]
    pub output_dir: PathBuf,
}

impl SweepConfig {
    /// Reads and validates a sweep file. Returns the config together
    /// with the directory it was loaded from (the anchor for its
    /// relative paths).
    pub fn load(path: &Path) -> SimResult<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            SimError::Config(format!("cannot read sweep file {}: {e}", path.display()))
        })?;
        let cfg: SweepConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        let base = path.parent().unwrap_or_else(|| Path::new("")).to_path_buf();
        Ok((cfg, base))
    }

    pub fn validate(&self) -> SimResult<()> {
        if self.scenario.as_os_str().is_empty() {
            return Err(SimError::Config("sweep must name a scenario file".into()));
        }
        for axis in &self.grid {
            if axis.field.is_empty() {
                return Err(SimError::Config(
                    "sweep axis field must be non-empty".into(),
                ));
            }
            if axis.values.is_empty() {
                return Err(SimError::Config(format!(
                    "sweep axis '{}' has no values",
                    axis.field
                )));
            }
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(SimError::Config(
                "sweep output_dir must be non-empty".into(),
            ));
        }
        Ok(())
    }
}

/// Maps a dotted field path to JSON-pointer form; pointer-form input
/// passes through unchanged.
pub fn normalize_pointer(field: &str) -> String {
    if field.starts_with('/') {
        field.to_string()
    } else {
        format!("/{}", field.replace('.', "/"))
    }
}

/// Where one executed sweep point landed.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub index: usize,
    pub dir: PathBuf,
    pub assignments: Vec<(String, serde_json::Value)>,
}

fn patch(
    base: &serde_json::Value,
    assignments: &[(String, serde_json::Value)],
) -> SimResult<serde_json::Value> {
    let mut value = base.clone();
    for (field, v) in assignments {
        let ptr = normalize_pointer(field);
        match value.pointer_mut(&ptr) {
            Some(slot) => *slot = v.clone(),
            None => {
                return Err(SimError::Config(format!(
                    "sweep field '{field}' not found in scenario (pointer {ptr})"
                )))
            }
        }
    }
    Ok(value)
}

/// Expands the grid (rightmost axis fastest) into assignment lists.
fn expand(grid: &[GridAxis]) -> Vec<Vec<(String, serde_json::Value)>> {
    let total: usize = grid.iter().map(|a| a.values.len()).product();
    let mut points = Vec::with_capacity(total);
    for i in 0..total {
        let mut rem = i;
        let mut assignment = vec![Default::default(); grid.len()];
        for (j, axis) in grid.iter().enumerate().rev() {
            let n = axis.values.len();
            assignment[j] = (axis.field.clone(), axis.values[rem % n].clone());
            rem /= n;
        }
        points.push(assignment);
    }
    points
}

/// Runs every point of a sweep. `output_root`, when set, re-anchors the
/// sweep output directory (mirroring the single-run behavior). The first
/// failing point aborts the sweep and its error is returned.
pub fn run_sweep(path: &Path, output_root: Option<&Path>) -> SimResult<Vec<SweepPoint>> {
    let (sweep, base_dir) = SweepConfig::load(path)?;
    let scenario_path = if sweep.scenario.is_absolute() {
        sweep.scenario.clone()
    } else {
        base_dir.join(&sweep.scenario)
    };
    let scenario_dir = scenario_path
        .parent()
        .unwrap_or_else(|| Path::new(""))
        .to_path_buf();
    let base_text = std::fs::read_to_string(&scenario_path).map_err(|e| {
        SimError::Config(format!(
            "cannot read scenario file {}: {e}",
            scenario_path.display()
        ))
    })?;
    let base_value: serde_json::Value = serde_json::from_str(&base_text)?;

    let sweep_root = match output_root {
        Some(root) => root.join(&sweep.output_dir),
        None => sweep.output_dir.clone(),
    };

    // Prepare every point up front so configuration errors surface
    // before any simulation starts.
    struct Prepared {
        index: usize,
        dir: PathBuf,
        assignments: Vec<(String, serde_json::Value)>,
        snapshot: serde_json::Value,
        cfg: ScenarioConfig,
    }
    let mut prepared = Vec::new();
    for (index, assignments) in expand(&sweep.grid).into_iter().enumerate() {
        let snapshot = patch(&base_value, &assignments)?;
        let mut cfg: ScenarioConfig = serde_json::from_value(snapshot.clone()).map_err(|e| {
            SimError::Config(format!("sweep point {index} is not a valid scenario: {e}"))
        })?;
        cfg.base_dir = scenario_dir.clone();
        cfg.output_dir = sweep_root.join(format!("point_{index:03}"));
        cfg.validate()
            .map_err(|e| SimError::Config(format!("sweep point {index} is invalid: {e}")))?;
        prepared.push(Prepared {
            index,
            dir: cfg.output_dir.clone(),
            assignments,
            snapshot,
            cfg,
        });
    }

    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let slots: Vec<Mutex<Option<SimResult<SweepPoint>>>> =
        prepared.iter().map(|_| Mutex::new(None)).collect();
    let workers = MAX_WORKERS.min(prepared.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= prepared.len() {
                    break;
                }
                let p = &prepared[i];
                let result = (|| -> SimResult<SweepPoint> {
                    std::fs::create_dir_all(&p.dir)?;
                    std::fs::write(
                        p.dir.join("scenario.json"),
                        serde_json::to_string_pretty(&p.snapshot)?,
                    )?;
                    let report = run_scenario(&p.cfg)?;
                    write_outputs(&report, &p.cfg, None)?;
                    Ok(SweepPoint {
                        index: p.index,
                        dir: p.dir.clone(),
                        assignments: p.assignments.clone(),
                    })
                })();
                if result.is_err() {
                    abort.store(true, Ordering::Relaxed);
                }
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });

    let mut points = Vec::with_capacity(prepared.len());
    for slot in slots {
        match slot.into_inner().unwrap() {
            Some(Ok(point)) => points.push(point),
            Some(Err(e)) => return Err(e),
            // A later worker saw the abort flag before claiming this
            // point; the earlier error is what matters.
            None => break,
        }
    }
    Ok(points)
}

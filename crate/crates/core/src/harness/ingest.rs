//! Valve maintenance-log ingestion and fault replay.
//!
//! Plants keep commanded-vs-delivered valve position logs; this module
//! turns such a log into per-record fault fractions (flagging anomalies
//! along the way) and then into a fault profile a scenario can replay.

use std::path::Path;

use crate::error::{SimError, SimResult};
use crate::faults::{fault_from_record, ExtractionConfig, FaultProfile, ValveLogRecord};

/// Required CSV header of a valve log, in order.
pub const VALVE_LOG_HEADER: [&str; 3] = ["t_s", "u_cmd", "u_actual"];

/// Parsed log plus anomaly counts.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    pub records: Vec<ValveLogRecord>,
    /// Records where the valve delivered materially more than commanded.
    pub overdelivery_count: usize,
    /// Records whose command was below the extraction floor (no fault
    /// information can be read off them).
    pub skipped_count: usize,
}

/// Reads and validates a valve log. The header must be exactly
/// `t_s,u_cmd,u_actual`; timestamps must be strictly increasing; flows
/// must be finite and non-negative. Anomalies are counted, not fatal.
pub fn ingest_valve_log(path: &Path, cfg: &ExtractionConfig) -> SimResult<IngestReport> {
    cfg.validate()?;
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| SimError::Config(format!("cannot open valve log {}: {e}", path.display())))?;
    let headers = r.headers()?.clone();
    let found: Vec<&str> = headers.iter().collect();
    for required in VALVE_LOG_HEADER {
        if !found.contains(&required) {
            return Err(SimError::Config(format!(
                "missing column {required} in valve log header (found: {found:?})"
            )));
        }
    }
    if found != VALVE_LOG_HEADER {
        return Err(SimError::Config(format!(
            "valve log header must be exactly {VALVE_LOG_HEADER:?}, found {found:?}"
        )));
    }

    let mut records: Vec<ValveLogRecord> = Vec::new();
    let mut overdelivery_count = 0;
    let mut skipped_count = 0;
    for (i, rec) in r.deserialize::<ValveLogRecord>().enumerate() {
        let row = i + 1; // first data row is row 1
        let rec: ValveLogRecord =
            rec.map_err(|e| SimError::Config(format!("valve log row {row}: {e}")))?;
        for (name, v) in [
            ("t_s", rec.t_s),
            ("u_cmd", rec.u_cmd),
            ("u_actual", rec.u_actual),
        ] {
            if !v.is_finite() {
                return Err(SimError::Config(format!(
                    "valve log row {row}: {name} must be finite, got {v}"
                )));
            }
        }
        if rec.u_cmd < 0.0 || rec.u_actual < 0.0 {
            return Err(SimError::Config(format!(
                "valve log row {row}: flows must be non-negative, got u_cmd {} u_actual {}",
                rec.u_cmd, rec.u_actual
            )));
        }
        if let Some(prev) = records.last() {
            if rec.t_s <= prev.t_s {
                return Err(SimError::Config(format!(
                    "valve log row {row}: time {} does not increase past {}",
                    rec.t_s, prev.t_s
                )));
            }
        }
        let sample = fault_from_record(&rec, cfg);
        if sample.overdelivery {
            overdelivery_count += 1;
        }
        if sample.phi.is_none() {
            skipped_count += 1;
        }
        records.push(rec);
    }
    Ok(IngestReport {
        records,
        overdelivery_count,
        skipped_count,
    })
}

/// Builds a replayable fault profile from ingested records.
///
/// Only records that yield a fault value contribute breakpoints; skipped
/// records are bridged by the table profile's linear interpolation, and
/// leading/trailing skips are covered by its held ends. A single usable
/// record degenerates to a constant profile.
pub fn replay_fault(records: &[ValveLogRecord], cfg: &ExtractionConfig) -> SimResult<FaultProfile> {
    cfg.validate()?;
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|rec| fault_from_record(rec, cfg).phi.map(|phi| (rec.t_s, phi)))
        .collect();
    let profile = match points.len() {
        0 => {
            return Err(SimError::Config(
                "log carries no usable command activity (every record was skipped)".into(),
            ))
        }
        1 => FaultProfile::Constant { level: points[0].1 },
        _ => FaultProfile::Table { points },
    };
    profile.validate()?;
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_log(content: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("valve.csv");
        std::fs::write(&path, content).unwrap();
        (dir, path)
    }

    #[test]
    fn well_formed_log_has_no_anomalies() {
        let (_d, path) = write_log("t_s,u_cmd,u_actual\n0.0,0.5,0.5\n1.0,0.6,0.6\n2.0,0.7,0.7\n");
        let rep = ingest_valve_log(&path, &ExtractionConfig::default()).unwrap();
        assert_eq!(rep.records.len(), 3);
        assert_eq!(rep.overdelivery_count, 0);
        assert_eq!(rep.skipped_count, 0);
    }

    #[test]
    fn degraded_record_yields_the_expected_fraction() {
        // Commanded 70%, delivered 40%: 3/7 of the action is missing.
        let (_d, path) = write_log("t_s,u_cmd,u_actual\n10.0,0.70,0.40\n");
        let rep = ingest_valve_log(&path, &ExtractionConfig::default()).unwrap();
        let phi = fault_from_record(&rep.records[0], &ExtractionConfig::default())
            .phi
            .unwrap();
        assert!((phi - 0.4286).abs() < 5e-5, "phi = {phi}");
    }

    #[test]
    fn renamed_columns_name_the_missing_one() {
        let (_d, path) = write_log("time,cmd,act\n0.0,0.5,0.5\n");
        let err = ingest_valve_log(&path, &ExtractionConfig::default()).unwrap_err();
        assert!(err.to_string().contains("missing column t_s"), "{err}");
    }

    #[test]
    fn reordered_or_extra_columns_are_rejected() {
        let (_d, path) = write_log("u_cmd,t_s,u_actual\n0.5,0.0,0.5\n");
        let err = ingest_valve_log(&path, &ExtractionConfig::default()).unwrap_err();
        assert!(err.to_string().contains("must be exactly"), "{err}");

        let (_d2, path2) = write_log("t_s,u_cmd,u_actual,extra\n0.0,0.5,0.5,1\n");
        assert!(ingest_valve_log(&path2, &ExtractionConfig::default()).is_err());
    }

    #[test]
    fn non_monotone_times_report_the_row() {
        let (_d, path) = write_log("t_s,u_cmd,u_actual\n0.0,0.5,0.5\n2.0,0.5,0.5\n1.0,0.5,0.5\n");
        let err = ingest_valve_log(&path, &ExtractionConfig::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 3"), "{msg}");
        assert!(msg.contains("does not increase"), "{msg}");
    }

    #[test]
    fn malformed_numbers_report_the_row() {
        let (_d, path) = write_log("t_s,u_cmd,u_actual\n0.0,0.5,0.5\n1.0,abc,0.5\n");
        let err = ingest_valve_log(&path, &ExtractionConfig::default()).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    #[test]
    fn anomalies_are_counted() {
        // Row 2: shutdown command with 15% delivery — skipped and flagged
        // as overdelivery. Row 3: ordinary degradation.
        let (_d, path) = write_log("t_s,u_cmd,u_actual\n0.0,0.5,0.5\n1.0,0.0,0.15\n2.0,0.7,0.4\n");
        let rep = ingest_valve_log(&path, &ExtractionConfig::default()).unwrap();
        assert_eq!(rep.overdelivery_count, 1);
        assert_eq!(rep.skipped_count, 1);
    }

    #[test]
    fn perfect_tracking_replays_as_zero_fault() {
        let (_d, path) = write_log("t_s,u_cmd,u_actual\n0.0,0.5,0.5\n1.0,0.6,0.6\n2.0,0.7,0.7\n");
        let rep = ingest_valve_log(&path, &ExtractionConfig::default()).unwrap();
        let profile = replay_fault(&rep.records, &ExtractionConfig::default()).unwrap();
        for t in [-1.0, 0.0, 0.5, 1.5, 2.0, 10.0] {
            assert_eq!(profile.at(t), 0.0);
        }
    }

    #[test]
    fn skips_are_bridged_by_interpolation_and_ends_held() {
        // Valid at t = 0 (phi 0.2) and t = 2 (phi 0.6); the skip at t = 1
        // must not break the bridge, and the skips at both ends must hold
        // the nearest value.
        let cfg = ExtractionConfig::default();
        let records = vec![
            ValveLogRecord {
                t_s: -1.0,
                u_cmd: 0.0,
                u_actual: 0.0,
            }, // leading skip
            ValveLogRecord {
                t_s: 0.0,
                u_cmd: 0.5,
                u_actual: 0.4,
            }, // phi 0.2
            ValveLogRecord {
                t_s: 1.0,
                u_cmd: 0.0,
                u_actual: 0.0,
            }, // bridged skip
            ValveLogRecord {
                t_s: 2.0,
                u_cmd: 0.5,
                u_actual: 0.2,
            }, // phi 0.6
            ValveLogRecord {
                t_s: 3.0,
                u_cmd: 0.01,
                u_actual: 0.0,
            }, // trailing skip
        ];
        let profile = replay_fault(&records, &cfg).unwrap();
        assert!(
            (profile.at(-1.0) - 0.2).abs() < 1e-12,
            "leading skip holds first value"
        );
        assert!((profile.at(0.0) - 0.2).abs() < 1e-12);
        assert!(
            (profile.at(1.0) - 0.4).abs() < 1e-12,
            "skip bridged linearly"
        );
        assert!((profile.at(2.0) - 0.6).abs() < 1e-12);
        assert!(
            (profile.at(3.0) - 0.6).abs() < 1e-12,
            "trailing skip holds last value"
        );
    }

    #[test]
    fn single_valid_record_gives_a_constant_profile() {
        let cfg = ExtractionConfig::default();
        let records = vec![
            ValveLogRecord {
                t_s: 0.0,
                u_cmd: 0.0,
                u_actual: 0.0,
            },
            ValveLogRecord {
                t_s: 1.0,
                u_cmd: 0.8,
                u_actual: 0.4,
            },
        ];
        let profile = replay_fault(&records, &cfg).unwrap();
        assert_eq!(profile, FaultProfile::Constant { level: 0.5 });
        assert_eq!(profile.at(100.0), 0.5);
    }

    #[test]
    fn all_skipped_log_is_refused() {
        let cfg = ExtractionConfig::default();
        let records = vec![
            ValveLogRecord {
                t_s: 0.0,
                u_cmd: 0.0,
                u_actual: 0.0,
            },
            ValveLogRecord {
                t_s: 1.0,
                u_cmd: 0.01,
                u_actual: 0.0,
            },
        ];
        let err = replay_fault(&records, &cfg).unwrap_err();
        assert!(
            err.to_string().contains("no usable command activity"),
            "{err}"
        );
    }

    #[test]
    fn replay_reproduces_valid_records_exactly() {
        let cfg = ExtractionConfig::default();
        let records: Vec<ValveLogRecord> = (0..20)
            .map(|i| {
                let t = i as f64 * 30.0;
                let phi = 0.02 * i as f64;
                ValveLogRecord {
                    t_s: t,
                    u_cmd: 0.8,
                    u_actual: 0.8 * (1.0 - phi),
                }
            })
            .collect();
        let profile = replay_fault(&records, &cfg).unwrap();
        for rec in &records {
            let expect = fault_from_record(rec, &cfg).phi.unwrap();
            assert!(
                (profile.at(rec.t_s) - expect).abs() < 1e-12,
                "t = {}: {} vs {}",
                rec.t_s,
                profile.at(rec.t_s),
                expect
            );
        }
    }
}

//! Scenario orchestration: configuration, the closed-loop runner, trace
//! and metrics files, valve-log ingestion, and parameter sweeps.

pub mod ingest;
pub mod metrics;
pub mod runner;
pub mod scenario;
pub mod sweep;
pub mod trace;

pub use ingest::{ingest_valve_log, replay_fault, IngestReport, VALVE_LOG_HEADER};
pub use metrics::{compute_metrics, write_metrics, Metrics, BAND_C};
pub use runner::{
    build_certificate, run_scenario, simulate, write_outputs, CertificateReport, ControllerKind,
    RunnerOutput, ScenarioReport, SimRun,
};
pub use scenario::{ControllerChoice, FaultSource, ObserverSetup, ScenarioConfig};
pub use sweep::{run_sweep, GridAxis, SweepConfig, SweepPoint};
pub use trace::{read_trace, write_trace, TraceRow, TRACE_HEADER};

//! Command-line harness: run scenarios, replay valve logs, verify gain
//! certificates, and execute parameter sweeps.
//!
//! Exit codes: 0 on success, 1 for configuration/input problems (and for
//! `verify-gains` when the certificate fails), 2 when a simulation
//! aborts numerically mid-run.

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use hrsg_ftc::error::SimResult;
use hrsg_ftc::faults::ExtractionConfig;
use hrsg_ftc::harness::{
    build_certificate, run_scenario, run_sweep, write_outputs, FaultSource, ScenarioConfig,
    ScenarioReport,
};

#[derive(Parser)]
#[command(
    name = "hrsg-ftc",
    version,
    about = "Closed-loop simulation harness for fault-tolerant superheater steam-temperature control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trace, metrics, and certificate files.
    Run {
        /// Scenario configuration (JSON).
        scenario: PathBuf,
    },
    /// Rebuild the fault profile from a valve historian log, then run
    /// the scenario against it.
    Replay {
        /// Valve log CSV with columns t_s,u_cmd,u_actual.
        #[arg(long)]
        log: PathBuf,
        /// Scenario configuration (JSON); its fault section is replaced
        /// by the log-derived profile.
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Evaluate the observer gain conditions and ultimate bound without
    /// simulating. Exits 0 only when the certificate holds.
    VerifyGains {
        /// Scenario configuration (JSON).
        scenario: PathBuf,
    },
    /// Run a scenario across a grid of field overrides.
    Sweep {
        /// Sweep configuration (JSON) naming the base scenario and grid.
        sweep: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let output_root = std::env::var_os("FTC_OUTPUT_DIR").map(PathBuf::from);
    match dispatch(cli.command, output_root.as_deref()) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn dispatch(command: Command, output_root: Option<&Path>) -> SimResult<i32> {
    match command {
        Command::Run { scenario } => {
            let cfg = ScenarioConfig::load(&scenario)?;
            let report = run_scenario(&cfg)?;
            let dir = write_outputs(&report, &cfg, output_root)?;
            summarize(&cfg, &report, &dir);
            Ok(0)
        }
        Command::Replay { log, scenario } => {
            let mut cfg = ScenarioConfig::load(&scenario)?;
            cfg.fault = FaultSource::Replay {
                path: log,
                extraction: ExtractionConfig::default(),
            };
            // The log path came from the command line, so resolve it
            // against the working directory, not the scenario file.
            cfg.base_dir = PathBuf::new();
            let report = run_scenario(&cfg)?;
            let dir = write_outputs(&report, &cfg, output_root)?;
            summarize(&cfg, &report, &dir);
            Ok(0)
        }
        Command::VerifyGains { scenario } => {
            let cfg = ScenarioConfig::load(&scenario)?;
            let cert = build_certificate(&cfg)?;
            print!("{}", cert.render());
            Ok(if cert.certificate_ok() { 0 } else { 1 })
        }
        Command::Sweep { sweep } => {
            let points = run_sweep(&sweep, output_root)?;
            for point in &points {
                let assignments: Vec<String> = point
                    .assignments
                    .iter()
                    .map(|(field, value)| format!("{field} = {value}"))
                    .collect();
                println!(
                    "point_{:03} [{}] -> {}",
                    point.index,
                    assignments.join(", "),
                    point.dir.display()
                );
            }
            println!("{} sweep point(s) completed", points.len());
            Ok(0)
        }
    }
}

fn summarize(cfg: &ScenarioConfig, report: &ScenarioReport, dir: &Path) {
    println!(
        "scenario '{}': {} s at dt = {} s ({} steps)",
        cfg.name,
        cfg.duration,
        cfg.dt,
        cfg.steps()
    );
    match (&report.certificate.uub, report.certificate.certificate_ok()) {
        (Some(u), true) => println!("certificate: ok (ultimate-bound radius {:.3})", u.radius),
        _ => {
            println!("certificate: NOT satisfied");
            for w in &report.certificate.warnings {
                println!("  warning: {w}");
            }
        }
    }
    if let Some(ingest) = &report.ingest {
        println!(
            "replay log: {} usable records, {} overdelivery anomalies, {} skipped",
            ingest.records.len(),
            ingest.overdelivery_count,
            ingest.skipped_count
        );
    }
    for run in &report.runs {
        let m = &run.metrics;
        let settled = if m.settled {
            format!("settled in {:.1} s", m.settling_time)
        } else {
            "did not settle".to_string()
        };
        println!(
            "{}: overshoot {:.3} degC, {}, band occupancy {:.3}, mean fault-estimate error {:.4}",
            run.kind.as_str(),
            m.overshoot,
            settled,
            m.band_occupancy,
            m.mean_fault_error
        );
    }
    println!("outputs written to {}", dir.display());
}

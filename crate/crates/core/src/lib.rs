//! Simulation and estimation toolkit for fault-tolerant spray-attemperator
//! control of a superheater steam-temperature loop.
//!
//! The crate models a two-state desuperheater/superheater section with a
//! multiplicative loss-of-effectiveness fault on the spray valve, and
//! provides the pieces needed to close the loop around it:
//!
//! - [`plant`]: nonlinear two-state dynamics, disturbance schedules, and a
//!   classical fourth-order integrator.
//! - [`faults`]: fault profiles for simulation and effectiveness
//!   extraction from commanded-vs-delivered valve records.
//! - [`observer`]: a sliding-mode state observer driven by the measured
//!   outlet temperature.
//! - [`estimator`]: an online physics-trained neural estimator of the
//!   fault fraction.
//! - [`controller`]: a one-sided, fault-compensating sliding-mode law and
//!   a PID baseline.
//! - [`stability`]: observer gain conditions, ultimate-bound reporting,
//!   and trainer contraction bounds.
//! - [`harness`]: scenario configuration, the closed-loop runner, trace
//!   and metrics output, valve-log ingestion, and parameter sweeps.

pub mod controller;
pub mod error;
pub mod estimator;
pub mod faults;
pub mod harness;
pub mod observer;
pub mod plant;
pub mod stability;

pub use error::{SimError, SimResult};

//! Deterministic discrete-event simulator for comparing three ways of placing
//! AI workloads across the device-edge-cloud continuum: ship everything to a
//! cloud backend, terminate at an on-site gateway with cloud fallback, or keep
//! processing on the devices themselves with opportunistic peer collaboration.
//!
//! The crate is organised around a handful of small modules:
//!
//! - [`model`] — scenario configuration types, validation, and shipped presets
//! - [`workload`] — seeded task-stream generation (Poisson and periodic sources)
//! - [`network`] — link traversal times, transmission energy, outage handling
//! - [`engine`] — the event loop: routing, FIFO server queues, run metrics
//! - [`metrics`] — analytic predictors plus energy and cost accounting
//! - [`stats`] — summary statistics and Welch's t-test on run-level samples
//! - [`report`] — experiment orchestration, report emission, reference checks
//!
//! Everything is reproducible: the same scenario and seed produce bit-identical
//! runs and byte-identical report files.

pub mod engine;
pub mod metrics;
pub mod model;
pub mod network;
pub mod report;
pub mod stats;
pub mod workload;

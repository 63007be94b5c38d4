//! Two-level predictive maintenance.
//!
//! Level 1 maps hourly sensor features of a machine *run* (installation to
//! replacement) to a scalar health indicator using a kernel machine trained
//! under one of several labelling schemes. Level 2 aggregates that indicator
//! over time and raises the first alarm of the run against a tuned threshold.
//! Alarms are scored per run (early alarms, detections, timing) and whole
//! pipelines are compared under a run-grouped double cross-validation.
//!
//! The crate is `no_std` and only needs an allocator. File formats, the
//! command-line driver and parallel execution live in the `pdm` crate.
//!
//! Modules, bottom-up:
//!
//! - [`run_store`]: runs, channels, vibration acquisitions and the seeded
//!   synthetic corpus generator.
//! - [`features`]: time/frequency-domain vibration features, channel
//!   aggregates, z-scoring and causal smoothing.
//! - [`selection`]: prognostic relevance scores and greedy mRMR selection.
//! - [`svm`]: SMO-trained SVC, one-class SVM and ε-SVR.
//! - [`labelling`]: training targets derived from failure times.
//! - [`decision`]: indicator aggregation, thresholds and alarms.
//! - [`scoring`]: run-level detection and timing scores.
//! - [`validation`]: fold planning, inner model/threshold selection and the
//!   outer evaluation loop.

#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod decision;
pub mod features;
pub mod labelling;
pub mod run_store;
pub mod scoring;
pub mod selection;
pub mod stats;
pub mod svm;
pub mod validation;

/// Hours per day; all day-valued parameters are converted with this.
pub const HOURS_PER_DAY: f64 = 24.0;

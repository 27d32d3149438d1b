//! Equivalent-circuit model of a batteryless energy-harvesting sensor node.
//!
//! - [`circuit`]: closed-form capacitor voltage laws, their inverses, and an RK4 reference
//! - [`load`]: the node's operational states and consumption profile
//! - [`planner`]: energy-conservation feasibility and sleep-time planning
//! - [`harvest`]: illuminance to harvested-power lookup
//! - [`engine`]: event-driven simulation producing a [`trace::SimTrace`]
//! - [`validation`]: comparison against measured traces and parameter fitting
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod circuit;
pub mod engine;
pub mod error;
pub mod harvest;
pub mod load;
pub mod planner;
pub mod presets;
pub mod scenario;
pub mod trace;
pub mod validation;

pub use circuit::{CapVoltage, CircuitMode, CircuitParams, Dynamics, LeakageModel};
pub use engine::{run, sweep};
pub use error::{Error, Result};
pub use harvest::{AboveRange, HarvestModel, HarvestPoint};
pub use load::{LoadPhase, LoadProfile, PhaseKind};
pub use planner::{DutyCyclePlan, EnergyBudget, StepFunction};
pub use scenario::{IlluminationProfile, LuxSegment, ScenarioConfig, SimOptions, SleepTime};
pub use trace::{energy_balance, EnergyBalance, Event, EventKind, Segment, SimTrace, TraceRecord};
pub use validation::{compare, fit_parameters, ComparisonReport, MeasuredTrace};

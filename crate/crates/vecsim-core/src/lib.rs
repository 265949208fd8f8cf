//! Core simulation and learning logic for a single-cell vehicular edge
//! computing (VEC) network.
//!
//! The crate models a 1-D road segment covered by one roadside unit. Vehicles
//! generate computing tasks that can be held, offloaded to the VEC server over
//! V2I channels, offloaded to a neighboring vehicle over mmWave V2V channels,
//! or executed locally. Per-decision delay, energy and revenue feed a fleet
//! utility that a multi-agent deterministic policy gradient learner maximizes
//! under per-slot resource constraints.
//!
//! Everything here is deterministic given a seed and free of IO; file formats
//! and the CLI live in the companion `vecsim` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod baselines;
pub mod channel;
pub mod config;
pub mod cost;
pub mod decision;
pub mod env;
pub mod learn;
pub mod rng;
pub mod scenario;

pub use config::ScenarioConfig;
pub use decision::{Decision, MicroInstance};
pub use env::VecEnv;
pub use scenario::{Task, TaskType, VehicleState};

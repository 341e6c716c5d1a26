//! Trajectory synthesis, hierarchical tool-using agents and evaluation.
//!
//! The crate covers the full loop: atomic execution nodes are generated from
//! verified tool calls, linked by scored connections into multi-step
//! trajectories, run by a planner/component agent hierarchy, and scored with
//! trajectory-level metrics.

pub mod aen;
pub mod backend;
pub mod cli;
pub mod clock;
pub mod cluster;
pub mod metrics;
pub mod model;
pub mod modulation;
pub mod orchestrator;
pub mod react;
pub mod schema;
pub mod tools;

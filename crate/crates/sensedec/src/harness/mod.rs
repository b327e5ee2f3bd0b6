//! Experiment harness: configuration, drivers, scoring, identity checks,
//! and deterministic CSV emission.

pub mod config;
pub mod experiments;
pub mod metrics;
pub mod results;
pub mod theory;

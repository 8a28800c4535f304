//! Benchmark harness for data-driven LQR synthesis.
//!
//! The library half of the `synth` binary: experiment configuration,
//! the per-trial pipeline, Monte-Carlo aggregation, the nonlinear
//! pendulum case study, and report emission. The binary is a thin
//! command-line front end over these modules, and the acceptance suite
//! drives them directly.

pub mod config;
pub mod mc;
pub mod pendulum;
pub mod report;
pub mod scenario;
pub mod trial;

//! Command-line driver: seeded, resumable experiment runs with hashed
//! artifacts and a consolidated report.

pub mod app;
pub mod artifacts;
pub mod config;
pub mod error;
pub mod experiments;
pub mod report;
pub mod runner;

//! IO companion to `ccd-core`: the `ccd-sim` command-line front end, flat
//! key=value configs, CSV/JSON artifacts, and the deterministic parallel
//! ensemble runner.

pub mod app;
pub mod config;
pub mod output;
pub mod parallel;

pub use config::{ConfigError, Settings};
pub use parallel::RayonRunner;

//! Experiment runner for the `ethdyn` toolkit: configuration, sweeps and
//! result records.

pub mod config;
pub mod records;
pub mod runner;

pub use config::{ConfigError, RunConfig};
pub use runner::{run, Command, RunSummary};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG_ERROR: i32 = 1;
    pub const PARTIAL_FAILURE: i32 = 2;
    pub const INTERNAL_ERROR: i32 = 3;
}

/// Worker count: explicit value, then `ETHDYN_THREADS`, then available
/// parallelism.
pub fn resolve_threads(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var("ETHDYN_THREADS").ok().and_then(|v| v.parse().ok()))
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

//! Eigenstate-thermalization diagnostics for energy exchange between two
//! coupled spin-1/2 subsystems, computed from propagated random pure states
//! on matrix-free Hamiltonians and checked against exact diagonalization.

pub mod engine;
pub mod error;
pub mod estimator;
pub mod exec;
pub mod funcfilter;
pub mod model;
pub mod moddyn;
pub mod oracle;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};

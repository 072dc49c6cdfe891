//! Pure states, spectral bounds and real-time propagation.

mod bounds;
mod chebyshev;
mod propagate;
mod state;

pub use bounds::{spectral_bounds, spectral_bounds_with, BoundsOptions, SpectralBounds};
pub use chebyshev::{bessel_j_sequence, chebyshev_series, propagator_coefficients};
pub use propagate::{
    default_dt, evolve, rk4_step, uniform_grid, EvolveStats, Evolver, Propagator, STEP_DRIFT_LIMIT,
};
pub use state::{
    cross_expectation, expectation, haar_from_rng, haar_sample, random_haar_state, PureState,
};

use serde::{Deserialize, Serialize};

use crate::model::Operator;

fn default_power_iter_cap() -> usize {
    300
}
fn default_master_seed() -> u64 {
    20140901
}
fn default_propagator() -> Propagator {
    Propagator::Chebyshev { tol: 1e-12 }
}

/// Engine settings shared by every propagation in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    /// Fixed RK4 step; `None` uses [`default_dt`].
    #[serde(default)]
    pub dt_override: Option<f64>,
    /// Simulated time between renormalizations; `None` disables them.
    #[serde(default)]
    pub renormalize_interval: Option<f64>,
    /// Iteration cap of the extremal-eigenvalue search.
    #[serde(default = "default_power_iter_cap")]
    pub power_iter_cap: usize,
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    #[serde(default = "default_propagator")]
    pub propagator: Propagator,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            dt_override: None,
            renormalize_interval: None,
            power_iter_cap: default_power_iter_cap(),
            master_seed: default_master_seed(),
            propagator: default_propagator(),
        }
    }
}

impl EngineConfig {
    /// The configured propagator with `dt_override` applied to RK4.
    pub fn resolved_propagator(&self) -> Propagator {
        match self.propagator {
            Propagator::Rk4 { dt } => Propagator::Rk4 { dt: self.dt_override.or(dt) },
            p => p,
        }
    }

    pub fn bounds_for<O: Operator + ?Sized>(&self, op: &O) -> SpectralBounds {
        spectral_bounds_with(
            op,
            BoundsOptions { iteration_cap: self.power_iter_cap, ..BoundsOptions::default() },
        )
    }

    pub fn evolver<'a, O: Operator + ?Sized>(&self, op: &'a O, bounds: SpectralBounds) -> Evolver<'a, O> {
        Evolver::new(op, bounds, self.resolved_propagator())
            .with_renormalization(self.renormalize_interval)
    }
}

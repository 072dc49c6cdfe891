use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::bounds::{spectral_bounds, SpectralBounds};
use super::chebyshev::{chebyshev_series, propagator_coefficients};
use super::state::PureState;
use crate::error::{Error, Result};
use crate::exec;
use crate::model::Operator;

/// Largest relative change of `‖ψ‖²` tolerated in one RK4 step.
pub const STEP_DRIFT_LIMIT: f64 = 1e-6;

/// Largest `half_width · τ` handled by one Chebyshev step.
const MAX_CHEBYSHEV_PHASE: f64 = 200.0;

/// Real-time integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Propagator {
    /// Classical fourth-order Runge–Kutta with a fixed step; `dt: None`
    /// selects [`default_dt`].
    Rk4 { dt: Option<f64> },
    /// Chebyshev expansion of `e^{−iHτ}` between observation times.
    Chebyshev { tol: f64 },
}

impl Default for Propagator {
    fn default() -> Self {
        Propagator::Rk4 { dt: None }
    }
}

/// `0.5 / (λ_max − λ_min)`, capped at `0.01` (units of `1/J`).
pub fn default_dt(bounds: &SpectralBounds) -> f64 {
    let w = bounds.width();
    if w > 0.0 {
        (0.5 / w).min(0.01)
    } else {
        0.01
    }
}

/// Bookkeeping from one propagation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolveStats {
    pub steps: usize,
    pub operator_applications: usize,
    pub renormalizations: usize,
    /// Largest relative norm change observed in a single RK4 step.
    pub max_step_drift: f64,
}

/// One RK4 step of `i dψ/dt = op ψ`.
pub fn rk4_step<O: Operator + ?Sized>(op: &O, psi: &PureState, dt: f64) -> Result<PureState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if op.dim() != psi.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: psi.dim() });
    }
    let mut out = psi.clone();
    let mut scratch = Rk4Scratch::new(psi.dim());
    let drift = scratch.step(op, &mut out, dt);
    if drift > STEP_DRIFT_LIMIT {
        return Err(Error::NormDrift { drift });
    }
    Ok(out)
}

struct Rk4Scratch {
    k: Vec<Complex64>,
    stage: Vec<Complex64>,
    acc: Vec<Complex64>,
}

impl Rk4Scratch {
    fn new(dim: usize) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self { k: vec![z; dim], stage: vec![z; dim], acc: vec![z; dim] }
    }

    /// Advances `psi` in place and returns the relative norm change.
    fn step<O: Operator + ?Sized>(&mut self, op: &O, psi: &mut PureState, dt: f64) -> f64 {
        let before = psi.norm_sqr();
        let minus_i = Complex64::new(0.0, -1.0);
        let src = psi.amplitudes();
        // (weight into acc, stage offset for the next evaluation)
        let plan = [(dt / 6.0, dt / 2.0), (dt / 3.0, dt / 2.0), (dt / 3.0, dt), (dt / 6.0, 0.0)];
        self.acc.copy_from_slice(src);
        self.stage.copy_from_slice(src);
        for (n, &(w, next)) in plan.iter().enumerate() {
            op.apply_into(&self.stage, &mut self.k);
            let k = &self.k;
            let last = n == plan.len() - 1;
            let stage = &mut self.stage;
            exec::for_each_chunk_mut(&mut self.acc, |c, acc| {
                let off = c * exec::CHUNK;
                let kk = &k[off..off + acc.len()];
                for (a, kv) in acc.iter_mut().zip(kk) {
                    *a += minus_i * kv * w;
                }
            });
            if !last {
                exec::for_each_chunk_mut(stage, |c, st| {
                    let off = c * exec::CHUNK;
                    let kk = &k[off..off + st.len()];
                    let s0 = &src[off..off + st.len()];
                    for ((s, kv), p) in st.iter_mut().zip(kk).zip(s0) {
                        *s = p + minus_i * kv * next;
                    }
                });
            }
        }
        psi.amplitudes_mut().copy_from_slice(&self.acc);
        let after = psi.norm_sqr();
        if before > 0.0 {
            ((after - before) / before).abs()
        } else {
            0.0
        }
    }
}

/// Propagates states under a fixed Hermitian operator.
pub struct Evolver<'a, O: ?Sized> {
    op: &'a O,
    bounds: SpectralBounds,
    propagator: Propagator,
    renormalize_interval: Option<f64>,
}

impl<'a, O: Operator + ?Sized> Evolver<'a, O> {
    pub fn new(op: &'a O, bounds: SpectralBounds, propagator: Propagator) -> Self {
        Self { op, bounds, propagator, renormalize_interval: None }
    }

    /// Rescales each state back to its initial norm every `interval` of
    /// simulated time. Drift is still measured before each rescale.
    pub fn with_renormalization(mut self, interval: Option<f64>) -> Self {
        self.renormalize_interval = interval.filter(|v| *v > 0.0);
        self
    }

    pub fn bounds(&self) -> &SpectralBounds {
        &self.bounds
    }

    pub fn rk4_dt(&self) -> f64 {
        match self.propagator {
            Propagator::Rk4 { dt: Some(dt) } => dt,
            _ => default_dt(&self.bounds),
        }
    }

    /// Calls `observer(t, states)` at every grid time, starting with the
    /// initial states at `grid[0] = 0`.
    pub fn evolve<T, F>(
        &self,
        states: &mut [PureState],
        grid: &[f64],
        mut observer: F,
    ) -> Result<(Vec<T>, EvolveStats)>
    where
        F: FnMut(f64, &[PureState]) -> Result<T>,
    {
        validate_grid(grid)?;
        for s in states.iter() {
            if s.dim() != self.op.dim() {
                return Err(Error::DimensionMismatch { expected: self.op.dim(), got: s.dim() });
            }
        }
        let initial_norms: Vec<f64> = states.iter().map(|s| s.norm_sqr()).collect();
        let mut stats = EvolveStats::default();
        let mut out = Vec::with_capacity(grid.len());
        let mut since_renorm = 0.0;
        let mut scratch = match self.propagator {
            Propagator::Rk4 { .. } => Some(Rk4Scratch::new(self.op.dim())),
            Propagator::Chebyshev { .. } => None,
        };
        out.push(observer(grid[0], states)?);

        for win in grid.windows(2) {
            let span = win[1] - win[0];
            match self.propagator {
                Propagator::Rk4 { .. } => {
                    let dt0 = self.rk4_dt();
                    let n = (span / dt0).ceil().max(1.0) as usize;
                    let dt = span / n as f64;
                    let scratch = scratch.as_mut().expect("rk4 scratch");
                    for _ in 0..n {
                        for s in states.iter_mut() {
                            let drift = scratch.step(self.op, s, dt);
                            stats.max_step_drift = stats.max_step_drift.max(drift);
                            if drift > STEP_DRIFT_LIMIT {
                                return Err(Error::NormDrift { drift });
                            }
                            stats.operator_applications += 4;
                        }
                        stats.steps += 1;
                        since_renorm += dt;
                        self.maybe_renormalize(states, &initial_norms, &mut since_renorm, &mut stats);
                    }
                }
                Propagator::Chebyshev { tol } => {
                    let hw = self.bounds.half_width().max(1e-300);
                    let n = (hw * span / MAX_CHEBYSHEV_PHASE).ceil().max(1.0) as usize;
                    let tau = span / n as f64;
                    let coeffs = propagator_coefficients(&self.bounds, tau, tol);
                    for _ in 0..n {
                        for s in states.iter_mut() {
                            *s = chebyshev_series(self.op, &self.bounds, &coeffs, s)?;
                            stats.operator_applications += coeffs.len().saturating_sub(1);
                        }
                        stats.steps += 1;
                        since_renorm += tau;
                        self.maybe_renormalize(states, &initial_norms, &mut since_renorm, &mut stats);
                    }
                }
            }
            out.push(observer(win[1], states)?);
        }
        Ok((out, stats))
    }

    fn maybe_renormalize(
        &self,
        states: &mut [PureState],
        initial_norms: &[f64],
        since: &mut f64,
        stats: &mut EvolveStats,
    ) {
        let Some(interval) = self.renormalize_interval else { return };
        if *since + 1e-12 < interval {
            return;
        }
        *since = 0.0;
        for (s, &n0) in states.iter_mut().zip(initial_norms) {
            let n = s.norm_sqr();
            if n > 0.0 {
                s.scale(Complex64::new((n0 / n).sqrt(), 0.0));
            }
        }
        stats.renormalizations += 1;
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid[0] != 0.0 {
        return Err(Error::InvalidArgument("time grid must start at 0".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// RK4 propagation at the default step, observing each grid time.
pub fn evolve<O, T, F>(op: &O, psi: &PureState, grid: &[f64], mut observer: F) -> Result<Vec<T>>
where
    O: Operator + ?Sized,
    F: FnMut(f64, &PureState) -> T,
{
    let bounds = spectral_bounds(op);
    let evolver = Evolver::new(op, bounds, Propagator::Rk4 { dt: None });
    let mut states = vec![psi.clone()];
    let (out, _) = evolver.evolve(&mut states, grid, |t, s| Ok(observer(t, &s[0])))?;
    Ok(out)
}

/// Evenly spaced grid `0, t_max/(n−1), …, t_max`.
pub fn uniform_grid(t_max: f64, n_times: usize) -> Vec<f64> {
    assert!(n_times >= 2);
    (0..n_times)
        .map(|k| t_max * k as f64 / (n_times - 1) as f64)
        .collect()
}

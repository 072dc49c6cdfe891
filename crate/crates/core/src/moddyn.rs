//! Observable-displaced initial states and their relaxation.

use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::engine::{expectation, haar_sample, uniform_grid, Propagator, PureState, SpectralBounds};
use crate::error::{Error, Result};
use crate::estimator::TypicalityContext;
use crate::exec;
use crate::funcfilter::{EnergyWindow, ModRoot, ModRootParams, ShellFilter};
use crate::model::Operator;
use crate::rng::SeedStreams;
use crate::stats::{jackknife, mean, Estimate};

/// Target displacement, either a number or `±N_L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum D0 {
    Value(f64),
    PlusNLeft,
    MinusNLeft,
}

impl D0 {
    pub fn resolve(&self, n_left: usize) -> f64 {
        match *self {
            D0::Value(v) => v,
            D0::PlusNLeft => n_left as f64,
            D0::MinusNLeft => -(n_left as f64),
        }
    }

    pub fn flipped(&self) -> Self {
        match *self {
            D0::Value(v) => D0::Value(-v),
            D0::PlusNLeft => D0::MinusNLeft,
            D0::MinusNLeft => D0::PlusNLeft,
        }
    }
}

impl Default for D0 {
    fn default() -> Self {
        D0::PlusNLeft
    }
}

impl fmt::Display for D0 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            D0::Value(v) => write!(f, "{v}"),
            D0::PlusNLeft => f.write_str("+N_L"),
            D0::MinusNLeft => f.write_str("-N_L"),
        }
    }
}

impl FromStr for D0 {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "N_L" | "+N_L" => Ok(D0::PlusNLeft),
            "-N_L" => Ok(D0::MinusNLeft),
            other => other
                .parse::<f64>()
                .map(D0::Value)
                .map_err(|_| Error::InvalidArgument(format!("d0 must be a number or ±N_L, got {other:?}"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum D0Repr {
    Number(f64),
    Text(String),
}

impl Serialize for D0 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            D0::Value(v) => D0Repr::Number(*v),
            other => D0Repr::Text(other.to_string()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for D0 {
    fn deserialize<De: serde::Deserializer<'de>>(d: De) -> std::result::Result<Self, De::Error> {
        match D0Repr::deserialize(d)? {
            D0Repr::Number(v) => Ok(D0::Value(v)),
            D0Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn default_beta() -> f64 {
    0.5
}
fn default_t_max() -> f64 {
    200.0
}
fn default_n_times() -> usize {
    201
}
fn default_tail_fraction() -> f64 {
    0.25
}

/// Mod section of a run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModConfig {
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub d0: D0,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_n_times")]
    pub n_times: usize,
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
}

impl Default for ModConfig {
    fn default() -> Self {
        Self {
            beta: default_beta(),
            d0: D0::default(),
            t_max: default_t_max(),
            n_times: default_n_times(),
            tail_fraction: default_tail_fraction(),
        }
    }
}

impl ModConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) {
            return Err(Error::InvalidArgument(format!("beta must be nonnegative, got {}", self.beta)));
        }
        if !(self.t_max > 0.0) || self.n_times < 2 {
            return Err(Error::InvalidArgument(format!(
                "need t_max > 0 and n_times >= 2, got {} and {}",
                self.t_max, self.n_times
            )));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "tail_fraction must lie in (0, 1], got {}",
                self.tail_fraction
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        uniform_grid(self.t_max, self.n_times)
    }

    pub fn spec(&self, window: EnergyWindow, n_left: usize) -> ModSpec {
        ModSpec {
            sigma: window.sigma,
            beta: self.beta,
            d0: self.d0.resolve(n_left),
            e_center: window.e_center,
        }
    }
}

/// Resolved parameters of the weight `exp(−((H − Ē)² + β²(D − d₀)²)/2σ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModSpec {
    pub sigma: f64,
    pub beta: f64,
    pub d0: f64,
    pub e_center: f64,
}

impl Default for ModSpec {
    fn default() -> Self {
        Self { sigma: 0.6, beta: 0.5, d0: 0.0, e_center: 0.0 }
    }
}

impl ModSpec {
    fn root_params(&self, tol: f64) -> ModRootParams {
        ModRootParams { sigma: self.sigma, beta: self.beta, d0: self.d0, e_center: self.e_center, tol }
    }
}

/// A normalized MOD state with its diagnostics.
#[derive(Debug, Clone)]
pub struct ModState {
    pub state: PureState,
    pub sample_index: u64,
    /// `⟨ψ|D|ψ⟩` of the normalized state.
    pub d0_measured: f64,
    pub energy_mean: f64,
    pub energy_variance: f64,
    /// `⟨r|ρ|r⟩` with the unnormalized weight, before normalization.
    pub weight: f64,
    /// `|d0_measured − d₀| > |d₀|/2`.
    pub displacement_missed: bool,
}

/// Prepares MOD states for one model and one set of parameters.
pub struct ModPreparer<'a> {
    ctx: TypicalityContext<'a>,
    root: ModRoot<'a>,
    spec: ModSpec,
}

impl<'a> ModPreparer<'a> {
    pub fn new(ctx: TypicalityContext<'a>, d_bounds: SpectralBounds, spec: ModSpec) -> Result<Self> {
        let root = ModRoot::new(ctx.h, ctx.d, ctx.h_bounds, d_bounds, spec.root_params(ctx.cheb_tol))?;
        Ok(Self { ctx, root, spec })
    }

    pub fn spec(&self) -> &ModSpec {
        &self.spec
    }

    pub fn context(&self) -> &TypicalityContext<'a> {
        &self.ctx
    }

    fn haar(&self, index: u64) -> PureState {
        haar_sample(self.ctx.h.dim(), &SeedStreams::new(self.ctx.engine.master_seed), index)
    }

    /// Unnormalized `exp(−K/4σ²)|r⟩` for the `index`-th random state.
    pub fn root_state(&self, index: u64) -> Result<PureState> {
        self.root.apply(&self.haar(index))
    }

    pub fn prepare(&self, index: u64) -> Result<ModState> {
        let mut psi = self.root_state(index)?;
        let weight = psi.norm_sqr();
        if !(weight > 0.0) {
            return Err(Error::InvalidArgument("MOD weight vanishes for this random state".into()));
        }
        psi.normalize();
        let d0_measured = normalized_expectation(&psi, self.ctx.d)?;
        let e1 = expectation(&psi, self.ctx.h)?;
        let mut hpsi = PureState::zeros(psi.dim());
        self.ctx.h.apply_into(psi.amplitudes(), hpsi.amplitudes_mut());
        let e2 = hpsi.norm_sqr();
        let d0 = self.spec.d0;
        let displacement_missed = d0 != 0.0 && (d0_measured - d0).abs() > 0.5 * d0.abs();
        if displacement_missed {
            warn!("MOD state reaches d0 = {d0_measured:.4} for target {d0}");
        }
        Ok(ModState {
            state: psi,
            sample_index: index,
            d0_measured,
            energy_mean: e1,
            energy_variance: e2 - e1 * e1,
            weight,
            displacement_missed,
        })
    }
}

/// Builds the MOD state for one random sample.
pub fn prepare_mod_state(
    ctx: TypicalityContext<'_>,
    d_bounds: SpectralBounds,
    spec: ModSpec,
    index: u64,
) -> Result<ModState> {
    ModPreparer::new(ctx, d_bounds, spec)?.prepare(index)
}

fn normalized_expectation<O: Operator + ?Sized>(psi: &PureState, op: &O) -> Result<f64> {
    Ok(expectation(psi, op)? / psi.norm_sqr())
}

/// Everything needed to regenerate a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub mod_spec: ModSpec,
    pub master_seed: u64,
    pub sample_index: u64,
    pub propagator: Propagator,
    pub cheb_tol: f64,
}

/// `d(t)` and `r(t) = d(t)/d(0)` of one MOD state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationTrace {
    pub times: Vec<f64>,
    pub d_t: Vec<f64>,
    pub r_t: Vec<f64>,
    pub d0_measured: f64,
    pub epsilon_bound: Option<f64>,
    /// Tail-window mean of `r(t)`.
    pub long_time_value: f64,
    /// Tail-window mean of `d(t)`.
    pub long_time_d: f64,
    /// Tail-window mean of `|r(t)|`.
    pub tail_mean_abs_r: f64,
    pub tail_window: [f64; 2],
    pub tail_fraction: f64,
    pub meta: TraceMeta,
}

pub fn relaxation_trace(
    preparer: &ModPreparer<'_>,
    state: &ModState,
    grid: &[f64],
    tail_fraction: f64,
) -> Result<RelaxationTrace> {
    let ctx = preparer.context();
    if state.d0_measured == 0.0 {
        return Err(Error::InvalidArgument("relaxation trace needs d0_measured != 0".into()));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("tail_fraction must lie in (0, 1], got {tail_fraction}")));
    }
    let evolver = ctx.engine.evolver(ctx.h, ctx.h_bounds);
    let mut states = vec![state.state.clone()];
    let (d_t, _) = evolver.evolve(&mut states, grid, |_, s| normalized_expectation(&s[0], ctx.d))?;
    let r_t: Vec<f64> = d_t.iter().map(|d| d / state.d0_measured).collect();
    let n = grid.len();
    let n_tail = ((tail_fraction * n as f64).ceil() as usize).clamp(1, n);
    let tail = n - n_tail..n;
    let abs_tail: Vec<f64> = r_t[tail.clone()].iter().map(|r| r.abs()).collect();
    Ok(RelaxationTrace {
        times: grid.to_vec(),
        long_time_value: mean(&r_t[tail.clone()]),
        long_time_d: mean(&d_t[tail.clone()]),
        tail_mean_abs_r: mean(&abs_tail),
        tail_window: [grid[tail.start], grid[n - 1]],
        tail_fraction,
        d0_measured: state.d0_measured,
        epsilon_bound: None,
        d_t,
        r_t,
        meta: TraceMeta {
            mod_spec: *preparer.spec(),
            master_seed: ctx.engine.master_seed,
            sample_index: state.sample_index,
            propagator: ctx.engine.resolved_propagator(),
            cheb_tol: ctx.cheb_tol,
        },
    })
}

/// Fraction of the gap between the long-time value and the largest
/// eigenvalue bound `9/4·(N_L − 1)` of `D` spanned by the initial displacement.
pub fn displacement_fraction(d0_measured: f64, n_left: usize, long_time_value: f64) -> f64 {
    let d_max = 2.25 * (n_left as f64 - 1.0);
    (d0_measured - long_time_value) / (d_max - long_time_value)
}

/// `(Tr{ρ D⁴}/Tr{ρ} / d_eff)^{1/2}` with the MOD weight `ρ` and the
/// Gaussian-window `d_eff`, both estimated from the same random states.
pub fn epsilon_bound(preparer: &ModPreparer<'_>, n_samples: usize) -> Result<Estimate> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument(format!("n_samples must be at least 2, got {n_samples}")));
    }
    let ctx = preparer.context();
    let spec = preparer.spec();
    let shell = ShellFilter::new(ctx.h_bounds, EnergyWindow::new(spec.e_center, spec.sigma), ctx.cheb_tol)?;
    let indices: Vec<u64> = (0..n_samples as u64).collect();
    let rows = exec::map_items(indices, |k| -> Result<Vec<f64>> {
        let r = preparer.haar(k);
        let psi = preparer.root.apply(&r)?;
        let mut a = PureState::zeros(psi.dim());
        let mut b = PureState::zeros(psi.dim());
        ctx.d.apply_into(psi.amplitudes(), a.amplitudes_mut());
        ctx.d.apply_into(a.amplitudes(), b.amplitudes_mut());
        let g = shell.apply(ctx.h, &r)?;
        Ok(vec![psi.norm_sqr(), b.norm_sqr(), g.norm_sqr()])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let dim = ctx.h.dim() as f64;
    Ok(jackknife(&rows, |m| ((m[1] / m[0]) / (dim * m[2])).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d0_parsing() {
        assert_eq!("+N_L".parse::<D0>().unwrap(), D0::PlusNLeft);
        assert_eq!("N_L".parse::<D0>().unwrap(), D0::PlusNLeft);
        assert_eq!("-N_L".parse::<D0>().unwrap(), D0::MinusNLeft);
        assert_eq!("1.5".parse::<D0>().unwrap(), D0::Value(1.5));
        assert!("N_R".parse::<D0>().is_err());
        assert_eq!(D0::MinusNLeft.resolve(6), -6.0);
        assert_eq!(D0::PlusNLeft.flipped(), D0::MinusNLeft);
    }

    #[test]
    fn d0_serde_roundtrip() {
        #[derive(Serialize, Deserialize, PartialEq, Debug)]
        struct W {
            d0: D0,
        }
        for v in [D0::PlusNLeft, D0::MinusNLeft, D0::Value(-2.5)] {
            let s = serde_json::to_string(&W { d0: v }).unwrap();
            assert_eq!(serde_json::from_str::<W>(&s).unwrap(), W { d0: v });
        }
        assert_eq!(serde_json::from_str::<W>(r#"{"d0":"-N_L"}"#).unwrap().d0, D0::MinusNLeft);
        assert!(serde_json::from_str::<W>(r#"{"d0":"x"}"#).is_err());
    }

    #[test]
    fn displacement_fraction_arithmetic() {
        assert_eq!(displacement_fraction(0.3, 4, 0.3), 0.0);
        assert!((displacement_fraction(4.0, 4, 0.5) - 3.5 / 6.25).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(ModConfig::default().validate().is_ok());
        assert!(ModConfig { tail_fraction: 0.0, ..Default::default() }.validate().is_err());
        assert!(ModConfig { beta: -1.0, ..Default::default() }.validate().is_err());
        assert_eq!(ModConfig::default().grid().len(), 201);
    }
}

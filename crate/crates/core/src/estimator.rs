//! ETH diagnostics from filtered random pure states: effective dimension,
//! microcanonical mean, diagonal variance, its slope-corrected width and the
//! finite-size scaling exponent.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::engine::{cross_expectation, haar_sample, EngineConfig, PureState, SpectralBounds};
use crate::error::{Error, Result};
use crate::exec;
use crate::funcfilter::{EnergyWindow, ShellFilter};
use crate::model::Operator;
use crate::rng::SeedStreams;
use crate::stats::{fit_line, jackknife, Estimate};

/// Random-matrix reference exponent for `Σ′ ∝ d_eff^(−γ)`.
pub const REFERENCE_GAMMA: f64 = 0.5;

fn default_n_samples() -> usize {
    10
}
fn default_t_min() -> f64 {
    50.0
}
fn default_t_max() -> f64 {
    500.0
}
fn default_t_spacing() -> f64 {
    1.0
}

/// Estimator section of a run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_t_min")]
    pub t_min: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_t_spacing")]
    pub t_spacing: f64,
    /// Half-step of the central difference; `None` means `σ/2`.
    #[serde(default, rename = "slope_dE")]
    pub slope_de: Option<f64>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            n_samples: default_n_samples(),
            t_min: default_t_min(),
            t_max: default_t_max(),
            t_spacing: default_t_spacing(),
            slope_de: None,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::InvalidArgument(format!("n_samples must be at least 2, got {}", self.n_samples)));
        }
        if !(self.t_min >= 0.0 && self.t_max > self.t_min && self.t_spacing > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time window needs 0 <= t_min < t_max and t_spacing > 0, got [{}, {}] step {}",
                self.t_min, self.t_max, self.t_spacing
            )));
        }
        if let Some(de) = self.slope_de {
            if !(de > 0.0) {
                return Err(Error::InvalidArgument(format!("slope_dE must be positive, got {de}")));
            }
        }
        Ok(())
    }

    pub fn time_window(&self) -> TimeWindow {
        TimeWindow { t_min: self.t_min, t_max: self.t_max, spacing: self.t_spacing }
    }

    pub fn slope_step(&self, sigma: f64) -> f64 {
        self.slope_de.unwrap_or(0.5 * sigma)
    }
}

/// Sampling window of the long-time average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub t_min: f64,
    pub t_max: f64,
    pub spacing: f64,
}

impl TimeWindow {
    /// Sample times `t_min, t_min + spacing, …` up to `t_max`.
    pub fn sample_times(&self) -> Vec<f64> {
        let n = ((self.t_max - self.t_min) / self.spacing + 1e-9).floor() as usize + 1;
        (0..n).map(|k| self.t_min + k as f64 * self.spacing).collect()
    }
}

/// Quality flags attached to a report.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EthFlags {
    /// `Σ′` came out negative and was set to zero.
    pub sigma_prime_clamped: bool,
    /// `Σ²` came out negative and was set to zero.
    pub sigma2_clamped: bool,
    /// Slope standard error exceeds its magnitude.
    pub slope_unreliable: bool,
    /// The two halves of the time window disagree.
    pub plateau_not_reached: bool,
}

/// ETH diagnostics for one window, each with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EthReport {
    pub window: EnergyWindow,
    pub samples: usize,
    pub d_eff: Estimate,
    pub a_bar: Estimate,
    pub sigma2: Estimate,
    pub slope: Estimate,
    pub sigma_prime: Estimate,
    pub delta2: Estimate,
    pub v: Estimate,
    pub flags: EthFlags,
}

impl EthReport {
    /// Report from exact values; all standard errors are zero.
    pub fn from_exact(d_eff: f64, a_bar: f64, sigma2: f64, slope: f64, delta2: f64, window: EnergyWindow) -> Self {
        compose_report(
            window,
            0,
            Estimate::exact(d_eff),
            Estimate::exact(a_bar),
            Estimate::exact(sigma2),
            Estimate::exact(slope),
            Estimate::exact(delta2),
        )
    }
}

/// `Σ′ = √Σ² − |∂Ā/∂Ē|·σ` and `v = Σ′²/δ²` from the primary estimates.
pub fn compose_report(
    window: EnergyWindow,
    samples: usize,
    d_eff: Estimate,
    a_bar: Estimate,
    sigma2: Estimate,
    slope: Estimate,
    delta2: Estimate,
) -> EthReport {
    let mut flags = EthFlags::default();
    let mut sigma2 = sigma2;
    if sigma2.value < 0.0 {
        flags.sigma2_clamped = true;
        sigma2.value = 0.0;
    }
    let sigma = window.sigma;
    let root = sigma2.value.sqrt();
    let root_err = if root > 0.0 { sigma2.stderr / (2.0 * root) } else { sigma2.stderr.sqrt() };
    let mut sp = Estimate {
        value: root - slope.value.abs() * sigma,
        stderr: root_err.hypot(slope.stderr * sigma),
    };
    if sp.value < 0.0 {
        flags.sigma_prime_clamped = true;
        sp.value = 0.0;
    }
    flags.slope_unreliable = slope.stderr > slope.value.abs();
    let v_value = sp.value * sp.value / delta2.value;
    let v_rel = if sp.value > 0.0 && delta2.value > 0.0 {
        (2.0 * sp.stderr / sp.value).hypot(delta2.stderr / delta2.value)
    } else {
        0.0
    };
    let v = Estimate { value: v_value, stderr: v_value.abs() * v_rel };
    EthReport { window, samples, d_eff, a_bar, sigma2, slope, sigma_prime: sp, delta2, v, flags }
}

/// What the per-seed work has to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimatorTasks {
    pub sigma2: bool,
    pub slope: bool,
}

impl EstimatorTasks {
    pub const ALL: Self = Self { sigma2: true, slope: true };
    pub const STATIC: Self = Self { sigma2: false, slope: false };
}

/// Operators, bounds and settings shared by every estimate of one model.
#[derive(Clone, Copy)]
pub struct TypicalityContext<'a> {
    pub h: &'a dyn Operator,
    pub d: &'a dyn Operator,
    pub h_bounds: SpectralBounds,
    pub engine: &'a EngineConfig,
    /// Accuracy of the Chebyshev filters.
    pub cheb_tol: f64,
}

impl<'a> TypicalityContext<'a> {
    pub fn new(h: &'a dyn Operator, d: &'a dyn Operator, engine: &'a EngineConfig, cheb_tol: f64) -> Self {
        let h_bounds = engine.bounds_for(h);
        Self { h, d, h_bounds, engine, cheb_tol }
    }

    fn streams(&self) -> SeedStreams {
        SeedStreams::new(self.engine.master_seed)
    }
}

// Per-seed raw columns.
const NORM: usize = 0;
const D1: usize = 1;
const D2: usize = 2;
const CBAR: usize = 3;
const C_FIRST: usize = 4;
const C_SECOND: usize = 5;
const NORM_P: usize = 6;
const D1_P: usize = 7;
const NORM_M: usize = 8;
const D1_M: usize = 9;
const WIDTH: usize = 10;

fn sample_row(
    ctx: &TypicalityContext<'_>,
    filters: &[ShellFilter],
    tasks: EstimatorTasks,
    times: &[f64],
    index: u64,
) -> Result<Vec<f64>> {
    let r = haar_sample(ctx.h.dim(), &ctx.streams(), index);
    let mut row = vec![0.0; WIDTH];
    let phi = filters[0].apply(ctx.h, &r)?;
    let mut chi = PureState::zeros(phi.dim());
    ctx.d.apply_into(phi.amplitudes(), chi.amplitudes_mut());
    row[NORM] = phi.norm_sqr();
    row[D1] = phi.dot(&chi).re;
    row[D2] = chi.norm_sqr();

    if tasks.slope {
        for (filter, (n, d1)) in filters[1..].iter().zip([(NORM_P, D1_P), (NORM_M, D1_M)]) {
            let psi = filter.apply(ctx.h, &r)?;
            row[n] = psi.norm_sqr();
            row[d1] = crate::engine::expectation(&psi, ctx.d)?;
        }
    }

    if tasks.sigma2 {
        let mut grid = Vec::with_capacity(times.len() + 1);
        if times[0] > 0.0 {
            grid.push(0.0);
        }
        grid.extend_from_slice(times);
        let t_min = times[0];
        let evolver = ctx.engine.evolver(ctx.h, ctx.h_bounds);
        let mut states = vec![phi, chi];
        let (values, _) = evolver.evolve(&mut states, &grid, |t, s| {
            if t < t_min {
                return Ok(None);
            }
            Ok(Some(cross_expectation(&s[0], ctx.d, &s[1])?.re))
        })?;
        let c: Vec<f64> = values.into_iter().flatten().collect();
        let half = c.len() / 2;
        row[CBAR] = crate::stats::mean(&c);
        row[C_FIRST] = crate::stats::mean(&c[..half.max(1)]);
        row[C_SECOND] = crate::stats::mean(&c[half..]);
    }
    Ok(row)
}

fn collect_rows(
    ctx: &TypicalityContext<'_>,
    window: EnergyWindow,
    slope_de: f64,
    tasks: EstimatorTasks,
    time_window: TimeWindow,
    n_samples: usize,
) -> Result<Vec<Vec<f64>>> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument(format!("n_samples must be at least 2, got {n_samples}")));
    }
    let mut filters = vec![ShellFilter::new(ctx.h_bounds, window, ctx.cheb_tol)?];
    if tasks.slope {
        if !(slope_de > 0.0) {
            return Err(Error::InvalidArgument(format!("slope step must be positive, got {slope_de}")));
        }
        filters.push(ShellFilter::new(ctx.h_bounds, window.shifted(slope_de), ctx.cheb_tol)?);
        filters.push(ShellFilter::new(ctx.h_bounds, window.shifted(-slope_de), ctx.cheb_tol)?);
    }
    let times = time_window.sample_times();
    let indices: Vec<u64> = (0..n_samples as u64).collect();
    exec::map_items(indices, |k| sample_row(ctx, &filters, tasks, &times, k))
        .into_iter()
        .collect()
}

fn d_eff_from(rows: &[Vec<f64>], dim: usize) -> Estimate {
    jackknife(rows, |m| dim as f64 * m[NORM])
}

fn a_bar_from(rows: &[Vec<f64>]) -> Estimate {
    jackknife(rows, |m| m[D1] / m[NORM])
}

fn delta2_from(rows: &[Vec<f64>]) -> Estimate {
    jackknife(rows, |m| m[D2] / m[NORM] - (m[D1] / m[NORM]).powi(2))
}

fn sigma2_from(rows: &[Vec<f64>]) -> Estimate {
    jackknife(rows, |m| m[CBAR] / m[NORM] - (m[D1] / m[NORM]).powi(2))
}

fn slope_from(rows: &[Vec<f64>], de: f64) -> Estimate {
    jackknife(rows, |m| (m[D1_P] / m[NORM_P] - m[D1_M] / m[NORM_M]) / (2.0 * de))
}

/// Whether the first and second halves of the time window agree to within
/// three standard errors plus 2% of `δ²`.
fn plateau_reached(rows: &[Vec<f64>], delta2: f64) -> bool {
    let diff = jackknife(rows, |m| (m[C_FIRST] - m[C_SECOND]) / m[NORM]);
    diff.value.abs() <= 3.0 * diff.stderr + 0.02 * delta2.abs()
}

/// `d_eff = d · E[⟨r|g²(H)|r⟩]` over unit Haar states.
pub fn estimate_deff(ctx: &TypicalityContext<'_>, window: EnergyWindow, n_samples: usize) -> Result<Estimate> {
    let rows = collect_rows(ctx, window, 0.0, EstimatorTasks::STATIC, dummy_window(), n_samples)?;
    Ok(d_eff_from(&rows, ctx.h.dim()))
}

/// `Ā` from the filtered states.
pub fn estimate_abar(ctx: &TypicalityContext<'_>, window: EnergyWindow, n_samples: usize) -> Result<Estimate> {
    let rows = collect_rows(ctx, window, 0.0, EstimatorTasks::STATIC, dummy_window(), n_samples)?;
    Ok(a_bar_from(&rows))
}

/// `Σ²` from the long-time average of `Re⟨φ(t)|D|χ(t)⟩`, with `χ = Dφ`.
pub fn estimate_sigma2(
    ctx: &TypicalityContext<'_>,
    window: EnergyWindow,
    time_window: TimeWindow,
    n_samples: usize,
) -> Result<Estimate> {
    let tasks = EstimatorTasks { sigma2: true, slope: false };
    let rows = collect_rows(ctx, window, 0.0, tasks, time_window, n_samples)?;
    let delta2 = delta2_from(&rows);
    if !plateau_reached(&rows, delta2.value) {
        warn!("long-time average has not plateaued over [{}, {}]", time_window.t_min, time_window.t_max);
    }
    Ok(sigma2_from(&rows))
}

/// `∂Ā/∂Ē` by a central difference with half-step `de`.
pub fn estimate_slope(
    ctx: &TypicalityContext<'_>,
    window: EnergyWindow,
    de: f64,
    n_samples: usize,
) -> Result<Estimate> {
    let tasks = EstimatorTasks { sigma2: false, slope: true };
    let rows = collect_rows(ctx, window, de, tasks, dummy_window(), n_samples)?;
    let slope = slope_from(&rows, de);
    if slope.stderr > slope.value.abs() {
        warn!("slope {} is below its standard error {}", slope.value, slope.stderr);
    }
    Ok(slope)
}

fn dummy_window() -> TimeWindow {
    TimeWindow { t_min: 0.0, t_max: 0.0, spacing: 1.0 }
}

/// Full report, sharing the random states between all estimates.
pub fn estimate_eth(ctx: &TypicalityContext<'_>, window: EnergyWindow, cfg: &EstimatorConfig) -> Result<EthReport> {
    estimate_eth_with(ctx, window, cfg, EstimatorTasks::ALL)
}

/// Like [`estimate_eth`]; skipped tasks leave `NaN` in their fields.
pub fn estimate_eth_with(
    ctx: &TypicalityContext<'_>,
    window: EnergyWindow,
    cfg: &EstimatorConfig,
    tasks: EstimatorTasks,
) -> Result<EthReport> {
    cfg.validate()?;
    let de = cfg.slope_step(window.sigma);
    let rows = collect_rows(ctx, window, de, tasks, cfg.time_window(), cfg.n_samples)?;
    let nan = Estimate { value: f64::NAN, stderr: f64::NAN };
    let delta2 = delta2_from(&rows);
    let sigma2 = if tasks.sigma2 { sigma2_from(&rows) } else { nan };
    let slope = if tasks.slope { slope_from(&rows, de) } else { nan };
    let mut report = compose_report(
        window,
        cfg.n_samples,
        d_eff_from(&rows, ctx.h.dim()),
        a_bar_from(&rows),
        sigma2,
        slope,
        delta2,
    );
    if tasks.sigma2 && !plateau_reached(&rows, delta2.value) {
        warn!("long-time average has not plateaued over [{}, {}]", cfg.t_min, cfg.t_max);
        report.flags.plateau_not_reached = true;
    }
    if report.flags.sigma_prime_clamped {
        warn!("negative Σ′ clamped to zero at Ē = {}", window.e_center);
    }
    Ok(report)
}

/// One point of an `Ā(Ē)` curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub e_center: f64,
    pub d_eff: Estimate,
    pub a_bar: Estimate,
}

/// `Ā` at several window centers, filtering the same random states.
pub fn estimate_abar_curve(
    ctx: &TypicalityContext<'_>,
    centers: &[f64],
    sigma: f64,
    n_samples: usize,
) -> Result<Vec<CurvePoint>> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument(format!("n_samples must be at least 2, got {n_samples}")));
    }
    let filters = centers
        .iter()
        .map(|&e| ShellFilter::new(ctx.h_bounds, EnergyWindow::new(e, sigma), ctx.cheb_tol))
        .collect::<Result<Vec<_>>>()?;
    let indices: Vec<u64> = (0..n_samples as u64).collect();
    let per_seed: Vec<Vec<(f64, f64)>> = exec::map_items(indices, |k| {
        let r = haar_sample(ctx.h.dim(), &ctx.streams(), k);
        filters
            .iter()
            .map(|f| {
                let phi = f.apply(ctx.h, &r)?;
                Ok((phi.norm_sqr(), crate::engine::expectation(&phi, ctx.d)?))
            })
            .collect::<Result<Vec<_>>>()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(centers
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let rows: Vec<Vec<f64>> = per_seed.iter().map(|s| vec![s[i].0, s[i].1]).collect();
            CurvePoint {
                e_center: e,
                d_eff: jackknife(&rows, |m| ctx.h.dim() as f64 * m[0]),
                a_bar: jackknife(&rows, |m| m[1] / m[0]),
            }
        })
        .collect())
}

/// Equipartition of the energy over the bonds of two open chains:
/// `(N_L − N_R)/(N_L + N_R − 2) · E`.
pub fn equipartition_prediction(n_left: usize, n_right: usize, e: f64) -> f64 {
    let bonds = (n_left + n_right) as f64 - 2.0;
    (n_left as f64 - n_right as f64) / bonds * e
}

/// Size point of a scaling sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub d_eff: f64,
    pub sigma_prime: f64,
    pub stderr: f64,
}

/// Least-squares fit `log10 Σ′ = intercept − γ·log10 d_eff`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub gamma: f64,
    pub gamma_stderr: f64,
    pub intercept: f64,
    /// Root-mean-square residual in decades.
    pub residual: f64,
    pub n_points: usize,
    pub reference_gamma: f64,
}

pub fn fit_power_law(points: &[ScalingPoint]) -> Result<ScalingFit> {
    if let Some(p) = points.iter().find(|p| !(p.d_eff > 0.0)) {
        return Err(Error::InvalidArgument(format!("d_eff must be positive, got {}", p.d_eff)));
    }
    let used: Vec<&ScalingPoint> = points.iter().filter(|p| p.sigma_prime > 0.0).collect();
    if used.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: used.len() });
    }
    let x: Vec<f64> = used.iter().map(|p| p.d_eff.log10()).collect();
    let y: Vec<f64> = used.iter().map(|p| p.sigma_prime.log10()).collect();
    let fit = fit_line(&x, &y);
    Ok(ScalingFit {
        gamma: -fit.slope,
        gamma_stderr: fit.slope_stderr,
        intercept: fit.intercept,
        residual: fit.residual,
        n_points: used.len(),
        reference_gamma: REFERENCE_GAMMA,
    })
}

//! Functions of Hermitian operators applied to states through Chebyshev
//! expansions: the Gaussian energy-shell filter and the square root of the
//! observable-displaced weight.

mod plan;

pub use plan::{
    apply_function, plan_function, plan_function_capped, ChebyshevPlan, TargetFunction,
    DEFAULT_ORDER_CAP,
};

use log::debug;
use serde::{Deserialize, Serialize};

use crate::engine::{random_haar_state, spectral_bounds, PureState, SpectralBounds};
use crate::error::{Error, Result};
use crate::model::{Affine, Operator, SumOfSquares};

fn default_sigma() -> f64 {
    0.6
}
fn default_cheb_tol() -> f64 {
    1e-10
}

/// Gaussian energy shell of width `sigma` around `e_center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyWindow {
    pub e_center: f64,
    pub sigma: f64,
}

impl Default for EnergyWindow {
    fn default() -> Self {
        Self { e_center: 0.0, sigma: default_sigma() }
    }
}

impl EnergyWindow {
    pub fn new(e_center: f64, sigma: f64) -> Self {
        Self { e_center, sigma }
    }

    pub fn shifted(&self, de: f64) -> Self {
        Self { e_center: self.e_center + de, ..*self }
    }

    /// Unnormalized weight `p(E) = exp(−(E − Ē)² / 2σ²)`.
    pub fn weight(&self, e: f64) -> f64 {
        (-(e - self.e_center).powi(2) / (2.0 * self.sigma * self.sigma)).exp()
    }

    /// The filter `g` with `g² = p`.
    pub fn root_function(&self) -> TargetFunction {
        TargetFunction::Gaussian { center: self.e_center, variance: 2.0 * self.sigma * self.sigma }
    }
}

/// Filter section of a run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub e_center: f64,
    #[serde(default = "default_cheb_tol")]
    pub cheb_tol: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { sigma: default_sigma(), e_center: 0.0, cheb_tol: default_cheb_tol() }
    }
}

impl FilterConfig {
    pub fn window(&self) -> EnergyWindow {
        EnergyWindow::new(self.e_center, self.sigma)
    }
}

/// A planned `exp(−(H − Ē)² / 4σ²)` for one Hamiltonian.
#[derive(Debug, Clone)]
pub struct ShellFilter {
    pub window: EnergyWindow,
    pub plan: ChebyshevPlan,
}

impl ShellFilter {
    pub fn new(h_bounds: SpectralBounds, window: EnergyWindow, tol: f64) -> Result<Self> {
        if !(window.sigma > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {}", window.sigma)));
        }
        let plan = plan_function(window.root_function(), h_bounds, tol)?;
        Ok(Self { window, plan })
    }

    pub fn apply<O: Operator + ?Sized>(&self, h: &O, psi: &PureState) -> Result<PureState> {
        apply_function(&self.plan, h, psi)
    }
}

/// `|φ⟩ = exp(−(H − Ē)² / 4σ²)|r⟩` for a Haar state `|r⟩` drawn from `seed`,
/// returned with `⟨φ|φ⟩`.
pub fn gaussian_filter_state<O: Operator + ?Sized>(
    h: &O,
    h_bounds: SpectralBounds,
    window: EnergyWindow,
    tol: f64,
    seed: u64,
) -> Result<(PureState, f64)> {
    let filter = ShellFilter::new(h_bounds, window, tol)?;
    let r = random_haar_state(h.dim(), seed);
    let phi = filter.apply(h, &r)?;
    let n = phi.norm_sqr();
    Ok((phi, n))
}

/// Parameters of the observable-displaced weight
/// `exp(−((H − Ē)² + β²(D − d₀)²) / 2σ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModRootParams {
    pub sigma: f64,
    pub beta: f64,
    pub d0: f64,
    pub e_center: f64,
    pub tol: f64,
}

/// The composite operator `K = (H − Ē)² + β²(D − d₀)²` and a plan for
/// `exp(−K / 4σ²)`.
pub struct ModRoot<'a> {
    h_shift: Affine<&'a dyn Operator>,
    d_shift: Affine<&'a dyn Operator>,
    beta: f64,
    pub plan: ChebyshevPlan,
}

impl<'a> ModRoot<'a> {
    pub fn new(
        h: &'a dyn Operator,
        d: &'a dyn Operator,
        h_bounds: SpectralBounds,
        d_bounds: SpectralBounds,
        params: ModRootParams,
    ) -> Result<Self> {
        if params.beta < 0.0 {
            return Err(Error::InvalidArgument(format!("beta must be nonnegative, got {}", params.beta)));
        }
        if !(params.sigma > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {}", params.sigma)));
        }
        let h_shift = Affine::shifted(h, params.e_center);
        let d_shift = Affine::shifted(d, params.d0);
        let h_max = (h_bounds.lambda_min - params.e_center)
            .abs()
            .max((h_bounds.lambda_max - params.e_center).abs());
        let d_max = d_bounds.max_abs() + params.d0.abs();
        let k_max = 1.05 * (h_max * h_max + params.beta * params.beta * d_max * d_max);
        let f = TargetFunction::Exponential { rate: 1.0 / (4.0 * params.sigma * params.sigma) };
        let mut root = Self {
            h_shift,
            d_shift,
            beta: params.beta,
            plan: ChebyshevPlan {
                function: f,
                bounds: SpectralBounds::new(0.0, k_max),
                coeffs: vec![],
                grid_error: 0.0,
            },
        };
        root.plan = match plan_function(f, SpectralBounds::new(0.0, k_max), params.tol) {
            Ok(plan) => plan,
            Err(Error::OrderCapExceeded { .. }) => {
                let k = root.operator();
                let mut b = spectral_bounds(&k);
                b.lambda_min = b.lambda_min.max(0.0);
                debug!("interval bound for K too loose; Lanczos bounds {b:?}");
                plan_function(f, b, params.tol)?
            }
            Err(e) => return Err(e),
        };
        Ok(root)
    }

    pub fn operator(&self) -> SumOfSquares<'_> {
        let mut terms: Vec<(f64, &dyn Operator)> = vec![(1.0, &self.h_shift)];
        if self.beta > 0.0 {
            terms.push((self.beta * self.beta, &self.d_shift));
        }
        SumOfSquares::new(terms)
    }

    pub fn apply(&self, psi: &PureState) -> Result<PureState> {
        apply_function(&self.plan, &self.operator(), psi)
    }
}

/// Applies `exp(−(H² + β²(D − d₀)²) / 4σ²)` to `psi`.
pub fn apply_mod_root(
    h: &dyn Operator,
    d: &dyn Operator,
    h_bounds: SpectralBounds,
    d_bounds: SpectralBounds,
    params: ModRootParams,
    psi: &PureState,
) -> Result<PureState> {
    ModRoot::new(h, d, h_bounds, d_bounds, params)?.apply(psi)
}

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::engine::{chebyshev_series, PureState, SpectralBounds};
use crate::error::{Error, Result};
use crate::model::Operator;

/// Default highest order a plan may use.
pub const DEFAULT_ORDER_CAP: usize = 8192;

/// Smooth scalar functions that can be applied to operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetFunction {
    Constant { value: f64 },
    Identity,
    /// `exp(−(x − center)² / (2·variance))`.
    Gaussian { center: f64, variance: f64 },
    /// `exp(−rate·x)`.
    Exponential { rate: f64 },
}

impl TargetFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TargetFunction::Constant { value } => value,
            TargetFunction::Identity => x,
            TargetFunction::Gaussian { center, variance } => {
                (-(x - center).powi(2) / (2.0 * variance)).exp()
            }
            TargetFunction::Exponential { rate } => (-rate * x).exp(),
        }
    }
}

/// Truncated Chebyshev expansion of a function over an operator's bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevPlan {
    pub function: TargetFunction,
    pub bounds: SpectralBounds,
    pub coeffs: Vec<f64>,
    /// Largest deviation from the function found on the check grid.
    pub grid_error: f64,
}

impl ChebyshevPlan {
    /// Number of coefficients; applying the plan costs `order − 1` operator
    /// applications.
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// Evaluates the truncated series at a scalar point.
    pub fn eval(&self, x: f64) -> f64 {
        let y = rescaled(&self.bounds, x);
        clenshaw(&self.coeffs, y)
    }
}

fn rescaled(bounds: &SpectralBounds, x: f64) -> f64 {
    let hw = bounds.half_width();
    if hw > 0.0 {
        (x - bounds.center()) / hw
    } else {
        0.0
    }
}

fn clenshaw(coeffs: &[f64], y: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = 2.0 * y * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    y * b1 - b2 + coeffs.first().copied().unwrap_or(0.0)
}

/// Chebyshev coefficients from `n` Gauss–Chebyshev nodes.
fn dct_coefficients(f: &TargetFunction, bounds: &SpectralBounds, n: usize) -> Vec<f64> {
    let (c, hw) = (bounds.center(), bounds.half_width());
    let values: Vec<f64> = (0..n)
        .map(|j| f.eval(c + hw * (PI * (j as f64 + 0.5) / n as f64).cos()))
        .collect();
    (0..n)
        .map(|k| {
            let s: f64 = values
                .iter()
                .enumerate()
                .map(|(j, v)| v * (PI * k as f64 * (j as f64 + 0.5) / n as f64).cos())
                .sum();
            let norm = if k == 0 { 1.0 } else { 2.0 };
            norm * s / n as f64
        })
        .collect()
}

fn grid_error(f: &TargetFunction, bounds: &SpectralBounds, coeffs: &[f64]) -> f64 {
    const POINTS: usize = 2001;
    (0..POINTS)
        .map(|i| {
            let x = bounds.lambda_min + bounds.width() * i as f64 / (POINTS - 1) as f64;
            let y = rescaled(bounds, x);
            (clenshaw(coeffs, y) - f.eval(x)).abs()
        })
        .fold(0.0, f64::max)
}

pub fn plan_function(f: TargetFunction, bounds: SpectralBounds, tol: f64) -> Result<ChebyshevPlan> {
    plan_function_capped(f, bounds, tol, DEFAULT_ORDER_CAP)
}

/// Smallest truncation whose error on a dense grid over the bounds stays
/// below `tol`.
pub fn plan_function_capped(
    f: TargetFunction,
    bounds: SpectralBounds,
    tol: f64,
    order_cap: usize,
) -> Result<ChebyshevPlan> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if bounds.width() == 0.0 {
        let coeffs = vec![f.eval(bounds.lambda_min)];
        return Ok(ChebyshevPlan { function: f, bounds, coeffs, grid_error: 0.0 });
    }
    let mut nodes = 32;
    loop {
        let coeffs = dct_coefficients(&f, &bounds, nodes);
        // Tail bound on the truncation error; aliasing is negligible when
        // the tail is this small inside the sampled range.
        let mut tail = 0.0;
        let mut order = nodes;
        for k in (0..nodes).rev() {
            if tail + coeffs[k].abs() > 0.25 * tol {
                order = k + 1;
                break;
            }
            tail += coeffs[k].abs();
            order = k;
        }
        let order = order.max(1);
        if 2 * order <= nodes {
            if order > order_cap {
                return Err(Error::OrderCapExceeded { cap: order_cap, required: order });
            }
            let coeffs = coeffs[..order].to_vec();
            let err = grid_error(&f, &bounds, &coeffs);
            if err < tol {
                return Ok(ChebyshevPlan { function: f, bounds, coeffs, grid_error: err });
            }
        }
        if nodes / 2 > order_cap {
            return Err(Error::OrderCapExceeded { cap: order_cap, required: order.max(nodes / 2) });
        }
        nodes *= 2;
    }
}

/// Applies `f(op)` to `psi` with the three-term recurrence.
pub fn apply_function<O: Operator + ?Sized>(
    plan: &ChebyshevPlan,
    op: &O,
    psi: &PureState,
) -> Result<PureState> {
    let coeffs: Vec<Complex64> = plan.coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    chebyshev_series(op, &plan.bounds, &coeffs, psi)
}

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::state::{haar_from_rng, PureState};
use crate::model::Operator;
use crate::rng::{Purpose, SeedStreams};

/// An interval certified to contain the spectrum of an operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralBounds {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Relative inflation applied to the estimated extremes.
    pub safety_margin: f64,
}

impl SpectralBounds {
    pub fn new(lambda_min: f64, lambda_max: f64) -> Self {
        Self { lambda_min, lambda_max, safety_margin: 0.0 }
    }

    /// `[-‖op‖, ‖op‖]` from the operator's norm bound.
    pub fn from_norm_bound<O: Operator + ?Sized>(op: &O) -> Self {
        let nb = op.norm_bound();
        let lo = if op.is_nonnegative() { 0.0 } else { -nb };
        Self::new(lo, nb)
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lambda_max + self.lambda_min)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.lambda_max - self.lambda_min)
    }

    pub fn width(&self) -> f64 {
        self.lambda_max - self.lambda_min
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lambda_min..=self.lambda_max).contains(&x)
    }

    pub fn max_abs(&self) -> f64 {
        self.lambda_min.abs().max(self.lambda_max.abs())
    }
}

/// Settings for [`spectral_bounds_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsOptions {
    pub iteration_cap: usize,
    pub safety_margin: f64,
    pub seed: u64,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        Self { iteration_cap: 300, safety_margin: 0.05, seed: 0x5eed }
    }
}

pub fn spectral_bounds<O: Operator + ?Sized>(op: &O) -> SpectralBounds {
    spectral_bounds_with(op, BoundsOptions::default())
}

/// Extremal eigenvalues from a Lanczos run, inflated by
/// `safety_margin · width` and clipped to the rigorous norm bound.
///
/// Falls back to the norm bound when the extremes have not settled by the
/// iteration cap.
pub fn spectral_bounds_with<O: Operator + ?Sized>(op: &O, opts: BoundsOptions) -> SpectralBounds {
    let rigorous = SpectralBounds::from_norm_bound(op);
    let dim = op.dim();
    if dim == 0 || rigorous.width() == 0.0 {
        return rigorous;
    }
    let mut rng = SeedStreams::new(opts.seed).stream(Purpose::Lanczos, 0);
    let mut v = haar_from_rng(dim, &mut rng);
    let mut v_prev = PureState::zeros(dim);
    let mut w = PureState::zeros(dim);
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    let mut converged = false;
    let mut extremes = (0.0, 0.0);

    for k in 0..opts.iteration_cap.min(dim).max(1) {
        op.apply_into(v.amplitudes(), w.amplitudes_mut());
        if let Some(&b) = betas.last() {
            w.axpy(Complex64::new(-b, 0.0), &v_prev);
        }
        let a = v.dot(&w).re;
        w.axpy(Complex64::new(-a, 0.0), &v);
        alphas.push(a);
        let b = w.norm();
        let exhausted = b <= 1e-12 * rigorous.max_abs().max(1e-300) || k + 1 == dim;

        if exhausted || (k + 1) % 10 == 0 {
            extremes = tridiagonal_extremes(&alphas, &betas);
            let tol = 1e-7 * (extremes.1 - extremes.0).max(1e-300);
            if exhausted {
                converged = true;
                break;
            }
            if let Some((lo, hi)) = last {
                if (lo - extremes.0).abs() < tol && (hi - extremes.1).abs() < tol {
                    converged = true;
                    break;
                }
            }
            last = Some(extremes);
        }
        betas.push(b);
        std::mem::swap(&mut v_prev, &mut v);
        v = w.clone();
        v.scale(Complex64::new(1.0 / b, 0.0));
    }

    if !converged {
        warn!("Lanczos extremes did not settle within {} iterations; using the norm bound", opts.iteration_cap);
        return SpectralBounds { safety_margin: 0.0, ..rigorous };
    }
    let pad = opts.safety_margin * (extremes.1 - extremes.0).max(1e-12 * rigorous.max_abs());
    SpectralBounds {
        lambda_min: (extremes.0 - pad).max(rigorous.lambda_min),
        lambda_max: (extremes.1 + pad).min(rigorous.lambda_max),
        safety_margin: opts.safety_margin,
    }
}

fn tridiagonal_extremes(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let n = alphas.len();
    let mut t = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        t[(i, i)] = alphas[i];
        if i + 1 < n {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let ev = t.symmetric_eigenvalues();
    let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

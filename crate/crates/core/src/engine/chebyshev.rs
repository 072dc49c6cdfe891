//! Chebyshev series of Hermitian operators applied to states.

use num_complex::Complex64;

use super::bounds::SpectralBounds;
use super::state::PureState;
use crate::error::{Error, Result};
use crate::exec;
use crate::model::Operator;

/// Computes `Σ_k c_k T_k(H̃) ψ` with `H̃ = (op − center) / half_width`, using
/// the three-term recurrence. Costs `coeffs.len() − 1` operator applications.
pub fn chebyshev_series<O: Operator + ?Sized>(
    op: &O,
    bounds: &SpectralBounds,
    coeffs: &[Complex64],
    psi: &PureState,
) -> Result<PureState> {
    if op.dim() != psi.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: psi.dim() });
    }
    let dim = psi.dim();
    let mut acc = PureState::zeros(dim);
    if coeffs.is_empty() {
        return Ok(acc);
    }
    acc.axpy(coeffs[0], psi);
    if coeffs.len() == 1 {
        return Ok(acc);
    }
    let center = bounds.center();
    let inv_hw = if bounds.half_width() > 0.0 { 1.0 / bounds.half_width() } else { 0.0 };
    let limit = 100.0 * psi.norm_sqr().max(f64::MIN_POSITIVE);

    // t_prev = T_{k-1} ψ, t_cur = T_k ψ
    let mut t_prev = psi.clone();
    let mut t_cur = PureState::zeros(dim);
    op.apply_into(psi.amplitudes(), t_cur.amplitudes_mut());
    rescale(t_cur.amplitudes_mut(), psi.amplitudes(), center, inv_hw, 1.0, None);
    acc.axpy(coeffs[1], &t_cur);

    let mut t_next = PureState::zeros(dim);
    for (k, &c) in coeffs.iter().enumerate().skip(2) {
        op.apply_into(t_cur.amplitudes(), t_next.amplitudes_mut());
        rescale(
            t_next.amplitudes_mut(),
            t_cur.amplitudes(),
            center,
            inv_hw,
            2.0,
            Some(t_prev.amplitudes()),
        );
        acc.axpy(c, &t_next);
        std::mem::swap(&mut t_prev, &mut t_cur);
        std::mem::swap(&mut t_cur, &mut t_next);
        if k % 16 == 0 && t_cur.norm_sqr() > limit {
            return Err(Error::BoundViolation { term: k, lo: bounds.lambda_min, hi: bounds.lambda_max });
        }
    }
    Ok(acc)
}

/// `out ← factor · (out − center·cur) · inv_hw − prev`.
fn rescale(
    out: &mut [Complex64],
    cur: &[Complex64],
    center: f64,
    inv_hw: f64,
    factor: f64,
    prev: Option<&[Complex64]>,
) {
    let s = factor * inv_hw;
    exec::for_each_chunk_mut(out, |c, chunk| {
        let off = c * exec::CHUNK;
        let cur = &cur[off..off + chunk.len()];
        match prev {
            Some(prev) => {
                let prev = &prev[off..off + chunk.len()];
                for ((o, x), p) in chunk.iter_mut().zip(cur).zip(prev) {
                    *o = (*o - x * center) * s - p;
                }
            }
            None => {
                for (o, x) in chunk.iter_mut().zip(cur) {
                    *o = (*o - x * center) * s;
                }
            }
        }
    });
}

/// Bessel functions `J_0(x) … J_n(x)` for `x ≥ 0` by Miller's backward
/// recurrence, normalized with `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_sequence(x: f64, n: usize) -> Vec<f64> {
    assert!(x >= 0.0 && x.is_finite());
    let mut out = vec![0.0; n + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let top = n.max(x.ceil() as usize);
    let mut start = top + 20 + (40.0 * top as f64).sqrt() as usize;
    start += start % 2;
    let mut j_next = 0.0;
    let mut j_cur = 1e-300;
    let mut norm = 0.0;
    let mut tail = vec![0.0; n + 1];
    for k in (1..=start).rev() {
        let j_prev = 2.0 * k as f64 / x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        // j_cur now holds J_{k-1}
        let idx = k - 1;
        if idx <= n {
            tail[idx] = j_cur;
        }
        if idx % 2 == 0 && idx > 0 {
            norm += 2.0 * j_cur;
        }
        if j_cur.abs() > 1e250 {
            j_cur *= 1e-250;
            j_next *= 1e-250;
            norm *= 1e-250;
            tail.iter_mut().for_each(|t| *t *= 1e-250);
        }
    }
    norm += j_cur;
    for (o, t) in out.iter_mut().zip(&tail) {
        *o = t / norm;
    }
    out
}

/// Coefficients of `e^{−i op τ}` in Chebyshev polynomials of the rescaled
/// operator, truncated once `|J_k(a τ)|` drops below `tol` past `k = a τ`.
/// The global phase `e^{−i center τ}` is folded in.
pub fn propagator_coefficients(bounds: &SpectralBounds, tau: f64, tol: f64) -> Vec<Complex64> {
    let x = bounds.half_width() * tau.abs();
    let guess = (x + 10.0 * x.cbrt() + 40.0).ceil() as usize;
    let j = bessel_j_sequence(x, guess);
    let mut order = x.floor() as usize + 1;
    for k in (x.floor() as usize..j.len()).rev() {
        if j[k].abs() >= tol {
            order = k + 1;
            break;
        }
    }
    let phase = Complex64::from_polar(1.0, -bounds.center() * tau);
    // (−i)^k for τ > 0; time reversal conjugates.
    let unit = if tau >= 0.0 { Complex64::new(0.0, -1.0) } else { Complex64::new(0.0, 1.0) };
    let mut pow = Complex64::new(1.0, 0.0);
    (0..order.max(1))
        .map(|k| {
            let c = if k == 0 { j[0] } else { 2.0 * j[k] };
            let out = phase * pow * c;
            pow *= unit;
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bessel_series(k: usize, x: f64) -> f64 {
        // Σ_m (−1)^m (x/2)^{2m+k} / (m! (m+k)!)
        let mut term = (0..k).fold(1.0, |acc, i| acc * (x / 2.0) / (i + 1) as f64);
        let mut sum = term;
        for m in 1..80 {
            term *= -(x / 2.0) * (x / 2.0) / (m as f64 * (m + k) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn bessel_matches_power_series() {
        for &x in &[0.1, 1.0, 3.0, 5.0] {
            let seq = bessel_j_sequence(x, 12);
            for (k, v) in seq.iter().enumerate() {
                assert!((v - bessel_series(k, x)).abs() < 1e-13, "J_{k}({x})");
            }
        }
    }

    #[test]
    fn bessel_sum_rule_at_large_argument() {
        let x = 150.0;
        let seq = bessel_j_sequence(x, 220);
        let s: f64 = seq[0] * seq[0] + 2.0 * seq[1..].iter().map(|v| v * v).sum::<f64>();
        assert!((s - 1.0).abs() < 1e-12);
        // J_0(1) reference
        assert!((bessel_j_sequence(1.0, 0)[0] - 0.765_197_686_557_966_6).abs() < 1e-15);
    }
}

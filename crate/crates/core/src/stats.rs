//! Small statistics toolkit: compensated sums, sample errors, jackknife and
//! ordinary least squares on a line.

use serde::{Deserialize, Serialize};

/// Neumaier-compensated sum in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// An estimate together with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }

    /// Whether `other` lies within `k` standard errors of this estimate.
    pub fn agrees_with(&self, other: f64, k: f64) -> bool {
        (self.value - other).abs() <= k * self.stderr
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> Estimate {
    let n = values.len();
    let m = mean(values);
    if n < 2 {
        return Estimate { value: m, stderr: f64::NAN };
    }
    let var = compensated_sum(values.iter().map(|v| (v - m) * (v - m))) / (n - 1) as f64;
    Estimate { value: m, stderr: (var / n as f64).sqrt() }
}

/// Delete-one jackknife of a statistic that is a function of column means.
///
/// `rows[s]` holds the per-sample raw values; `f` maps a vector of column
/// means to the statistic.
pub fn jackknife<F>(rows: &[Vec<f64>], f: F) -> Estimate
where
    F: Fn(&[f64]) -> f64,
{
    let n = rows.len();
    assert!(n > 0, "jackknife needs at least one sample");
    let width = rows[0].len();
    let totals: Vec<f64> = (0..width)
        .map(|j| compensated_sum(rows.iter().map(|r| r[j])))
        .collect();
    let full: Vec<f64> = totals.iter().map(|t| t / n as f64).collect();
    let value = f(&full);
    if n < 2 {
        return Estimate { value, stderr: f64::NAN };
    }
    let leave_out: Vec<f64> = rows
        .iter()
        .map(|r| {
            let means: Vec<f64> = (0..width)
                .map(|j| (totals[j] - r[j]) / (n - 1) as f64)
                .collect();
            f(&means)
        })
        .collect();
    let m = mean(&leave_out);
    let ss = compensated_sum(leave_out.iter().map(|v| (v - m) * (v - m)));
    Estimate { value, stderr: ((n - 1) as f64 / n as f64 * ss).sqrt() }
}

/// Least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    pub slope_stderr: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let sxx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr = compensated_sum(
        x.iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2)),
    );
    let slope_stderr = if x.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    LineFit { slope, intercept, residual: (ssr / n).sqrt(), slope_stderr }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn jackknife_of_mean_equals_standard_error() {
        let xs = [1.0, 2.5, 3.0, 7.0, -1.0];
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let jk = jackknife(&rows, |m| m[0]);
        let se = mean_stderr(&xs);
        assert!((jk.value - se.value).abs() < 1e-14);
        assert!((jk.stderr - se.stderr).abs() < 1e-12);
    }

    #[test]
    fn line_fit_is_exact_on_a_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let fit = fit_line(&x, &y);
        assert!((fit.slope + 0.5).abs() < 1e-14);
        assert!((fit.intercept - 2.0).abs() < 1e-14);
        assert!(fit.residual < 1e-14);
    }
}

//! Small summaries used to check simulated statistics against their limits.

use crate::error::{Error, Result};
use crate::normal;

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

/// Pearson correlation; zero when either input is constant.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Normal QQ pairs `(Φ⁻¹((i − ½)/R), v_(i))`, sorted by the sample value.
pub fn qq_data(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.len() < 10 {
        return Err(Error::domain(format!("QQ data needs at least 10 values, got {}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("QQ data needs finite values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let r = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| (normal::quantile((i as f64 + 0.5) / r), v))
        .collect())
}

/// Correlation of the normal QQ pairs.
pub fn qq_correlation(values: &[f64]) -> Result<f64> {
    let pairs = qq_data(values)?;
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(correlation(&x, &y))
}

/// One-sample Kolmogorov–Smirnov statistic `sup |F_R − F|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let r = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / r).max((i as f64 + 1.0) / r - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the KS statistic `d` from `r` observations, with
/// Stephens' small-sample adjustment of the argument.
pub fn ks_pvalue(d: f64, r: usize) -> f64 {
    let sr = (r as f64).sqrt();
    let lambda = (sr + 0.12 + 0.11 / sr) * d;
    if lambda < 0.3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// KS test of `values` against `cdf`: `(statistic, p-value)`.
pub fn ks_test<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> (f64, f64) {
    let d = ks_statistic(values, cdf);
    (d, ks_pvalue(d, values.len()))
}

/// Rejection frequency with its binomial standard error.
pub fn rejection_rate(rejections: usize, total: usize) -> (f64, f64) {
    if total == 0 {
        return (f64::NAN, f64::NAN);
    }
    let f = rejections as f64 / total as f64;
    (f, (f * (1.0 - f) / total as f64).sqrt())
}

//! Univariate and bivariate standard normal distribution functions.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI, SQRT_2};

use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::quadrature::integrate_adaptive;

/// Standard normal CDF `Φ(x)`.
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal upper tail `1 − Φ(x)`, accurate far into the tail.
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal quantile `Φ⁻¹(p)` for `p ∈ (0, 1)`.
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    // One Halley step against the more accurate CDF.
    let e = if x < 0.0 { cdf(x) - p } else { (1.0 - p) - sf(x) };
    let u = e / pdf(x);
    x - u / (1.0 + 0.5 * x * u)
}

/// `P(U ≤ x, V ≤ x)` for a standard bivariate normal pair with correlation `rho`.
///
/// Uses the Plackett identity `∂P/∂ρ = φ₂(x, x; ρ)` integrated from the
/// independent case, with `r = sin θ` to remove the `1/√(1−r²)` singularity:
///
/// ```text
/// P(x, ρ) = Φ(x)² + (1/2π) ∫_0^{asin ρ} exp(−x² / (1 + sin θ)) dθ
/// ```
pub fn bvn_orthant_cdf(x: f64, rho: f64) -> Result<f64> {
    if !(rho.is_finite() && rho.abs() < 1.0) {
        return Err(Error::domain(format!("correlation {rho} must satisfy |rho| < 1")));
    }
    if x.is_nan() {
        return Err(Error::domain("x is NaN"));
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    if x == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if rho < 0.0 && x < 0.0 {
        // Start from ρ = −1, where the orthant is empty for x < 0, so every
        // term is positive.
        let x2 = x * x;
        let v = integrate_adaptive(|t| (-x2 / (1.0 + t.sin())).exp(), -FRAC_PI_2, rho.asin(), 1e-300)
            / (2.0 * PI);
        return Ok(v.clamp(0.0, 1.0));
    }
    let base = cdf(x);
    let correction = orthant_correction(x, rho);
    Ok((base * base + correction).clamp(0.0, 1.0))
}

/// `1 − P(U ≤ x, V ≤ x)`, computed without cancellation for large `x`.
pub fn bvn_orthant_sf(x: f64, rho: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(1.0 - bvn_orthant_cdf(x, rho)?);
    }
    // P(U > x or V > x) = 2 P(U > x) − P(U > x, V > x), and the last term is
    // the orthant probability at −x by symmetry.
    let both = bvn_orthant_cdf(-x, rho)?;
    Ok((2.0 * sf(x) - both).clamp(0.0, 1.0))
}

fn orthant_correction(x: f64, rho: f64) -> f64 {
    let upper = rho.asin();
    if upper == 0.0 {
        return 0.0;
    }
    let x2 = x * x;
    integrate_adaptive(|t| (-x2 / (1.0 + t.sin())).exp(), 0.0, upper, 1e-15) / (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_fixed;

    /// Conditioning on U: P(U ≤ x, V ≤ x) = ∫_{-∞}^x φ(u) Φ((x − ρu)/√(1−ρ²)) du.
    fn conditional_oracle(x: f64, rho: f64) -> f64 {
        let s = (1.0 - rho * rho).sqrt();
        let lo = -40.0;
        let mut total = 0.0;
        let panels = 400;
        let h = (x - lo) / panels as f64;
        for k in 0..panels {
            let a = lo + k as f64 * h;
            total += integrate_fixed(|u| pdf(u) * cdf((x - rho * u) / s), a, a + h, 16);
        }
        total
    }

    #[test]
    fn normal_cdf_and_quantile() {
        assert_eq!(cdf(0.0), 0.5);
        assert!((cdf(1.959963984540054) - 0.975).abs() < 1e-15);
        assert!((quantile(0.975) - 1.959963984540054).abs() < 1e-14);
        assert!((quantile(0.05) + 1.6448536269514722).abs() < 1e-12);
        for &p in &[1e-10, 0.001, 0.3, 0.5, 0.9, 0.999999] {
            assert!((cdf(quantile(p)) - p).abs() < 1e-12 * p.max(1e-3));
        }
        assert!((sf(10.0) / 7.619853024160527e-24 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthant_probability_at_zero() {
        assert!((bvn_orthant_cdf(0.0, 0.0).unwrap() - 0.25).abs() < 1e-15);
        let v = bvn_orthant_cdf(0.0, 0.5).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-14);
        for &r in &[-0.9, -0.3, 0.2, 0.7, 0.99] {
            let v = bvn_orthant_cdf(0.0, r).unwrap();
            assert!((v - (0.25 + f64::asin(r) / (2.0 * PI))).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_conditional_integral() {
        for &x in &[-3.0, -1.2, 0.0, 0.4, 1.5, 2.5, 4.0] {
            for &r in &[-0.8, -0.2, 0.0, 0.3, 0.86158, 0.95] {
                let a = bvn_orthant_cdf(x, r).unwrap();
                let b = conditional_oracle(x, r);
                assert!((a - b).abs() < 1e-10, "x={x} rho={r}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn orthant_limits_and_errors() {
        assert!((bvn_orthant_cdf(40.0, 0.6).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(bvn_orthant_cdf(f64::INFINITY, 0.6).unwrap(), 1.0);
        assert!(bvn_orthant_cdf(0.0, 1.0).is_err());
        assert!(bvn_orthant_cdf(0.0, -1.0).is_err());
        let tail = bvn_orthant_sf(10.0, 0.6).unwrap();
        assert!(tail > 0.0 && tail < 1e-10);
        let direct = 1.0 - bvn_orthant_cdf(1.0, 0.6).unwrap();
        assert!((bvn_orthant_sf(1.0, 0.6).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn orthant_monotone_in_x_and_rho() {
        let xs: Vec<f64> = (0..41).map(|i| -4.0 + 0.2 * i as f64).collect();
        let rs: Vec<f64> = (0..19).map(|i| -0.9 + 0.1 * i as f64).collect();
        for &r in &rs {
            for w in xs.windows(2) {
                assert!(bvn_orthant_cdf(w[1], r).unwrap() >= bvn_orthant_cdf(w[0], r).unwrap());
            }
        }
        for &x in &xs {
            for w in rs.windows(2) {
                assert!(bvn_orthant_cdf(x, w[1]).unwrap() >= bvn_orthant_cdf(x, w[0]).unwrap() - 1e-16);
            }
        }
    }
}

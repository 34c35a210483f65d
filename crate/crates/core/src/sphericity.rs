//! Sphericity tests built on spectral moments (`T1`, `T2`, `Tm`) and on the
//! log linear spectral statistic against a spiked alternative (`T_LR`, `T̃_LR`).

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mp_law::log_integral;
use crate::normal;
use crate::spectral::{alpha_estimators, spatial_sign, SpectralSample};

/// Margin kept between `s` and its upper bound `s̄`.
pub const S_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestKind {
    T1,
    T2,
    Tm,
    #[serde(rename = "TLR")]
    Tlr,
    #[serde(rename = "TLR_tilde")]
    TlrTilde,
}

impl TestKind {
    pub const ALL: [TestKind; 5] = [TestKind::T1, TestKind::T2, TestKind::Tm, TestKind::Tlr, TestKind::TlrTilde];

    pub fn name(self) -> &'static str {
        match self {
            TestKind::T1 => "T1",
            TestKind::T2 => "T2",
            TestKind::Tm => "Tm",
            TestKind::Tlr => "TLR",
            TestKind::TlrTilde => "TLR_tilde",
        }
    }

    /// Whether the statistic is computed from spatial-sign data.
    pub fn uses_spatial_sign(self) -> bool {
        !matches!(self, TestKind::TlrTilde)
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "t1" => Ok(TestKind::T1),
            "t2" => Ok(TestKind::T2),
            "tm" => Ok(TestKind::Tm),
            "tlr" => Ok(TestKind::Tlr),
            "tlr-tilde" => Ok(TestKind::TlrTilde),
            other => Err(Error::input(format!("unknown test '{other}'"))),
        }
    }
}

/// `(T1, T2) = (α̌_2 − 1, α̌_4 − 1)`.
pub fn t1_t2(alpha2_hat: f64, alpha4_hat: f64) -> (f64, f64) {
    (alpha2_hat - 1.0, alpha4_hat - 1.0)
}

/// Limiting null law of `(nT1, nT2)`: mean `μ` and covariance `ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct T1T2Null {
    pub mu: [f64; 2],
    pub omega: [[f64; 2]; 2],
}

pub fn null_params_t1t2(c: f64) -> Result<T1T2Null> {
    check_c(c)?;
    Ok(T1T2Null {
        mu: [-1.0, -6.0 + c],
        omega: [[4.0, 24.0], [24.0, omega22(c)]],
    })
}

fn omega22(c: f64) -> f64 {
    8.0 * (18.0 + 12.0 * c + c * c)
}

fn check_c(c: f64) -> Result<()> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("ratio c must be positive, got {c}")))
    }
}

/// The larger of the two standardized null scores of `nT1` and `nT2`.
pub fn tm_statistic(t1: f64, t2: f64, n: usize, c_n: f64) -> f64 {
    let nf = n as f64;
    let z1 = (nf * t1 + 1.0) / 2.0;
    let z2 = (nf * t2 + 6.0 - c_n) / omega22(c_n).sqrt();
    z1.max(z2)
}

/// Correlation `6/√(2(18 + 12c + c²))` of the two standardized scores.
pub fn tm_rho(c: f64) -> f64 {
    6.0 / (2.0 * (18.0 + 12.0 * c + c * c)).sqrt()
}

/// `1 − P(U ≤ tm, V ≤ tm)` under the limiting bivariate normal null.
pub fn tm_pvalue(tm: f64, c: f64) -> Result<f64> {
    check_c(c)?;
    normal::bvn_orthant_sf(tm, tm_rho(c))
}

/// `z(s) = (1 + s)(c + s)/s`.
pub fn z_of_s(c: f64, s: f64) -> f64 {
    (1.0 + s) * (c + s) / s
}

/// `∫ ln(z(s) − x) dF^{B}(x) − ∫ ln(z(s) − x) dF^{c_n, δ_1}(x)`; not yet multiplied by `p`.
fn log_lss_statistic(spectrum: &SpectralSample, s: f64) -> Result<f64> {
    let c_n = spectrum.ratio();
    let upper = c_n.sqrt();
    if !(s > 0.0 && s < upper - S_MARGIN) {
        return Err(Error::domain(format!("s = {s} must lie in (0, {upper}) for c_n = {c_n}")));
    }
    let z = z_of_s(c_n, s);
    let lambda_max = spectrum.max();
    if z <= lambda_max {
        return Err(Error::AboveSupport { z, lambda_max });
    }
    let sample = spectrum.lss(|x| (z - x).ln())?;
    Ok(sample - log_integral(c_n, z)?)
}

/// `T_LR(s)` from the spectrum of the spatial-sign covariance `Č B_n`.
pub fn tlr_statistic(s_check: &SpectralSample, s: f64) -> Result<f64> {
    log_lss_statistic(s_check, s)
}

/// `T̃_LR(s)` from the spectrum of the raw sample covariance `B_n` (σ = 1 known).
pub fn tlr_tilde_statistic(b_n: &SpectralSample, s: f64) -> Result<f64> {
    log_lss_statistic(b_n, s)
}

/// `−ln(1 − x) − x`, by its series where the direct form cancels.
fn neg_log1m_minus_x(x: f64) -> f64 {
    if x < 0.1 {
        let mut term = x;
        let mut sum = 0.0;
        for k in 2..60 {
            term *= x;
            let add = term / k as f64;
            sum += add;
            if add < 1e-18 * sum {
                break;
            }
        }
        sum
    } else {
        -(-x).ln_1p() - x
    }
}

/// Upper bound of `s`: `√c` when `h ≤ √c`, else `c/h`.
pub fn s_bar(c: f64, h: f64) -> f64 {
    let r = c.sqrt();
    if h <= r {
        r
    } else {
        c / h
    }
}

/// Null mean and variance `(μ_s, σ_s²)` of `p T_LR(s)`.
pub fn tlr_null_params(c: f64, s: f64) -> Result<(f64, f64)> {
    // The spatial sign leaves a deterministic radius, i.e. τ = 0.
    tlr_tilde_params(c, s, 0.0, 0.0)
}

/// Mean and variance `(μ̃_s(h), σ̃_s²)` of `p T̃_LR(s)` under spike strength `h`.
pub fn tlr_tilde_params(c: f64, s: f64, h: f64, tau: f64) -> Result<(f64, f64)> {
    check_c(c)?;
    if !(h.is_finite() && h >= 0.0) {
        return Err(Error::domain(format!("spike strength h must be >= 0, got {h}")));
    }
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::domain(format!("tau must be >= 0, got {tau}")));
    }
    let bound = s_bar(c, h);
    if !(s > 0.0 && s < bound - S_MARGIN) {
        return Err(Error::domain(format!("s = {s} must lie in (0, {bound}) for c = {c}, h = {h}")));
    }
    let x = s * s / c;
    let shift = s * h / c;
    if shift >= 1.0 {
        return Err(Error::domain(format!("s h / c = {shift} must be below 1")));
    }
    let r = neg_log1m_minus_x(x);
    let mu = -0.5 * r + (0.5 - 0.5 * tau) * x + (-shift).ln_1p();
    let sigma2 = 2.0 * r + tau * x;
    if !(sigma2 > 0.0) {
        return Err(Error::domain(format!("variance {sigma2} is not positive at s = {s}")));
    }
    Ok((mu, sigma2))
}

/// Power `Φ(Φ⁻¹(α) − (μ̃_s(h₀) − μ̃_s(0))/σ̃_s)` of the left-tailed `T̃_LR(s)` test.
pub fn tlr_power(c: f64, s: f64, h0: f64, tau: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(h0 > 0.0) {
        return Err(Error::domain(format!("alternative h0 must be > 0, got {h0}")));
    }
    let (_, sigma2) = tlr_tilde_params(c, s, h0, tau)?;
    let gap = (-s * h0 / c).ln_1p();
    Ok(normal::cdf(normal::quantile(alpha) - gap / sigma2.sqrt()))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("level alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Settings shared by every test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub alpha: f64,
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub digest: Option<String>,
}

impl TestConfig {
    pub fn new(alpha: f64) -> Self {
        TestConfig {
            alpha,
            s: None,
            tau: None,
            seed: None,
            digest: None,
        }
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = Some(s);
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = Some(tau);
        self
    }
}

/// Null distribution of the reported statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum NullLaw {
    /// Reject for large values.
    NormalUpper { mean: f64, variance: f64 },
    /// Reject for small values.
    NormalLower { mean: f64, variance: f64 },
    /// Maximum of two standard normals with correlation `rho`.
    MaxBivariateNormal { rho: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub p: usize,
    pub n: usize,
    pub c_n: f64,
    pub s: Option<f64>,
    pub tau: Option<f64>,
    pub seed: Option<u64>,
    pub digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: TestKind,
    pub statistic: f64,
    pub null: NullLaw,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub meta: ReportMeta,
}

impl TestReport {
    fn assemble(test: TestKind, statistic: f64, null: NullLaw, p_value: f64, spectrum: &SpectralSample, cfg: &TestConfig) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestReport {
            test,
            statistic,
            null,
            p_value,
            alpha: cfg.alpha,
            reject: p_value < cfg.alpha,
            meta: ReportMeta {
                p: spectrum.p(),
                n: spectrum.n(),
                c_n: spectrum.ratio(),
                s: cfg.s,
                tau: cfg.tau,
                seed: cfg.seed,
                digest: cfg.digest.clone(),
            },
        }
    }
}

fn required(value: Option<f64>, what: &str, test: TestKind) -> Result<f64> {
    value.ok_or_else(|| Error::input(format!("test {test} needs a value for {what}")))
}

/// Run `test` on a spectrum already prepared for it: the spatial-sign
/// covariance `Č B_n` for T1, T2, Tm and TLR, the raw `B_n` for TLR_tilde.
pub fn run_test_on_spectrum(test: TestKind, spectrum: &SpectralSample, cfg: &TestConfig) -> Result<TestReport> {
    check_alpha(cfg.alpha)?;
    let n = spectrum.n();
    let nf = n as f64;
    let pf = spectrum.p() as f64;
    let c_n = spectrum.ratio();
    let report = match test {
        TestKind::T1 | TestKind::T2 | TestKind::Tm => {
            let (a2, a4) = alpha_estimators(spectrum)?;
            let (t1, t2) = t1_t2(a2, a4);
            let null = null_params_t1t2(c_n)?;
            match test {
                TestKind::T1 => {
                    let (mean, variance) = (null.mu[0], null.omega[0][0]);
                    let stat = nf * t1;
                    let p = normal::sf((stat - mean) / variance.sqrt());
                    TestReport::assemble(test, stat, NullLaw::NormalUpper { mean, variance }, p, spectrum, cfg)
                }
                TestKind::T2 => {
                    let (mean, variance) = (null.mu[1], null.omega[1][1]);
                    let stat = nf * t2;
                    let p = normal::sf((stat - mean) / variance.sqrt());
                    TestReport::assemble(test, stat, NullLaw::NormalUpper { mean, variance }, p, spectrum, cfg)
                }
                _ => {
                    let tm = tm_statistic(t1, t2, n, c_n);
                    let p = tm_pvalue(tm, c_n)?;
                    TestReport::assemble(test, tm, NullLaw::MaxBivariateNormal { rho: tm_rho(c_n) }, p, spectrum, cfg)
                }
            }
        }
        TestKind::Tlr => {
            let s = required(cfg.s, "s", test)?;
            let stat = pf * tlr_statistic(spectrum, s)?;
            let (mean, variance) = tlr_null_params(c_n, s)?;
            let p = normal::cdf((stat - mean) / variance.sqrt());
            TestReport::assemble(test, stat, NullLaw::NormalLower { mean, variance }, p, spectrum, cfg)
        }
        TestKind::TlrTilde => {
            let s = required(cfg.s, "s", test)?;
            let tau = required(cfg.tau, "tau", test)?;
            let stat = pf * tlr_tilde_statistic(spectrum, s)?;
            let (mean, variance) = tlr_tilde_params(c_n, s, 0.0, tau)?;
            let p = normal::cdf((stat - mean) / variance.sqrt());
            TestReport::assemble(test, stat, NullLaw::NormalLower { mean, variance }, p, spectrum, cfg)
        }
    };
    Ok(report)
}

/// Spectrum a test is computed from, for a `p × n` data matrix with
/// observations as columns.
pub fn test_spectrum(test: TestKind, x: &DMatrix<f64>) -> Result<SpectralSample> {
    if test.uses_spatial_sign() {
        SpectralSample::from_data(&spatial_sign(x)?)
    } else {
        SpectralSample::from_data(x)
    }
}

/// Run `test` on raw data.
pub fn run_test(test: TestKind, x: &DMatrix<f64>, cfg: &TestConfig) -> Result<TestReport> {
    run_test_on_spectrum(test, &test_spectrum(test, x)?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_stream, Purpose};
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(p: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut r = derive_stream(seed, Purpose::Oracle, 0);
        DMatrix::from_fn(p, n, |_, _| StandardNormal.sample(&mut r))
    }

    #[test]
    fn t1_t2_examples() {
        assert_eq!(t1_t2(1.0, 1.0), (0.0, 0.0));
        let (a, b) = t1_t2(1.2, 2.0);
        assert!((a - 0.2).abs() < 1e-15 && b == 1.0);
    }

    #[test]
    fn null_param_examples() {
        let n = null_params_t1t2(0.5).unwrap();
        assert_eq!(n.mu, [-1.0, -5.5]);
        assert_eq!(n.omega, [[4.0, 24.0], [24.0, 194.0]]);
        assert_eq!(null_params_t1t2(1.0).unwrap().omega[1][1], 248.0);
        assert!(null_params_t1t2(0.0).is_err());
    }

    #[test]
    fn tm_examples() {
        let n = 100;
        let c = 0.5;
        assert_eq!(tm_statistic(-1.0 / n as f64, (c - 6.0) / n as f64, n, c), 0.0);
        assert_eq!(tm_statistic(3.0 / n as f64, (c - 6.0) / n as f64, n, c), 2.0);
        let v = tm_statistic(-1.0 / n as f64, 10.0 / n as f64, n, c);
        assert!((v - 15.5 / 194f64.sqrt()).abs() < 1e-12);
        assert!((v - 1.112835145857494).abs() < 1e-12);
    }

    #[test]
    fn tm_pvalue_examples() {
        assert!((tm_rho(0.5) - 0.8615497903412858).abs() < 1e-15);
        assert!((tm_rho(2.0) - 0.6255432421712244).abs() < 1e-15);
        let p = tm_pvalue(0.0, 0.5).unwrap();
        let exact = 1.0 - (0.25 + tm_rho(0.5).asin() / (2.0 * std::f64::consts::PI));
        assert!((p - exact).abs() < 1e-12);
        assert!((p - 0.5847471079616744).abs() < 1e-12);
        assert!(tm_pvalue(10.0, 0.5).unwrap() < 1e-10);
    }

    #[test]
    fn rho_is_decreasing_in_c() {
        let rs: Vec<f64> = (1..=1000).map(|i| tm_rho(0.01 * i as f64)).collect();
        assert!(rs.iter().all(|&r| r > 0.0 && r < 1.0));
        assert!(rs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn tlr_null_examples() {
        let (mu, s2) = tlr_null_params(1.0, 0.5).unwrap();
        assert!((mu - (0.5 * 0.75f64.ln() + 0.25)).abs() < 1e-15);
        assert!((s2 - (-2.0 * 0.75f64.ln() - 0.5)).abs() < 1e-15);
        assert!((mu - 0.10616).abs() < 1e-5 && (s2 - 0.07536).abs() < 1e-5);
        let (_, s2) = tlr_null_params(0.25, 0.49).unwrap();
        assert!(s2.is_finite() && s2 > 0.0);
        assert!(tlr_null_params(0.25, 0.5).is_err());
        assert!(tlr_null_params(1.0, 0.0).is_err());
    }

    #[test]
    fn tlr_null_small_s_expansion() {
        // σ² = c⁻²s⁴ + O(s⁶), μ = c⁻¹s²/2 + O(s⁴)
        let c = 0.8;
        for s in [1e-2, 1e-3, 1e-4] {
            let (mu, s2) = tlr_null_params(c, s).unwrap();
            let x: f64 = s * s / c;
            assert!((s2 / (x * x) - 1.0).abs() < 2.0 * x, "s={s}");
            assert!((mu / (0.5 * x) - 1.0).abs() < 2.0 * x, "s={s}");
        }
    }

    #[test]
    fn tilde_params_examples() {
        let (mu, s2) = tlr_tilde_params(1.0, 0.5, 0.3, 0.0).unwrap();
        let direct = 0.5 * 0.75f64.ln() + 0.25 + 0.85f64.ln();
        assert!((mu - direct).abs() < 1e-15);
        assert!((mu + 0.05635996572366539).abs() < 1e-14);
        assert!((s2 - 0.07536).abs() < 1e-5);
        // τ = 2, h = 0: the Gaussian raw-data null
        let (mu, s2) = tlr_tilde_params(0.5, 0.3, 0.0, 2.0).unwrap();
        let x: f64 = 0.09 / 0.5;
        assert!((mu - 0.5 * (1.0 - x).ln()).abs() < 1e-15);
        assert!((s2 + 2.0 * (1.0 - x).ln()).abs() < 1e-15);
        assert!(tlr_tilde_params(1.0, 0.5, 3.0, 2.0).is_err());
        assert!(tlr_tilde_params(1.0, 0.3, 3.0, 2.0).is_ok());
    }

    #[test]
    fn tilde_at_tau_zero_is_the_spatial_sign_null() {
        for c in [0.25, 0.5, 1.0, 2.0] {
            for s in [0.01, 0.1, 0.3, 0.45] {
                assert_eq!(tlr_tilde_params(c, s, 0.0, 0.0).unwrap(), tlr_null_params(c, s).unwrap());
            }
        }
    }

    #[test]
    fn power_limits() {
        let p = tlr_power(1.0, 0.3, 1e-9, 2.0, 0.05).unwrap();
        assert!((p - 0.05).abs() < 1e-6);
        let near_zero = tlr_power(1.0, 0.01, 0.3, 0.0, 0.05).unwrap();
        let at_h = tlr_power(1.0, 0.3, 0.3, 0.0, 0.05).unwrap();
        assert!(near_zero > at_h && near_zero > 0.99);
        assert!(tlr_power(1.0, 0.3, 0.3, 2.0, 1.0).is_err());
    }

    #[test]
    fn power_peaks_at_h0_for_gaussian_tau() {
        for h0 in [0.2, 0.4] {
            let grid: Vec<f64> = (1..100).map(|i| 0.01 * i as f64).collect();
            let best = grid
                .iter()
                .copied()
                .max_by(|a, b| {
                    let pa = tlr_power(1.0, *a, h0, 2.0, 0.05).unwrap();
                    let pb = tlr_power(1.0, *b, h0, 2.0, 0.05).unwrap();
                    pa.total_cmp(&pb)
                })
                .unwrap();
            assert!((best - h0).abs() <= 0.01 + 1e-12, "h0={h0} best={best}");
        }
    }

    #[test]
    fn tlr_statistic_behaviour() {
        let x = gaussian(20, 80, 1);
        let spec = SpectralSample::from_data(&spatial_sign(&x).unwrap()).unwrap();
        let a = tlr_statistic(&spec, 1e-3).unwrap();
        let b = tlr_statistic(&spec, 1e-4).unwrap();
        assert!(a.abs() < 1e-2 && b.abs() < a.abs() / 5.0);
        assert!(tlr_statistic(&spec, 0.6).is_err());
        // a spectrum whose top eigenvalue exceeds z(s)
        let mut ev = vec![1.0; 20];
        ev[19] = 100.0;
        let big = SpectralSample::from_eigenvalues(ev, 80).unwrap();
        assert!(matches!(tlr_statistic(&big, 0.4), Err(Error::AboveSupport { .. })));
    }

    #[test]
    fn reports_are_complete_and_consistent() {
        let x = gaussian(30, 60, 2);
        let cfg = TestConfig::new(0.05).with_s(0.3).with_tau(2.0);
        for test in TestKind::ALL {
            let r = run_test(test, &x, &cfg).unwrap();
            assert!((0.0..=1.0).contains(&r.p_value));
            assert_eq!(r.reject, r.p_value < 0.05);
            assert_eq!((r.meta.p, r.meta.n, r.meta.c_n), (30, 60, 0.5));
            assert_eq!(run_test(test, &x, &cfg).unwrap(), r);
            let json = serde_json::to_value(&r).unwrap();
            for key in ["test", "statistic", "null", "p_value", "alpha", "reject", "meta"] {
                assert!(json.get(key).is_some(), "{key}");
            }
        }
        let r = run_test(TestKind::T1, &x, &cfg).unwrap();
        assert_eq!(r.null, NullLaw::NormalUpper { mean: -1.0, variance: 4.0 });
        assert!(run_test(TestKind::Tlr, &x, &TestConfig::new(0.05)).is_err());
        assert!(run_test(TestKind::TlrTilde, &x, &TestConfig::new(0.05).with_s(0.3)).is_err());
    }

    #[test]
    fn statistics_are_scale_invariant() {
        let x = gaussian(25, 50, 3);
        let cfg = TestConfig::new(0.05).with_s(0.4);
        for test in [TestKind::T1, TestKind::T2, TestKind::Tm, TestKind::Tlr] {
            let base = run_test(test, &x, &cfg).unwrap().statistic;
            assert_eq!(run_test(test, &(&x * 8.0), &cfg).unwrap().statistic, base);
            assert_eq!(run_test(test, &(&x * 0.125), &cfg).unwrap().statistic, base);
            let ten = run_test(test, &(&x * 10.0), &cfg).unwrap().statistic;
            assert!((ten - base).abs() <= 1e-10 * base.abs().max(1.0));
        }
    }

    #[test]
    fn test_names_round_trip() {
        for t in TestKind::ALL {
            assert_eq!(t.name().parse::<TestKind>().unwrap(), t);
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(json, format!("\"{}\"", t.name()));
        }
        assert!("t3".parse::<TestKind>().is_err());
    }
}

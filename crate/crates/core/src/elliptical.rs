//! Elliptical populations `x = ξ A u`.
//!
//! The radius `ξ` is always normalized so that `E ξ² = p`; its fourth moment
//! then reads `E ξ⁴ = p² + τ p + o(p)`, and `τ` is the only feature of the
//! radius law that reaches the CLT parameters downstream.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Binomial, ChiSquared, Distribution, FisherF, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::spectrum::DiscreteSpectrum;

/// Distribution family of the radius `ξ`. Parameters are dimension free;
/// `p` is supplied when sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadiusLaw {
    /// `ξ² ~ χ²_p`.
    Normal,
    /// `ξ = Gamma(p, 1) / √(p+1)`.
    DoubleExponential,
    /// `ξ^{2s} ~ Gamma(p/(2s), rate 1/2)`, rescaled to `E ξ² = p`.
    ExponentialPower { s: f64 },
    /// `ξ² = (p+β) · Beta(p/2, β/2)`.
    #[serde(rename = "pearson_ii")]
    PearsonII { beta: f64 },
    /// `ξ = √p`.
    Deterministic,
    /// `ξ² = Σ_{j≤p} y_j²` with `E y² = 1`, `E y⁴ = μ₄`.
    IidSumSquares { mu4: f64 },
    /// Multivariate Student-t, `ξ²/p ~ F(p, ν)` rescaled to `E ξ² = p`.
    /// Violates the fourth-moment condition; only for negative controls.
    StudentT { dof: f64 },
}

/// Exact second and fourth radius moments with the asymptotic `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusMoments {
    pub m2: f64,
    pub m4: f64,
    pub tau: f64,
}

impl RadiusMoments {
    /// `E ξ⁴ / (E ξ²)²`.
    pub fn kurtosis_ratio(&self) -> f64 {
        self.m4 / (self.m2 * self.m2)
    }
}

// Lower point of the two-point law of y² used by `IidSumSquares`.
const IID_LOW: f64 = 0.5;

impl RadiusLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RadiusLaw::ExponentialPower { s } if !(s.is_finite() && s > 0.0) => {
                Err(Error::domain(format!("exponential power needs s > 0, got {s}")))
            }
            RadiusLaw::PearsonII { beta } if !(beta.is_finite() && beta > 0.0) => {
                Err(Error::domain(format!("Pearson II needs beta > 0, got {beta}")))
            }
            RadiusLaw::IidSumSquares { mu4 } if !(mu4.is_finite() && mu4 >= 1.0) => {
                Err(Error::domain(format!("iid sum of squares needs mu4 >= 1, got {mu4}")))
            }
            RadiusLaw::StudentT { dof } if !(dof.is_finite() && dof > 4.0) => {
                Err(Error::domain(format!("Student-t radius needs dof > 4, got {dof}")))
            }
            _ => Ok(()),
        }
    }

    /// Whether `E ξ⁴ = p² + O(p)` holds, i.e. the CLT parameters apply.
    pub fn is_conforming(&self) -> bool {
        !matches!(self, RadiusLaw::StudentT { .. })
    }

    pub fn name(&self) -> String {
        match *self {
            RadiusLaw::Normal => "normal".into(),
            RadiusLaw::DoubleExponential => "double_exponential".into(),
            RadiusLaw::ExponentialPower { s } => format!("exponential_power(s={s})"),
            RadiusLaw::PearsonII { beta } => format!("pearson_ii(beta={beta})"),
            RadiusLaw::Deterministic => "deterministic".into(),
            RadiusLaw::IidSumSquares { mu4 } => format!("iid_sum_squares(mu4={mu4})"),
            RadiusLaw::StudentT { dof } => format!("student_t(dof={dof})"),
        }
    }

    /// The asymptotic `τ` in `E ξ⁴/(E ξ²)² = 1 + τ/p + o(1/p)`.
    pub fn tau(&self) -> Result<f64> {
        self.validate()?;
        match *self {
            RadiusLaw::Normal => Ok(2.0),
            RadiusLaw::DoubleExponential => Ok(4.0),
            RadiusLaw::ExponentialPower { s } => Ok(2.0 / s),
            RadiusLaw::PearsonII { .. } | RadiusLaw::Deterministic => Ok(0.0),
            RadiusLaw::IidSumSquares { mu4 } => Ok(mu4 - 1.0),
            RadiusLaw::StudentT { dof } => Err(Error::NonConforming(format!(
                "student_t(dof={dof}) has E xi^4 / p^2 -> {} != 1",
                1.0 + 2.0 / (dof - 4.0)
            ))),
        }
    }

    /// `P(y² = low) = q`, `P(y² = high) = 1 − q` with `E y² = 1`, `E y⁴ = μ₄`.
    fn iid_two_point(mu4: f64) -> (f64, f64, f64) {
        let v = mu4 - 1.0;
        let spread = (1.0 - IID_LOW) * (1.0 - IID_LOW);
        let q = v / (v + spread);
        let high = 1.0 + v / (1.0 - IID_LOW);
        (IID_LOW, high, q)
    }

    /// Scale `k` with `ξ = k · G^{1/(2s)}`, `G ~ Gamma(p/(2s), rate 1/2)`.
    fn exponential_power_scale(s: f64, p: f64) -> f64 {
        let alpha = p / (2.0 * s);
        // E G^{1/s} = 2^{1/s} Γ(α + 1/s) / Γ(α)
        let ln_m = (1.0 / s) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0 / s) - ln_gamma(alpha);
        (p.ln() - ln_m).exp().sqrt()
    }

    /// Draw one radius for dimension `p`.
    pub fn sample<R: Rng + ?Sized>(&self, p: usize, rng: &mut R) -> Result<f64> {
        self.validate()?;
        if p == 0 {
            return Err(Error::domain("dimension p must be positive"));
        }
        let pf = p as f64;
        let xi = match *self {
            RadiusLaw::Normal => {
                let d = ChiSquared::new(pf).map_err(|e| Error::domain(e.to_string()))?;
                d.sample(rng).sqrt()
            }
            RadiusLaw::DoubleExponential => {
                let d = Gamma::new(pf, 1.0).map_err(|e| Error::domain(e.to_string()))?;
                d.sample(rng) / (pf + 1.0).sqrt()
            }
            RadiusLaw::ExponentialPower { s } => {
                let d = Gamma::new(pf / (2.0 * s), 2.0).map_err(|e| Error::domain(e.to_string()))?;
                let g: f64 = d.sample(rng);
                Self::exponential_power_scale(s, pf) * g.powf(0.5 / s)
            }
            RadiusLaw::PearsonII { beta } => {
                let d = Beta::new(0.5 * pf, 0.5 * beta).map_err(|e| Error::domain(e.to_string()))?;
                let b: f64 = d.sample(rng);
                ((pf + beta) * b).sqrt()
            }
            RadiusLaw::Deterministic => pf.sqrt(),
            RadiusLaw::IidSumSquares { mu4 } => {
                let (low, high, q) = Self::iid_two_point(mu4);
                let lows = if q > 0.0 {
                    Binomial::new(p as u64, q)
                        .map_err(|e| Error::domain(e.to_string()))?
                        .sample(rng)
                } else {
                    0
                };
                (low * lows as f64 + high * (p as u64 - lows) as f64).sqrt()
            }
            RadiusLaw::StudentT { dof } => {
                let d = FisherF::new(pf, dof).map_err(|e| Error::domain(e.to_string()))?;
                let f: f64 = d.sample(rng);
                (pf * f * (dof - 2.0) / dof).sqrt()
            }
        };
        Ok(xi)
    }

    /// Exact `(E ξ², E ξ⁴)` at dimension `p` and the asymptotic `τ`.
    pub fn moments(&self, p: usize) -> Result<RadiusMoments> {
        self.validate()?;
        if p == 0 {
            return Err(Error::domain("dimension p must be positive"));
        }
        let tau = self.tau()?;
        let pf = p as f64;
        let m4 = match *self {
            RadiusLaw::Normal => pf * pf + 2.0 * pf,
            RadiusLaw::DoubleExponential => pf * (pf + 2.0) * (pf + 3.0) / (pf + 1.0),
            RadiusLaw::ExponentialPower { s } => {
                let alpha = pf / (2.0 * s);
                let ln_ratio = ln_gamma(alpha + 2.0 / s) + ln_gamma(alpha) - 2.0 * ln_gamma(alpha + 1.0 / s);
                pf * pf * ln_ratio.exp()
            }
            RadiusLaw::PearsonII { beta } => pf * (pf + 2.0) * (pf + beta) / (pf + beta + 2.0),
            RadiusLaw::Deterministic => pf * pf,
            RadiusLaw::IidSumSquares { mu4 } => pf * pf + (mu4 - 1.0) * pf,
            RadiusLaw::StudentT { .. } => unreachable!("tau() rejects non-conforming laws"),
        };
        Ok(RadiusMoments { m2: pf, m4, tau })
    }
}

/// Free-function form of [`RadiusLaw::sample`].
pub fn sample_radius<R: Rng + ?Sized>(law: &RadiusLaw, p: usize, rng: &mut R) -> Result<f64> {
    law.sample(p, rng)
}

/// Free-function form of [`RadiusLaw::moments`].
pub fn radius_moments(law: &RadiusLaw, p: usize) -> Result<RadiusMoments> {
    law.moments(p)
}

/// A point uniformly distributed on the unit sphere `S^{p−1}`, as `z/‖z‖`
/// with `z` standard Gaussian.
pub fn sample_direction<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Result<DVector<f64>> {
    if p == 0 {
        return Err(Error::domain("dimension p must be positive"));
    }
    let mut u = DVector::zeros(p);
    fill_direction(u.as_mut_slice(), rng);
    Ok(u)
}

fn fill_direction<R: Rng + ?Sized>(out: &mut [f64], rng: &mut R) {
    loop {
        let mut norm2 = 0.0;
        for v in out.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = z;
            norm2 += z * z;
        }
        if out.len() == 1 && norm2 > 0.0 {
            out[0] = out[0].signum();
            return;
        }
        if norm2 > 0.0 {
            let inv = norm2.sqrt().recip();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

/// How `A` acts on a direction.
#[derive(Debug, Clone, PartialEq)]
pub enum Scatter {
    /// `A = diag(√σ_1, …, √σ_p)`; stores the square roots.
    Diagonal(Vec<f64>),
    /// `A = I + (√(1+h) − 1) v v′`, so `Σ = I + h v v′`.
    RankOne { h: f64, v: Vec<f64> },
}

/// `(p, radius law, Σ)` for the model `x = ξ A u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct EllipticalModel {
    p: usize,
    radius: RadiusLaw,
    spectrum: DiscreteSpectrum,
    scatter: Scatter,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    p: usize,
    radius: RadiusLaw,
    spectrum: DiscreteSpectrum,
}

impl TryFrom<RawModel> for EllipticalModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        EllipticalModel::new(raw.p, raw.radius, &raw.spectrum)
    }
}

impl From<EllipticalModel> for RawModel {
    fn from(m: EllipticalModel) -> Self {
        RawModel {
            p: m.p,
            radius: m.radius,
            spectrum: m.spectrum,
        }
    }
}

impl EllipticalModel {
    /// Model with diagonal `Σ` whose eigenvalues follow `spectrum`. Atom
    /// multiplicities are rounded to integers summing to `p`; the stored
    /// spectrum is the realized `H_p`.
    pub fn new(p: usize, radius: RadiusLaw, spectrum: &DiscreteSpectrum) -> Result<Self> {
        radius.validate()?;
        let diag = spectrum.expand(p)?;
        let realized = DiscreteSpectrum::from_values(&diag)?;
        Ok(EllipticalModel {
            p,
            radius,
            spectrum: realized,
            scatter: Scatter::Diagonal(diag.iter().map(|v| v.sqrt()).collect()),
        })
    }

    /// `Σ = I + h v v′` for a unit vector `v` of length `p`.
    pub fn spiked(p: usize, radius: RadiusLaw, h: f64, v: Vec<f64>) -> Result<Self> {
        radius.validate()?;
        if !(h.is_finite() && h >= 0.0) {
            return Err(Error::domain(format!("spike strength h must be >= 0, got {h}")));
        }
        if v.len() != p || p == 0 {
            return Err(Error::domain("spike direction must have length p"));
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::domain(format!("spike direction must be a unit vector, norm {norm}")));
        }
        let spectrum = spike_spectrum(p, h)?;
        Ok(EllipticalModel {
            p,
            radius,
            spectrum,
            scatter: Scatter::RankOne { h, v },
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn radius(&self) -> &RadiusLaw {
        &self.radius
    }

    /// The realized population spectrum `H_p`.
    pub fn spectrum(&self) -> &DiscreteSpectrum {
        &self.spectrum
    }

    pub fn scatter(&self) -> &Scatter {
        &self.scatter
    }

    /// Write one observation `ξ A u` into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) -> Result<()> {
        let xi = self.radius.sample(self.p, rng)?;
        fill_direction(out, rng);
        match &self.scatter {
            Scatter::Diagonal(root) => {
                for (x, r) in out.iter_mut().zip(root) {
                    *x *= xi * r;
                }
            }
            Scatter::RankOne { h, v } => {
                let proj: f64 = out.iter().zip(v).map(|(a, b)| a * b).sum();
                let k = ((1.0 + h).sqrt() - 1.0) * proj;
                for (x, vi) in out.iter_mut().zip(v) {
                    *x = xi * (*x + k * vi);
                }
            }
        }
        Ok(())
    }

    /// `p × n` data matrix whose columns are independent observations.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
        if n == 0 {
            return Err(Error::domain("sample size n must be positive"));
        }
        let len = self
            .p
            .checked_mul(n)
            .filter(|&l| l <= isize::MAX as usize / std::mem::size_of::<f64>())
            .ok_or_else(|| Error::Resource(format!("{} x {} data matrix is too large", self.p, n)))?;
        let mut data = vec![0.0; len];
        for col in data.chunks_exact_mut(self.p) {
            self.sample_into(col, rng)?;
        }
        Ok(DMatrix::from_vec(self.p, n, data))
    }
}

/// Free-function form of [`EllipticalModel::sample`].
pub fn sample_population<R: Rng + ?Sized>(
    model: &EllipticalModel,
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    model.sample(n, rng)
}

/// Spectrum of `I_p + h v v′`: atoms 1 and `1 + h` with weights `(p−1)/p`, `1/p`.
pub fn spike_spectrum(p: usize, h: f64) -> Result<DiscreteSpectrum> {
    if p == 0 {
        return Err(Error::domain("dimension p must be positive"));
    }
    if !(h.is_finite() && h >= 0.0) {
        return Err(Error::domain(format!("spike strength h must be >= 0, got {h}")));
    }
    if h == 0.0 {
        return Ok(DiscreteSpectrum::identity());
    }
    if p == 1 {
        return DiscreteSpectrum::point(1.0 + h);
    }
    let pf = p as f64;
    DiscreteSpectrum::new(vec![1.0, 1.0 + h], vec![(pf - 1.0) / pf, 1.0 / pf])
}

/// Right-hand side of the quadratic-form covariance identity for `x = ξ u`:
///
/// ```text
/// E(x′Cx − tr C)(x′C̃x − tr C̃) = E ξ⁴/(p(p+2)) · (tr C tr C̃ + tr C C̃′ + tr C C̃) − tr C tr C̃
/// ```
///
/// valid whenever `E ξ² = p`.
pub fn quadratic_form_cov_oracle(c: &DMatrix<f64>, c_tilde: &DMatrix<f64>, m4: f64, p: usize) -> Result<f64> {
    if p == 0 {
        return Err(Error::domain("dimension p must be positive"));
    }
    if c.shape() != (p, p) || c_tilde.shape() != (p, p) {
        return Err(Error::domain(format!(
            "matrices must be {p}x{p}, got {:?} and {:?}",
            c.shape(),
            c_tilde.shape()
        )));
    }
    let tr_c = c.trace();
    let tr_ct = c_tilde.trace();
    // tr(C C̃′) = Σ C_ij C̃_ij and tr(C C̃) = Σ C_ij C̃_ji
    let tr_c_ctt = c.component_mul(c_tilde).sum();
    let tr_c_ct = c.component_mul(&c_tilde.transpose()).sum();
    let pf = p as f64;
    Ok(m4 / (pf * (pf + 2.0)) * (tr_c * tr_ct + tr_c_ctt + tr_c_ct) - tr_c * tr_ct)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_stream, Purpose};

    fn rng(i: u64) -> crate::rng::StreamRng {
        derive_stream(2024, Purpose::Oracle, i)
    }

    #[test]
    fn direction_has_unit_norm() {
        let mut r = rng(0);
        for p in [1usize, 3, 17, 500] {
            let u = sample_direction(p, &mut r).unwrap();
            assert!((u.norm() - 1.0).abs() < 1e-12);
        }
        assert!(sample_direction(0, &mut r).is_err());
    }

    #[test]
    fn one_dimensional_direction_is_a_fair_sign() {
        let mut r = rng(1);
        let draws = 20_000;
        let mut plus = 0;
        for _ in 0..draws {
            let u = sample_direction(1, &mut r).unwrap();
            assert_eq!(u[0].abs(), 1.0);
            if u[0] > 0.0 {
                plus += 1;
            }
        }
        let f = plus as f64 / draws as f64;
        assert!((f - 0.5).abs() < 4.0 * (0.25 / draws as f64).sqrt());
    }

    #[test]
    fn coordinate_moments_of_direction() {
        // E u_i = 0 and E u_i² = 1/p by exchangeability.
        let p = 50;
        let draws = 100_000;
        let mut r = rng(2);
        let mut sum = vec![0.0; p];
        let mut sum2 = vec![0.0; p];
        for _ in 0..draws {
            let u = sample_direction(p, &mut r).unwrap();
            for i in 0..p {
                sum[i] += u[i];
                sum2[i] += u[i] * u[i];
            }
        }
        let sd_mean = (1.0 / p as f64 / draws as f64).sqrt();
        for i in 0..p {
            let m = sum[i] / draws as f64;
            assert!(m.abs() < 4.0 * sd_mean, "coordinate {i} mean {m}");
            let v = sum2[i] / draws as f64 - m * m;
            assert!((v * p as f64 - 1.0).abs() < 0.05, "coordinate {i} var {v}");
        }
    }

    #[test]
    fn deterministic_radius_is_sqrt_p() {
        let mut r = rng(3);
        assert_eq!(RadiusLaw::Deterministic.sample(100, &mut r).unwrap(), 10.0);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let mut r = rng(4);
        for law in [
            RadiusLaw::ExponentialPower { s: 0.0 },
            RadiusLaw::PearsonII { beta: -1.0 },
            RadiusLaw::IidSumSquares { mu4: 0.5 },
            RadiusLaw::StudentT { dof: 3.0 },
        ] {
            assert!(law.sample(10, &mut r).is_err());
            assert!(law.moments(10).is_err());
        }
        assert!(RadiusLaw::Normal.sample(0, &mut r).is_err());
    }

    #[test]
    fn table_moments() {
        let m = RadiusLaw::Normal.moments(100).unwrap();
        assert_eq!((m.m2, m.m4, m.tau), (100.0, 100.0 * 100.0 + 200.0, 2.0));
        assert!((m.kurtosis_ratio() - 1.02).abs() < 1e-15);

        let p = 100.0;
        let m = RadiusLaw::DoubleExponential.moments(100).unwrap();
        assert_eq!(m.tau, 4.0);
        let expected = 1.0 + (4.0 * p + 6.0) / (p * (p + 1.0));
        assert!((m.kurtosis_ratio() - expected).abs() < 1e-14);

        let m = RadiusLaw::Deterministic.moments(50).unwrap();
        assert_eq!((m.m2, m.m4, m.tau), (50.0, 2500.0, 0.0));

        let beta = 4.0;
        let m = RadiusLaw::PearsonII { beta }.moments(100).unwrap();
        let expected = 1.0 + 2.0 * beta / (p * p + beta * p + 2.0 * p);
        assert!((m.kurtosis_ratio() - expected).abs() < 1e-14);
        assert_eq!(m.tau, 0.0);

        // s = 1 is the Gaussian case.
        let m = RadiusLaw::ExponentialPower { s: 1.0 }.moments(100).unwrap();
        assert!((m.m4 - (p * p + 2.0 * p)).abs() < 1e-8);
        assert_eq!(RadiusLaw::ExponentialPower { s: 0.5 }.moments(10).unwrap().tau, 4.0);

        let m = RadiusLaw::IidSumSquares { mu4: 3.0 }.moments(100).unwrap();
        assert_eq!((m.m4, m.tau), (p * p + 2.0 * p, 2.0));

        assert!(matches!(
            RadiusLaw::StudentT { dof: 6.0 }.moments(100),
            Err(Error::NonConforming(_))
        ));
    }

    #[test]
    fn fourth_moment_expansion_converges_to_tau() {
        let laws = [
            RadiusLaw::Normal,
            RadiusLaw::DoubleExponential,
            RadiusLaw::ExponentialPower { s: 0.5 },
            RadiusLaw::ExponentialPower { s: 2.0 },
            RadiusLaw::PearsonII { beta: 4.0 },
            RadiusLaw::Deterministic,
            RadiusLaw::IidSumSquares { mu4: 9.0 },
        ];
        for law in laws {
            for p in [10usize, 100, 1000] {
                let m = law.moments(p).unwrap();
                assert_eq!(m.m2, p as f64);
            }
            let m = law.moments(1000).unwrap();
            let scaled = 1000.0 * (m.kurtosis_ratio() - 1.0);
            assert!((scaled - m.tau).abs() <= 0.5, "{law:?}: {scaled} vs {}", m.tau);
        }
    }

    #[test]
    fn two_point_law_matches_moments() {
        for mu4 in [1.0, 1.5, 3.0, 9.0] {
            let (a, b, q) = RadiusLaw::iid_two_point(mu4);
            assert!((q * a + (1.0 - q) * b - 1.0).abs() < 1e-14);
            assert!((q * a * a + (1.0 - q) * b * b - mu4).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_radius_moments() {
        let draws = 100_000;
        let cases = [
            (RadiusLaw::Normal, 200usize),
            (RadiusLaw::PearsonII { beta: 4.0 }, 100),
            (RadiusLaw::DoubleExponential, 100),
            (RadiusLaw::ExponentialPower { s: 0.5 }, 100),
            (RadiusLaw::IidSumSquares { mu4: 5.0 }, 100),
        ];
        for (k, (law, p)) in cases.into_iter().enumerate() {
            let mut r = rng(10 + k as u64);
            let (mut s2, mut s4) = (0.0, 0.0);
            for _ in 0..draws {
                let x2 = law.sample(p, &mut r).unwrap().powi(2);
                s2 += x2;
                s4 += x2 * x2;
            }
            let m2 = s2 / draws as f64;
            let m4 = s4 / draws as f64;
            assert!((m2 / p as f64 - 1.0).abs() < 0.01, "{law:?}: mean xi^2 {m2}");
            if law == RadiusLaw::Normal {
                let excess = m4 / (m2 * m2) - 1.0;
                let target = 2.0 / p as f64;
                assert!((excess / target - 1.0).abs() < 0.3, "excess {excess}");
            }
        }
    }

    #[test]
    fn population_columns_and_traces() {
        let mut r = rng(20);
        let model = EllipticalModel::new(2, RadiusLaw::Deterministic, &DiscreteSpectrum::identity()).unwrap();
        let x = model.sample(3, &mut r).unwrap();
        for c in x.column_iter() {
            assert!((c.norm() - 2f64.sqrt()).abs() < 1e-12);
        }

        let model = EllipticalModel::new(100, RadiusLaw::Normal, &DiscreteSpectrum::identity()).unwrap();
        let x = model.sample(200, &mut r).unwrap();
        let tr = x.norm_squared() / 200.0 / 100.0;
        assert!((tr - 1.0).abs() < 0.05, "{tr}");

        let h = DiscreteSpectrum::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let model = EllipticalModel::new(100, RadiusLaw::Normal, &h).unwrap();
        let x = model.sample(200, &mut r).unwrap();
        let tr = x.norm_squared() / 200.0 / 100.0;
        assert!((tr - 1.5).abs() < 0.075, "{tr}");
    }

    #[test]
    fn sampling_is_bit_reproducible() {
        let h = DiscreteSpectrum::new(vec![1.0, 3.0], vec![0.25, 0.75]).unwrap();
        let model = EllipticalModel::new(40, RadiusLaw::PearsonII { beta: 2.0 }, &h).unwrap();
        let a = model.sample(30, &mut rng(99)).unwrap();
        let b = model.sample(30, &mut rng(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spiked_model_realizes_rank_one_covariance() {
        let p = 6;
        let mut v = vec![0.0; p];
        v[0] = 0.6;
        v[1] = 0.8;
        let h = 3.0;
        let model = EllipticalModel::spiked(p, RadiusLaw::Deterministic, h, v.clone()).unwrap();
        assert_eq!(model.spectrum().max_atom(), 4.0);
        // A = I + (√(1+h) − 1) v v′ maps v to √(1+h) v and fixes v^⊥, so x′Σ⁻¹x = ξ² = p.
        let x = model.sample(5, &mut rng(30)).unwrap();
        for c in x.column_iter() {
            let along: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
            let q = c.norm_squared() - along * along + along * along / (1.0 + h);
            assert!((q - p as f64).abs() < 1e-10);
        }
        assert!(EllipticalModel::spiked(p, RadiusLaw::Normal, -1.0, v.clone()).is_err());
        assert!(EllipticalModel::spiked(p, RadiusLaw::Normal, 1.0, vec![1.0; p]).is_err());
    }

    #[test]
    fn spike_spectrum_arithmetic() {
        assert_eq!(spike_spectrum(100, 0.0).unwrap(), DiscreteSpectrum::identity());
        let s = spike_spectrum(100, 0.3).unwrap();
        assert_eq!(s.max_atom(), 1.3);
        assert!((s.moment(1) - (1.0 + 0.3 / 100.0)).abs() < 1e-15);
        assert!(spike_spectrum(10, -0.1).is_err());
    }

    #[test]
    fn quadratic_form_identity_closed_cases() {
        let p = 12;
        let id = DMatrix::<f64>::identity(p, p);
        let m4 = RadiusLaw::Normal.moments(p).unwrap().m4;
        let v = quadratic_form_cov_oracle(&id, &id, m4, p).unwrap();
        assert!((v - 2.0 * p as f64).abs() < 1e-10);
        let zero = DMatrix::<f64>::zeros(p, p);
        assert_eq!(quadratic_form_cov_oracle(&zero, &id, m4, p).unwrap(), 0.0);
        assert!(quadratic_form_cov_oracle(&DMatrix::zeros(3, 3), &id, m4, p).is_err());
    }

    #[test]
    fn model_json() {
        let json = r#"{"p": 4, "radius": {"kind": "pearson_ii", "beta": 4.0},
                       "spectrum": {"atoms": [1.0, 2.0], "weights": [0.5, 0.5]}}"#;
        let m: EllipticalModel = serde_json::from_str(json).unwrap();
        assert_eq!(m.p(), 4);
        assert_eq!(*m.radius(), RadiusLaw::PearsonII { beta: 4.0 });
        let back: EllipticalModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        let bad = r#"{"p": 4, "radius": {"kind": "exponential_power", "s": -1},
                      "spectrum": {"atoms": [1.0], "weights": [1.0]}}"#;
        assert!(serde_json::from_str::<EllipticalModel>(bad).is_err());
    }
}

//! Limiting mean and covariance of `p(β̂_1 − β_1, β̂_2 − β_2)` for elliptical
//! populations.
//!
//! With `γ_j = ∫ t^j dH(t)` the parameters are
//!
//! ```text
//! v1   = 0
//! v2   = c γ2 + c(τ−2) γ1²
//! ψ11  = 2c γ2 + c(τ−2) γ1²
//! ψ12  = 4c γ3 + 4c² γ1 γ2 + 2c(τ−2) γ1 (c γ1² + γ2)
//! ψ22  = 8c γ4 + 4c² γ2² + 16c² γ1 γ3 + 8c³ γ1² γ2 + 4c(τ−2)(c γ1² + γ2)²
//! ```
//!
//! Every `τ`-dependent addend carries the factor `τ − 2`, so the Gaussian
//! case `τ = 2` recovers the classical values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mp_law::lsd_moments;
use crate::spectrum::DiscreteSpectrum;

const PSD_TOL: f64 = 1e-9;

/// CLT parameters of the first two sample spectral moments, with the inputs
/// that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentCltParams {
    pub v1: f64,
    pub v2: f64,
    pub psi11: f64,
    pub psi12: f64,
    pub psi22: f64,
    pub c: f64,
    pub tau: f64,
    pub gamma: [f64; 4],
}

impl MomentCltParams {
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        [[self.psi11, self.psi12], [self.psi12, self.psi22]]
    }
}

/// Evaluate the moment CLT parameters for ratio `c`, population spectrum `h`
/// and radius parameter `tau`.
///
/// Fails when the resulting covariance is not positive semidefinite (within
/// `1e−9`), which flags a `(τ, H)` combination outside the model.
pub fn moment_clt_params(c: f64, h: &DiscreteSpectrum, tau: f64) -> Result<MomentCltParams> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::domain(format!("ratio c must be positive, got {c}")));
    }
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::domain(format!("tau must be >= 0, got {tau}")));
    }
    let g1 = h.moment(1);
    let g2 = h.moment(2);
    let g3 = h.moment(3);
    let g4 = h.moment(4);
    let k = tau - 2.0;
    let q = c * g1 * g1 + g2;

    let v2 = c * g2 + c * k * g1 * g1;
    let psi11 = 2.0 * c * g2 + c * k * g1 * g1;
    let psi12 = 4.0 * c * g3 + 4.0 * c * c * g1 * g2 + 2.0 * c * k * g1 * q;
    let psi22 = 8.0 * c * g4
        + 4.0 * c * c * g2 * g2
        + 16.0 * c * c * g1 * g3
        + 8.0 * c * c * c * g1 * g1 * g2
        + 4.0 * c * k * q * q;

    let scale = psi11.abs().max(psi22.abs()).max(1.0);
    let det = psi11 * psi22 - psi12 * psi12;
    if psi11 < -PSD_TOL * scale || psi22 < -PSD_TOL * scale || det < -PSD_TOL * scale * scale {
        return Err(Error::domain(format!(
            "CLT covariance is not PSD for c={c}, tau={tau} (psi11={psi11}, psi12={psi12}, psi22={psi22})"
        )));
    }
    Ok(MomentCltParams {
        v1: 0.0,
        v2,
        psi11,
        psi12,
        psi22,
        c,
        tau,
        gamma: [g1, g2, g3, g4],
    })
}

/// Finite-`(p, n)` centering `(β_{n1}, β_{n2})` from `c_n` and `H_p`.
pub fn centering_values(c_n: f64, h_p: &DiscreteSpectrum) -> (f64, f64) {
    lsd_moments(c_n, h_p)
}

/// Standardized scores
/// `z1 = p(β̂1 − β1)/√ψ11` and `z2 = (p(β̂2 − β2) − v2)/√ψ22`.
pub fn standardize_moments(
    beta1_hat: f64,
    beta2_hat: f64,
    p: usize,
    params: &MomentCltParams,
    centering: (f64, f64),
) -> Result<(f64, f64)> {
    if !(params.psi11 > 0.0 && params.psi22 > 0.0) {
        return Err(Error::domain(format!(
            "standardization needs positive variances, got psi11={} psi22={}",
            params.psi11, params.psi22
        )));
    }
    let pf = p as f64;
    let z1 = (pf * (beta1_hat - centering.0) - params.v1) / params.psi11.sqrt();
    let z2 = (pf * (beta2_hat - centering.1) - params.v2) / params.psi22.sqrt();
    Ok((z1, z2))
}

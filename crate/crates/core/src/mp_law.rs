//! The generalized Marčenko–Pastur law `F^{c,H}` for a discrete population
//! spectrum `H`.
//!
//! The Stieltjes transform `m(z)` is the unique solution of
//!
//! ```text
//! m = ∫ dH(t) / (t(1 − c − c z m) − z)
//! ```
//!
//! with `Im m̲ > 0`, where `m̲ = −(1−c)/z + c m` is the transform of the
//! companion law `c F + (1−c) δ_0`. In companion form this is the inverse map
//!
//! ```text
//! z = −1/m̲ + c ∫ t dH(t) / (1 + t m̲)
//! ```
//!
//! whose real critical points give the edges of the support.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate_adaptive;
use crate::spectrum::DiscreteSpectrum;

const FIXED_POINT_DAMPING: f64 = 0.5;
const FIXED_POINT_CAP: usize = 10_000;
const RESIDUAL_TARGET: f64 = 1e-12;
const NEWTON_CAP: usize = 100;
const DENSITY_EPS: [f64; 2] = [1e-6, 5e-7];
const EDGE_SCAN_POINTS: usize = 4000;

fn check_ratio(c: f64) -> Result<()> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("dimension ratio c must be positive, got {c}")))
    }
}

/// Right-hand side of the fixed-point equation in `m`.
fn mp_map(c: f64, h: &DiscreteSpectrum, z: Complex64, m: Complex64) -> Complex64 {
    let k = 1.0 - c - c * z * m;
    h.iter().map(|(t, w)| w / (t * k - z)).sum()
}

/// `g(m̲) = z + 1/m̲ − c ∫ t/(1 + t m̲) dH` and its derivative.
fn companion_eq(c: f64, h: &DiscreteSpectrum, z: Complex64, mu: Complex64) -> (Complex64, Complex64) {
    let mut s = Complex64::new(0.0, 0.0);
    let mut ds = Complex64::new(0.0, 0.0);
    for (t, w) in h.iter() {
        let d = 1.0 + t * mu;
        s += w * t / d;
        ds += w * t * t / (d * d);
    }
    (z + 1.0 / mu - c * s, -1.0 / (mu * mu) + c * ds)
}

fn to_companion(c: f64, z: Complex64, m: Complex64) -> Complex64 {
    -(1.0 - c) / z + c * m
}

fn from_companion(c: f64, z: Complex64, mu: Complex64) -> Complex64 {
    (mu + (1.0 - c) / z) / c
}

fn admissible(c: f64, z: Complex64, m: Complex64) -> bool {
    m.is_finite() && to_companion(c, z, m).im > 0.0 && m.im > 0.0
}

fn residual(c: f64, h: &DiscreteSpectrum, z: Complex64, m: Complex64) -> f64 {
    (m - mp_map(c, h, z, m)).norm()
}

/// The residual target is absolute for `|m| <= 1` and relative beyond,
/// since near a zero atom `|m|` grows like `1/|z|`. There the `m` residual
/// loses digits to cancellation, so the companion equation is accepted too.
fn converged(c: f64, h: &DiscreteSpectrum, z: Complex64, m: Complex64, target: f64) -> bool {
    if residual(c, h, z, m) <= target * m.norm().max(1.0) {
        return true;
    }
    let mu = to_companion(c, z, m);
    let (g, _) = companion_eq(c, h, z, mu);
    g.norm() <= target * (1.0 / mu.norm()).max(z.norm()).max(1.0)
}

/// Newton on the companion equation starting from `m`; returns an admissible
/// solution meeting the residual target, if one is reached. Full steps are
/// tried first; the damped variant keeps iterates in the upper half plane.
fn newton(c: f64, h: &DiscreteSpectrum, z: Complex64, m: Complex64) -> Option<Complex64> {
    let mu = to_companion(c, z, m);
    newton_with(c, h, z, mu, false).or_else(|| newton_with(c, h, z, mu, true))
}

fn newton_with(c: f64, h: &DiscreteSpectrum, z: Complex64, mut mu: Complex64, damped: bool) -> Option<Complex64> {
    for _ in 0..NEWTON_CAP {
        let (g, dg) = companion_eq(c, h, z, mu);
        if !(dg.is_finite() && dg.norm() > 0.0) {
            return None;
        }
        let mut step = g / dg;
        // Keep the iterate in the upper half plane.
        while damped && (mu - step).im <= 0.0 && step.norm() > 1e-300 {
            step *= 0.5;
        }
        mu -= step;
        let m = from_companion(c, z, mu);
        if step.norm() <= 1e-15 * mu.norm().max(1e-300) || converged(c, h, z, m, RESIDUAL_TARGET * 1e-2) {
            return (admissible(c, z, m) && converged(c, h, z, m, RESIDUAL_TARGET)).then_some(m);
        }
    }
    let m = from_companion(c, z, mu);
    (admissible(c, z, m) && converged(c, h, z, m, RESIDUAL_TARGET)).then_some(m)
}

/// Solve for `m` at `z` by walking `Im z` down from `1` and polishing with
/// Newton at each step. The companion transform is carried between steps
/// because it stays bounded near `z = 0` when `c > 1`.
fn continuation(c: f64, h: &DiscreteSpectrum, z: Complex64) -> Option<Complex64> {
    let scale = h.max_atom() * (1.0 + c.sqrt()).powi(2);
    let top = z.im.max(1.0).max(2.0 * scale);
    let mut m = fixed_point(c, h, Complex64::new(z.re, top), 2000).0;
    let steps = 400;
    let ratio = (z.im / top).powf(1.0 / steps as f64);
    let mut eta = top;
    let mut prev = top;
    for k in 1..=steps {
        eta = if k == steps { z.im } else { eta * ratio };
        let next = Complex64::new(z.re, eta);
        let mu = to_companion(c, Complex64::new(z.re, prev), m);
        m = newton_with(c, h, next, mu, false).or_else(|| newton_with(c, h, next, mu, true))?;
        prev = eta;
    }
    Some(m)
}

/// Damped fixed-point iteration; returns the last iterate and its residual.
fn fixed_point(c: f64, h: &DiscreteSpectrum, z: Complex64, cap: usize) -> (Complex64, f64) {
    let mut m = -1.0 / z;
    for _ in 0..cap {
        let next = mp_map(c, h, z, m);
        let res = (next - m).norm();
        m = FIXED_POINT_DAMPING * m + (1.0 - FIXED_POINT_DAMPING) * next;
        if res <= RESIDUAL_TARGET {
            break;
        }
    }
    (m, residual(c, h, z, m))
}

/// Stieltjes transform `m(z)` of `F^{c,H}` for `Im z > 0`.
pub fn stieltjes(c: f64, h: &DiscreteSpectrum, z: Complex64) -> Result<Complex64> {
    check_ratio(c)?;
    if !(z.im > 0.0 && z.is_finite()) {
        return Err(Error::domain(format!("z = {z} must lie in the upper half plane")));
    }
    // A short fixed-point run; when it stalls (near the real axis) hand off to Newton.
    let (m, res) = fixed_point(c, h, z, 200);
    if res <= RESIDUAL_TARGET * m.norm().max(1.0) && admissible(c, z, m) {
        return Ok(m);
    }
    if let Some(m) = newton(c, h, z, m) {
        return Ok(m);
    }
    let (m, res) = fixed_point(c, h, z, FIXED_POINT_CAP);
    if res <= RESIDUAL_TARGET * m.norm().max(1.0) && admissible(c, z, m) {
        return Ok(m);
    }
    continuation(c, h, z).ok_or(Error::Numerical {
        what: format!("Stieltjes solver did not converge at z = {z}"),
        residual: res,
    })
}

/// Stieltjes transform `m̲(z)` of the companion law `c F^{c,H} + (1−c) δ_0`.
pub fn companion_stieltjes(c: f64, h: &DiscreteSpectrum, z: Complex64) -> Result<Complex64> {
    let m = stieltjes(c, h, z)?;
    Ok(to_companion(c, z, m))
}

/// The inverse map `z(m̲)` on the real line.
fn z_of(c: f64, h: &DiscreteSpectrum, mu: f64) -> f64 {
    -1.0 / mu + c * h.iter().map(|(t, w)| w * t / (1.0 + t * mu)).sum::<f64>()
}

fn dz_of(c: f64, h: &DiscreteSpectrum, mu: f64) -> f64 {
    1.0 / (mu * mu) - c * h.iter().map(|(t, w)| w * t * t / ((1.0 + t * mu) * (1.0 + t * mu))).sum::<f64>()
}

/// A piece of the real `m̲` line between consecutive poles of `z(m̲)`.
#[derive(Clone, Copy)]
enum Segment {
    /// `(−∞, b)`
    Left(f64),
    /// `(a, b)`
    Between(f64, f64),
    /// `(0, ∞)`
    Right(f64),
}

impl Segment {
    /// Map `u ∈ (0,1)` onto the segment, clustering points at finite ends.
    fn at(self, u: f64) -> f64 {
        match self {
            Segment::Left(b) => b - b.abs() * (1.0 - u) / u,
            Segment::Between(a, b) => a + (b - a) * 0.5 * (1.0 - (std::f64::consts::PI * u).cos()),
            Segment::Right(scale) => scale * u / (1.0 - u),
        }
    }
}

/// Support of the continuous part of `F^{c,H}` as sorted disjoint closed intervals.
pub fn support_edges(c: f64, h: &DiscreteSpectrum) -> Result<Vec<(f64, f64)>> {
    check_ratio(c)?;
    let mut poles: Vec<f64> = h.atoms().iter().rev().map(|t| -1.0 / t).collect();
    poles.push(0.0);
    let mut segments = vec![Segment::Left(poles[0])];
    segments.extend(poles.windows(2).map(|w| Segment::Between(w[0], w[1])));
    segments.push(Segment::Right(1.0 / h.max_atom()));

    // Open x-intervals outside the support: images of the increasing pieces of z(m̲).
    let mut gaps: Vec<(f64, f64)> = Vec::new();
    for seg in segments {
        let grid: Vec<f64> = (1..EDGE_SCAN_POINTS)
            .map(|i| i as f64 / EDGE_SCAN_POINTS as f64)
            .collect();
        let mut breaks = vec![0.0];
        for w in grid.windows(2) {
            let (fa, fb) = (dz_of(c, h, seg.at(w[0])), dz_of(c, h, seg.at(w[1])));
            if fa == 0.0 {
                breaks.push(w[0]);
            } else if fa.signum() != fb.signum() && fb != 0.0 {
                breaks.push(bisect_u(c, h, seg, w[0], w[1])?);
            }
        }
        breaks.push(1.0);
        for piece in breaks.windows(2) {
            let mid = 0.5 * (piece[0] + piece[1]);
            if dz_of(c, h, seg.at(mid)) <= 0.0 {
                continue;
            }
            let lo = endpoint_value(c, h, seg, piece[0], true);
            let hi = endpoint_value(c, h, seg, piece[1], false);
            if hi > 0.0 && hi > lo {
                gaps.push((lo.max(0.0), hi));
            }
        }
    }
    gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut support = Vec::new();
    let mut cursor = 0.0f64;
    for (lo, hi) in gaps {
        if lo > cursor {
            support.push((cursor, lo));
        }
        cursor = cursor.max(hi);
        if cursor.is_infinite() {
            break;
        }
    }
    if cursor.is_finite() {
        return Err(Error::Numerical {
            what: "could not locate the right edge of the support".into(),
            residual: cursor,
        });
    }
    support.retain(|&(a, b)| b - a > 1e-12 * b.max(1.0));
    if support.is_empty() {
        return Err(Error::Numerical {
            what: "support of the limiting law came out empty".into(),
            residual: 0.0,
        });
    }
    Ok(support)
}

/// `z` at a piece boundary: the limit at a pole or infinity, else the critical value.
fn endpoint_value(c: f64, h: &DiscreteSpectrum, seg: Segment, u: f64, lower: bool) -> f64 {
    if u == 0.0 || u == 1.0 {
        let at_infinity = matches!((seg, u == 0.0), (Segment::Left(_), true) | (Segment::Right(_), false));
        if at_infinity {
            return 0.0;
        }
        // Just inside a pole z runs to −∞ on the lower end and +∞ on the upper end
        // of an increasing piece.
        return if lower { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    z_of(c, h, seg.at(u))
}

fn bisect_u(c: f64, h: &DiscreteSpectrum, seg: Segment, mut a: f64, mut b: f64) -> Result<f64> {
    let mut fa = dz_of(c, h, seg.at(a));
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = dz_of(c, h, seg.at(mid));
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
        if (seg.at(b) - seg.at(a)).abs() <= 1e-15 * seg.at(a).abs().max(1e-300) {
            break;
        }
    }
    let root = 0.5 * (a + b);
    if root.is_finite() {
        Ok(root)
    } else {
        Err(Error::Numerical {
            what: "edge bisection failed".into(),
            residual: f64::NAN,
        })
    }
}

/// `(β_1, β_2) = (γ_1, γ_2 + c γ_1²)`, the first two moments of `F^{c,H}`.
pub fn lsd_moments(c: f64, h: &DiscreteSpectrum) -> (f64, f64) {
    let g1 = h.moment(1);
    let g2 = h.moment(2);
    (g1, g2 + c * g1 * g1)
}

/// The law `F^{c,H}` with its support resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpLaw {
    c: f64,
    h: DiscreteSpectrum,
    support: Vec<(f64, f64)>,
    zero_mass: f64,
}

impl MpLaw {
    pub fn new(c: f64, h: DiscreteSpectrum) -> Result<Self> {
        let support = support_edges(c, &h)?;
        Ok(MpLaw {
            c,
            zero_mass: (1.0 - 1.0 / c).max(0.0),
            h,
            support,
        })
    }

    pub fn ratio(&self) -> f64 {
        self.c
    }

    pub fn population(&self) -> &DiscreteSpectrum {
        &self.h
    }

    pub fn support(&self) -> &[(f64, f64)] {
        &self.support
    }

    /// Mass of the atom at zero, `max(0, 1 − 1/c)`.
    pub fn zero_mass(&self) -> f64 {
        self.zero_mass
    }

    pub fn right_edge(&self) -> f64 {
        self.support.last().map(|s| s.1).unwrap_or(0.0)
    }

    pub fn in_support(&self, x: f64) -> bool {
        self.support.iter().any(|&(a, b)| x >= a && x <= b)
    }

    pub fn stieltjes(&self, z: Complex64) -> Result<Complex64> {
        stieltjes(self.c, &self.h, z)
    }

    /// Density of the continuous part at `x > 0` by Stieltjes inversion,
    /// `Im m(x + iε)/π` at two values of `ε` extrapolated linearly to `ε = 0`.
    pub fn density(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) || !self.in_support(x) {
            return Ok(0.0);
        }
        let f = |eps: f64| -> Result<f64> {
            Ok(stieltjes(self.c, &self.h, Complex64::new(x, eps))?.im / std::f64::consts::PI)
        };
        let (e1, e2) = (DENSITY_EPS[0], DENSITY_EPS[1]);
        let (f1, f2) = (f(e1)?, f(e2)?);
        let extrapolated = f2 + (f2 - f1) * e2 / (e1 - e2);
        Ok(extrapolated.max(0.0))
    }

    /// `∫ g dF^{c,H}`: quadrature over the support with `x = a + (b−a) sin²θ`
    /// to absorb the square-root edges, plus the zero atom.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G, tol: f64) -> Result<f64> {
        let err = std::cell::RefCell::new(None);
        let mut total = 0.0;
        for &(a, b) in &self.support {
            let w = b - a;
            total += integrate_adaptive(
                |theta| {
                    let (s, co) = theta.sin_cos();
                    let x = a + w * s * s;
                    match self.density(x) {
                        Ok(d) => g(x) * d * w * 2.0 * s * co,
                        Err(e) => {
                            err.borrow_mut().get_or_insert(e);
                            0.0
                        }
                    }
                },
                0.0,
                std::f64::consts::FRAC_PI_2,
                tol,
            );
        }
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        Ok(total + self.zero_mass * g(0.0))
    }
}

/// Density of `F^{c,H}` at `x`; free-function form of [`MpLaw::density`].
pub fn density(law: &MpLaw, x: f64) -> Result<f64> {
    law.density(x)
}

/// Edges `((1 − √c)², (1 + √c)²)` of the standard Marčenko–Pastur law.
pub fn standard_edges(c: f64) -> (f64, f64) {
    let r = c.sqrt();
    ((1.0 - r) * (1.0 - r), (1.0 + r) * (1.0 + r))
}

/// `∫ ln(z0 − x) dF^{c,δ_1}(x)` for `z0` to the right of the support.
pub fn log_integral(c: f64, z0: f64) -> Result<f64> {
    log_integral_tol(c, z0, 1e-13)
}

pub(crate) fn log_integral_tol(c: f64, z0: f64, tol: f64) -> Result<f64> {
    check_ratio(c)?;
    let (a, b) = standard_edges(c);
    if !(z0.is_finite() && z0 > b) {
        return Err(Error::domain(format!(
            "z0 = {z0} must exceed the right support edge {b}"
        )));
    }
    let w = b - a;
    // With x = a + w sin²θ the density element f(x)dx becomes
    // w² sin²θ cos²θ / (π c x) dθ on [0, π/2].
    let continuous = integrate_adaptive(
        |theta| {
            let (s, co) = theta.sin_cos();
            let s2 = s * s;
            let x = a + w * s2;
            (z0 - x).ln() * w * w * s2 * co * co / (std::f64::consts::PI * c * x)
        },
        0.0,
        std::f64::consts::FRAC_PI_2,
        tol,
    );
    Ok(continuous + (1.0 - 1.0 / c).max(0.0) * z0.ln())
}

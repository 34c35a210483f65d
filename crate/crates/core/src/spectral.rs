//! Sample covariance spectra and the statistics built on them.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const NEGATIVE_TOL: f64 = 1e-10;

/// Sorted eigenvalues of a `p × p` sample covariance matrix built from `n` observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSample {
    eigenvalues: Vec<f64>,
    p: usize,
    n: usize,
}

impl SpectralSample {
    /// Wrap eigenvalues of a PSD matrix. Values are sorted; negatives within
    /// `−1e−10 · max(1, λ_max)` are clamped to zero, anything below is an error.
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>, n: usize) -> Result<Self> {
        let p = eigenvalues.len();
        if p == 0 || n == 0 {
            return Err(Error::domain("spectral sample needs p >= 1 and n >= 1"));
        }
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("eigenvalues must be finite"));
        }
        eigenvalues.sort_by(f64::total_cmp);
        let scale = eigenvalues[p - 1].abs().max(1.0);
        if eigenvalues[0] < -NEGATIVE_TOL * scale {
            return Err(Error::Contract(format!(
                "eigenvalue {} is negative; matrix is not PSD",
                eigenvalues[0]
            )));
        }
        for v in eigenvalues.iter_mut().take_while(|v| **v < 0.0) {
            *v = 0.0;
        }
        Ok(SpectralSample { eigenvalues, p, n })
    }

    /// Spectrum of `XX′/n` for a `p × n` data matrix. When `n < p` the
    /// nonzero eigenvalues are taken from the `n × n` Gram matrix `X′X/n`.
    pub fn from_data(x: &DMatrix<f64>) -> Result<Self> {
        let (p, n) = x.shape();
        if p == 0 || n == 0 {
            return Err(Error::domain("data matrix is empty"));
        }
        if n < p {
            let gram = symmetrize(x.tr_mul(x) / n as f64);
            let mut ev = symmetric_eigenvalues(&gram)?;
            ev.resize(p, 0.0);
            Self::from_eigenvalues(ev, n)
        } else {
            Self::from_eigenvalues(symmetric_eigenvalues(&sample_covariance(x)?)?, n)
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `c_n = p / n`.
    pub fn ratio(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.p - 1]
    }

    /// `(1/p) Σ λ_i^j`.
    pub fn moment(&self, j: i32) -> f64 {
        self.eigenvalues.iter().map(|l| l.powi(j)).sum::<f64>() / self.p as f64
    }

    /// `(1/p) Σ f(λ_i)`; fails on the first eigenvalue where `f` is not finite.
    pub fn lss<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let mut total = 0.0;
        for &l in &self.eigenvalues {
            let v = f(l);
            if !v.is_finite() {
                return Err(Error::Evaluation { lambda: l });
            }
            total += v;
        }
        Ok(total / self.p as f64)
    }

    /// CSV: a `# p=…,n=…` line, an `eigenvalue` header, then one value per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# p={},n={}", self.p, self.n)?;
        writeln!(w, "eigenvalue")?;
        for v in &self.eigenvalues {
            writeln!(w, "{v:?}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let meta = lines
            .next()
            .ok_or_else(|| Error::input("empty spectrum file"))??;
        let (mut p, mut n) = (None, None);
        for part in meta.trim_start_matches('#').split(',') {
            match part.trim().split_once('=') {
                Some(("p", v)) => p = v.trim().parse::<usize>().ok(),
                Some(("n", v)) => n = v.trim().parse::<usize>().ok(),
                _ => {}
            }
        }
        let (p, n) = p
            .zip(n)
            .ok_or_else(|| Error::input(format!("bad spectrum header line {meta:?}")))?;
        let mut values = Vec::with_capacity(p);
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t == "eigenvalue" {
                continue;
            }
            values.push(
                t.parse::<f64>()
                    .map_err(|_| Error::input(format!("bad eigenvalue {t:?}")))?,
            );
        }
        if values.len() != p {
            return Err(Error::input(format!("header says p={p} but file has {} values", values.len())));
        }
        Self::from_eigenvalues(values, n)
    }
}

fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let k = m.nrows();
    for j in 0..k {
        for i in (j + 1)..k {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// `B = XX′/n` for a `p × n` data matrix with observations as columns.
pub fn sample_covariance(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (p, n) = x.shape();
    if p == 0 || n == 0 {
        return Err(Error::domain("data matrix is empty"));
    }
    Ok(symmetrize(x * x.transpose() / n as f64))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::domain(format!("matrix must be square and nonempty, got {:?}", m.shape())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("matrix has non-finite entries"));
    }
    let scale = m.amax().max(1.0);
    let k = m.nrows();
    for j in 0..k {
        for i in (j + 1)..k {
            let d = (m[(i, j)] - m[(j, i)]).abs();
            if d > SYMMETRY_TOL * scale {
                return Err(Error::domain(format!(
                    "matrix is not symmetric: |M[{i},{j}] - M[{j},{i}]| = {d:e}"
                )));
            }
        }
    }
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// `(1/p) Σ λ_i^j`.
pub fn spectral_moment(s: &SpectralSample, j: u32) -> Result<f64> {
    if j == 0 {
        return Err(Error::domain("moment order must be >= 1"));
    }
    Ok(s.moment(j as i32))
}

/// `(1/p) Σ f(λ_i)`.
pub fn lss<F: Fn(f64) -> f64>(s: &SpectralSample, f: F) -> Result<f64> {
    s.lss(f)
}

/// Spatial-sign transform `√p · x_j / ‖x_j‖` applied to every column.
pub fn spatial_sign(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (p, n) = x.shape();
    if p == 0 || n == 0 {
        return Err(Error::domain("data matrix is empty"));
    }
    let root_p = (p as f64).sqrt();
    let mut out = x.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        // Scale by a power of two first so the norm neither overflows nor underflows.
        let amax = col.amax();
        if amax == 0.0 || !amax.is_finite() {
            return Err(Error::domain(format!("column {j} is zero or non-finite")));
        }
        let pow2 = 2f64.powi(-(amax.log2().floor() as i32));
        col *= pow2;
        let norm = col.norm();
        col *= root_p / norm;
    }
    Ok(out)
}

/// Plug-in estimators `(α̌_2, α̌_4)` of `p⁻¹ tr Σ̌²` and `p⁻¹ tr Σ̌⁴` from
/// spatial-sign moments `β̌_1..β̌_4` at ratio `c`.
pub fn alpha_from_moments(b2: f64, b3: f64, b4: f64, c: f64) -> (f64, f64) {
    let alpha2 = b2 - c;
    let alpha4 = b4 - 4.0 * c * b3 - 2.0 * c * b2 * b2 + 10.0 * c * c * b2 - 5.0 * c * c * c;
    (alpha2, alpha4)
}

/// `(α̌_2, α̌_4)` from the spectrum of a spatial-sign covariance `Č B_n`.
pub fn alpha_estimators(s: &SpectralSample) -> Result<(f64, f64)> {
    let b1 = s.moment(1);
    if (b1 - 1.0).abs() > 1e-6 {
        return Err(Error::Contract(format!(
            "first spectral moment is {b1}, expected 1 for a spatial-sign spectrum"
        )));
    }
    Ok(alpha_from_moments(s.moment(2), s.moment(3), s.moment(4), s.ratio()))
}

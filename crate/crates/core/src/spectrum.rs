//! Discrete population spectra: a finite set of positive atoms with weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_TOL: f64 = 1e-12;

/// A discrete probability measure on `(0, ∞)`, used both for the population
/// spectral distribution `H` and for the eigenvalues of a concrete `Σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpectrum", into = "RawSpectrum")]
pub struct DiscreteSpectrum {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSpectrum {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawSpectrum> for DiscreteSpectrum {
    type Error = Error;

    fn try_from(raw: RawSpectrum) -> Result<Self> {
        DiscreteSpectrum::new(raw.atoms, raw.weights)
    }
}

impl From<DiscreteSpectrum> for RawSpectrum {
    fn from(s: DiscreteSpectrum) -> Self {
        RawSpectrum {
            atoms: s.atoms,
            weights: s.weights,
        }
    }
}

impl DiscreteSpectrum {
    /// Build a spectrum from strictly increasing positive atoms and positive
    /// weights summing to one.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::domain("spectrum needs at least one atom"));
        }
        if atoms.len() != weights.len() {
            return Err(Error::domain(format!(
                "spectrum has {} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.iter().any(|&t| !(t.is_finite() && t > 0.0)) {
            return Err(Error::domain("spectrum atoms must be finite and positive"));
        }
        if atoms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("spectrum atoms must be strictly increasing"));
        }
        if weights.iter().any(|&w| !(w.is_finite() && w > 0.0)) {
            return Err(Error::domain("spectrum weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::domain(format!(
                "spectrum weights sum to {total}, expected 1"
            )));
        }
        Ok(DiscreteSpectrum { atoms, weights })
    }

    /// The point mass `δ_t`.
    pub fn point(t: f64) -> Result<Self> {
        Self::new(vec![t], vec![1.0])
    }

    /// `δ_1`, the spectrum of the identity.
    pub fn identity() -> Self {
        DiscreteSpectrum {
            atoms: vec![1.0],
            weights: vec![1.0],
        }
    }

    /// The empirical spectral distribution of a list of positive values
    /// (typically the diagonal of `Σ`). Equal values are merged.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("cannot build a spectrum from no values"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let unit = 1.0 / values.len() as f64;
        let mut atoms: Vec<f64> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for v in sorted {
            match atoms.last() {
                Some(&last) if last == v => *counts.last_mut().unwrap() += 1,
                _ => {
                    atoms.push(v);
                    counts.push(1);
                }
            }
        }
        let weights = counts.iter().map(|&k| k as f64 * unit).collect();
        Self::new(atoms, weights)
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn max_atom(&self) -> f64 {
        *self.atoms.last().expect("spectrum is nonempty")
    }

    pub fn min_atom(&self) -> f64 {
        self.atoms[0]
    }

    /// `γ_j = ∫ t^j dH(t)`.
    pub fn moment(&self, j: i32) -> f64 {
        self.iter().map(|(t, w)| w * t.powi(j)).sum()
    }

    /// Iterate over `(atom, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().zip(self.weights.iter().copied())
    }

    /// Expand into `p` diagonal entries using largest-remainder rounding of
    /// `weight · p`. Returns the entries sorted ascending.
    pub fn expand(&self, p: usize) -> Result<Vec<f64>> {
        if p == 0 {
            return Err(Error::domain("dimension p must be positive"));
        }
        let targets: Vec<f64> = self.weights.iter().map(|w| w * p as f64).collect();
        let mut counts: Vec<usize> = targets.iter().map(|t| (t + 1e-9).floor() as usize).collect();
        let mut assigned: usize = counts.iter().sum();
        if assigned > p {
            return Err(Error::domain("spectrum weights exceed one after rounding"));
        }
        let mut order: Vec<usize> = (0..targets.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = targets[a] - counts[a] as f64;
            let rb = targets[b] - counts[b] as f64;
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if assigned == p {
                break;
            }
            counts[i] += 1;
            assigned += 1;
        }
        Ok(self
            .atoms
            .iter()
            .zip(&counts)
            .flat_map(|(&t, &k)| std::iter::repeat_n(t, k))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(DiscreteSpectrum::new(vec![], vec![]).is_err());
        assert!(DiscreteSpectrum::new(vec![1.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(DiscreteSpectrum::new(vec![2.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(DiscreteSpectrum::new(vec![0.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(DiscreteSpectrum::new(vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
        assert!(DiscreteSpectrum::new(vec![1.0, 2.0], vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn moments_of_two_atom_spectrum() {
        let h = DiscreteSpectrum::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(h.moment(1), 1.5);
        assert_eq!(h.moment(2), 2.5);
        assert_eq!(h.moment(3), 4.5);
    }

    #[test]
    fn expand_and_back() {
        let h = DiscreteSpectrum::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let d = h.expand(200).unwrap();
        assert_eq!(d.len(), 200);
        assert_eq!(d.iter().filter(|&&x| x == 2.0).count(), 100);
        assert_eq!(DiscreteSpectrum::from_values(&d).unwrap(), h);

        let thirds = DiscreteSpectrum::new(vec![1.0, 2.0, 3.0], vec![0.25, 0.25, 0.5]).unwrap();
        let d = thirds.expand(7).unwrap();
        assert_eq!(d.len(), 7);
        assert!(d.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn json_rejects_invalid() {
        let ok: DiscreteSpectrum =
            serde_json::from_str(r#"{"atoms":[1,2],"weights":[0.5,0.5]}"#).unwrap();
        assert_eq!(ok.len(), 2);
        assert!(serde_json::from_str::<DiscreteSpectrum>(r#"{"atoms":[1],"weights":[0.5]}"#).is_err());
    }
}

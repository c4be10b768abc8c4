use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::Scalar;

use super::Density;

/// `⌈C0 · ε^{-2} · ln(1/ε) · m^{1+r}⌉`.
///
/// `eps` may equal `1/2`, the default distortion target of a reduction.
pub fn sample_size(m: usize, r: f64, eps: f64, c0: f64) -> Result<usize> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::arg(format!("eps = {eps} outside (0, 1/2]")));
    }
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(Error::arg(format!("C0 = {c0} must be positive")));
    }
    if m == 0 || !(r >= 1.0) {
        return Err(Error::arg("need m ≥ 1 and r ≥ 1"));
    }
    let n = c0 * eps.powi(-2) * (1.0 / eps).ln() * (m as f64).powf(1.0 + r);
    if n > usize::MAX as f64 / 2.0 {
        return Err(Error::arg("sample size overflows"));
    }
    Ok(n.ceil() as usize)
}

/// `J(x)_k = α_k x_{i_k}`.
///
/// JSON form: `{"indices":[…],"weights":[…]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SamplingMap<T> {
    indices: Vec<usize>,
    weights: Vec<T>,
}

impl<T: Scalar> SamplingMap<T> {
    pub fn new(indices: Vec<usize>, weights: Vec<T>) -> Result<Self> {
        if indices.len() != weights.len() {
            return Err(Error::Dimension {
                expected: indices.len(),
                found: weights.len(),
            });
        }
        if indices.is_empty() {
            return Err(Error::arg("empty sampling map"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > T::zero())) {
            return Err(Error::invalid("weights must be positive and finite"));
        }
        Ok(SamplingMap { indices, weights })
    }

    /// Every atom once with unit weight.
    pub fn identity(n: usize) -> Self {
        SamplingMap {
            indices: (0..n).collect(),
            weights: vec![T::one(); n],
        }
    }

    pub fn n_samples(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Merges repeated atoms by adding weights; the result lists each atom
    /// once in increasing order. `‖Jx‖` is unchanged.
    pub fn consolidate(&self) -> Self {
        let mut merged: BTreeMap<usize, T> = BTreeMap::new();
        for (&i, &w) in self.indices.iter().zip(&self.weights) {
            *merged.entry(i).or_insert(T::zero()) += w;
        }
        SamplingMap {
            indices: merged.keys().copied().collect(),
            weights: merged.values().copied().collect(),
        }
    }

    /// Applies `J` to an element of `ℓ1^N(X)` with blocks of length `block`.
    pub fn apply(&self, element: &[T], block: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(self.indices.len() * block);
        for (&i, &w) in self.indices.iter().zip(&self.weights) {
            out.extend(element[i * block..(i + 1) * block].iter().map(|v| *v * w));
        }
        out
    }

    /// `Σ_k α_k ‖x_{i_k}‖` from atomwise norms of `x`.
    pub fn norm_from_atoms(&self, atom_norms: &[T]) -> T {
        self.indices
            .iter()
            .zip(&self.weights)
            .map(|(&i, &w)| w * atom_norms[i])
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("map serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: SamplingMap<T> = serde_json::from_str(s).map_err(|e| Error::Validation(e.to_string()))?;
        SamplingMap::new(raw.indices, raw.weights)
    }
}

/// Draws `n_samples` atoms i.i.d. with probability `φ_i/N` and weights
/// `α_k = N / (n_samples · φ_{i_k})`, so that `𝔼‖Jx‖ = ‖x‖`.
pub fn sample_and_map<T: Scalar>(phi: &Density<T>, n_samples: usize, seed: u64) -> Result<SamplingMap<T>> {
    if n_samples == 0 {
        return Err(Error::arg("n_samples must be positive"));
    }
    let weights: Vec<f64> = phi.phi().iter().map(|p| p.to_f64_lossy()).collect();
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::arg(format!("density cannot be sampled: {e}")))?;
    let mut rng = seeded(seed, 0);
    let n = T::of(phi.n_atoms() as f64);
    let ns = T::of(n_samples as f64);
    let indices: Vec<usize> = (0..n_samples).map(|_| dist.sample(&mut rng)).collect();
    let alphas = indices.iter().map(|&i| n / (ns * phi.phi()[i])).collect();
    SamplingMap::new(indices, alphas)
}

/// `2 exp(−c² / (4e·A·B·n))` for sums of `n` centered i.i.d. variables with
/// `𝔼|y| ≤ A` and `|y| ≤ B`; valid for `0 ≤ c ≤ 2e·A·n`.
pub fn deviation_tail_bound(c: f64, a: f64, b: f64, n: usize) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && n > 0) {
        return Err(Error::arg("need A, B, n positive"));
    }
    let e = std::f64::consts::E;
    if !(c >= 0.0 && c <= 2.0 * e * a * n as f64) {
        return Err(Error::arg(format!("c = {c} outside [0, 2eAn]")));
    }
    Ok(2.0 * (-c * c / (4.0 * e * a * b * n as f64)).exp())
}

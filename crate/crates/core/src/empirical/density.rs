use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

use super::SubspaceL1X;

/// Density `φ` against the uniform weights `1/N`: `(1/N) Σ φ_i = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Density<T> {
    phi: Vec<T>,
}

impl<T: Scalar> Density<T> {
    pub fn new(phi: Vec<T>) -> Result<Self> {
        if phi.is_empty() {
            return Err(Error::arg("empty density"));
        }
        if phi.iter().any(|p| !(p.is_finite() && *p >= T::zero())) {
            return Err(Error::invalid("density values must be finite and nonnegative"));
        }
        let n = T::of(phi.len() as f64);
        let mean = phi.iter().copied().sum::<T>() / n;
        if (mean - T::one()).abs() > T::of(1e-9) {
            return Err(Error::invalid(format!("density has mean {mean}, expected 1")));
        }
        Ok(Density { phi })
    }

    pub fn uniform(n: usize) -> Self {
        Density { phi: vec![T::one(); n] }
    }

    pub fn n_atoms(&self) -> usize {
        self.phi.len()
    }

    pub fn phi(&self) -> &[T] {
        &self.phi
    }
}

/// `φ_i = (N/m) Σ_j ‖e_j(i)‖^r` for a basis with `Σ_i ‖e_j(i)‖^r = 1`.
///
/// Uses `E`'s inner norm at level one. Each term is divided by its measured
/// total, so the mean is 1 to rounding even when the basis is only normalized
/// to the accepted `1e-8`.
pub fn build_density<T: Scalar>(e: &SubspaceL1X<T>, r: T) -> Result<Density<T>> {
    if !(r >= T::one()) {
        return Err(Error::arg(format!("exponent r = {r} below 1")));
    }
    let level1 = e.with_kind(super::NormKind::Sup)?;
    let n = e.n_atoms();
    let mut phi = vec![T::zero(); n];
    for (j, b) in level1.basis().iter().enumerate() {
        let norms: Vec<T> = level1.atom_norms(b).into_iter().map(|v| v.powf(r)).collect();
        let total: T = norms.iter().copied().sum();
        if (total - T::one()).abs() > T::of(1e-8) {
            return Err(Error::Validation(format!(
                "basis vector {j} has Σ‖e(i)‖^r = {total}, expected 1"
            )));
        }
        for (p, v) in phi.iter_mut().zip(norms) {
            *p += v / total;
        }
    }
    let scale = T::of(n as f64) / T::of(e.dim() as f64);
    phi.iter_mut().for_each(|p| *p *= scale);
    Ok(Density { phi })
}

/// `(Se)(i) = φ_i^{-1/r} e(i)`, with `0/0 = 0`.
pub fn change_of_density<T: Scalar>(element: &[T], phi: &Density<T>, r: T) -> Result<Vec<T>> {
    let n = phi.n_atoms();
    if !element.len().is_multiple_of(n) {
        return Err(Error::Dimension {
            expected: n,
            found: element.len(),
        });
    }
    let block = element.len() / n;
    let mut out = element.to_vec();
    for (i, (chunk, &p)) in out.chunks_exact_mut(block).zip(&phi.phi).enumerate() {
        if p == T::zero() {
            if chunk.iter().any(|v| *v != T::zero()) {
                return Err(Error::Support { atom: i });
            }
        } else {
            let s = p.powf(-T::one() / r);
            chunk.iter_mut().for_each(|v| *v *= s);
        }
    }
    Ok(out)
}

/// `((1/N) Σ_i ‖e(i)‖^r)^{1/r}` from atomwise norms.
pub fn mu_norm<T: Scalar>(atom_norms: &[T], r: T) -> T {
    let n = T::of(atom_norms.len() as f64);
    (atom_norms.iter().map(|v| v.powf(r)).sum::<T>() / n).powf(T::one() / r)
}

/// `(Σ_i (φ_i/N) ‖e(i)‖^r)^{1/r}` from atomwise norms.
pub fn nu_norm<T: Scalar>(atom_norms: &[T], phi: &Density<T>, r: T) -> T {
    let n = T::of(atom_norms.len() as f64);
    (atom_norms.iter().zip(&phi.phi).map(|(v, p)| *p * v.powf(r)).sum::<T>() / n).powf(T::one() / r)
}

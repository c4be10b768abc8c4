//! Dimension reduction for finite-dimensional subspaces of `ℓ1^N(X)` by
//! importance sampling of atoms.
//!
//! An element of `ℓ1^N(X)` is a flat array of `N` consecutive blocks, one per
//! atom, with norm `Σ_i ‖x_i‖_X`.

mod auerbach;
mod density;
mod distortion;
mod sampling;
mod xnorm;

pub use auerbach::{approximate_auerbach, coefficient_bound, AuerbachBasis};
pub use density::{build_density, change_of_density, mu_norm, nu_norm, Density};
pub use distortion::{
    measure_distortion, measure_distortion_samples, reduce_until, DistortionReport, ReduceError, ReducePolicy,
    Reduction,
};
pub use sampling::{deviation_tail_bound, sample_and_map, sample_size, SamplingMap};
pub use xnorm::{block_s1_estimate, sup_norm, XNormEstimate};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{gram_schmidt_rows, DenseMatrix};
use crate::Scalar;

/// Inner space `X` of `ℓ1^N(X)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormKind {
    /// `ℓ∞^K`, exact norms.
    Sup,
    /// `S_1^d[ℓ∞^K]`: `K` real `d×d` matrices per atom, estimated norms.
    BlockS1 { d: usize },
}

impl NormKind {
    pub fn level(&self) -> usize {
        match self {
            NormKind::Sup => 1,
            NormKind::BlockS1 { d } => *d,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, NormKind::Sup)
    }
}

/// An `m`-dimensional subspace of `ℓ1^N(ℓ∞^K)`, optionally viewed at matrix
/// level `d`, where its elements are `Σ_j e_j ⊗ A_j` with `A_j ∈ M_d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SubspaceL1X<T> {
    n_atoms: usize,
    k: usize,
    kind: NormKind,
    basis: Vec<Vec<T>>,
}

impl<T: Scalar> SubspaceL1X<T> {
    /// `basis[j]` has length `N·K`. Fails unless the basis has full numerical rank.
    pub fn new(n_atoms: usize, k: usize, kind: NormKind, basis: Vec<Vec<T>>) -> Result<Self> {
        if n_atoms == 0 || k == 0 || basis.is_empty() {
            return Err(Error::Shape("empty subspace".into()));
        }
        if kind.level() == 0 {
            return Err(Error::arg("matrix level must be positive"));
        }
        for b in &basis {
            if b.len() != n_atoms * k {
                return Err(Error::Dimension {
                    expected: n_atoms * k,
                    found: b.len(),
                });
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite basis coefficient"));
            }
        }
        let m = basis.len();
        let a = DenseMatrix::new(m, n_atoms * k, basis.concat())?;
        let scale = a.max_row_norm();
        let rank = gram_schmidt_rows(&a, T::of(1e-10) * scale).rows();
        if rank < m {
            return Err(Error::Rank {
                expected: m,
                found: rank,
            });
        }
        Ok(SubspaceL1X {
            n_atoms,
            k,
            kind,
            basis,
        })
    }

    /// Same subspace viewed through a different inner norm.
    pub fn with_kind(&self, kind: NormKind) -> Result<Self> {
        if kind.level() == 0 {
            return Err(Error::arg("matrix level must be positive"));
        }
        Ok(SubspaceL1X { kind, ..self.clone() })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> NormKind {
        self.kind
    }

    pub fn basis(&self) -> &[Vec<T>] {
        &self.basis
    }

    /// Length of one atom block of a level-`d` element: `K·d²`.
    pub fn block_len(&self) -> usize {
        let d = self.kind.level();
        self.k * d * d
    }

    /// Number of real coefficients of an element: `m·d²`.
    pub fn coeff_len(&self) -> usize {
        let d = self.kind.level();
        self.dim() * d * d
    }

    /// `Σ_j e_j ⊗ A_j`, where `coeffs[j·d² ..]` holds `A_j` row-major.
    ///
    /// Atom `i` of the result stores `Σ_j e_j(i,k) A_j` for `k = 0..K`.
    pub fn combine(&self, coeffs: &[T]) -> Vec<T> {
        assert_eq!(coeffs.len(), self.coeff_len(), "coefficient length");
        let dd = self.kind.level().pow(2);
        let mut out = vec![T::zero(); self.n_atoms * self.block_len()];
        for (j, e) in self.basis.iter().enumerate() {
            let a = &coeffs[j * dd..(j + 1) * dd];
            for (p, &c) in e.iter().enumerate() {
                if c == T::zero() {
                    continue;
                }
                for (o, &av) in out[p * dd..(p + 1) * dd].iter_mut().zip(a) {
                    *o += c * av;
                }
            }
        }
        out
    }

    /// Norm of one atom block in `X`; the lower estimate at matrix level.
    pub fn atom_norm(&self, block: &[T]) -> T {
        match self.kind {
            NormKind::Sup => sup_norm(block),
            NormKind::BlockS1 { d } => block_s1_estimate(block, self.k, d).lower,
        }
    }

    /// `Σ_i ‖x_i‖_X`.
    pub fn norm(&self, element: &[T]) -> T {
        element.chunks_exact(self.block_len()).map(|b| self.atom_norm(b)).sum()
    }

    /// Atomwise norms `‖x_i‖_X`.
    pub fn atom_norms(&self, element: &[T]) -> Vec<T> {
        element
            .chunks_exact(self.block_len())
            .map(|b| self.atom_norm(b))
            .collect()
    }
}

use serde::{Deserialize, Serialize};

use crate::numkit::{svd, symmetric_apply, DenseMatrix};
use crate::Scalar;

const ALTERNATING_STEPS: usize = 30;

pub fn sup_norm<T: Scalar>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

/// Two-sided estimate of the `S_1^d[ℓ∞^K]` norm of one block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XNormEstimate<T> {
    /// Attained by an explicit norm-one functional.
    pub lower: T,
    /// Attained by an explicit factorization.
    pub upper: T,
}

/// Polar factor `U Vᵀ` on the nonzero singular values, and the trace norm.
fn polar<T: Scalar>(z: &DenseMatrix<T>) -> (DenseMatrix<T>, T) {
    let f = svd(z);
    let smax = f.s.first().copied().unwrap_or(T::zero());
    let tol = smax * T::eps() * T::of(16.0);
    let keep: Vec<usize> = (0..f.s.len()).filter(|&i| f.s[i] > tol).collect();
    let p = DenseMatrix::from_fn(z.rows(), z.cols(), |i, j| {
        keep.iter().map(|&k| f.u[(i, k)] * f.v[(j, k)]).sum()
    });
    (p, f.s.iter().copied().sum())
}

/// Norm estimate for `x = (x_1, …, x_K)`, `x_k ∈ M_d`, stored as `K`
/// consecutive row-major `d×d` blocks.
///
/// The lower bound pairs `x` with `u_k = a_k b_k` where the row `[a_1 … a_K]`
/// and the column `[b_1; …; b_K]` are contractions, updating each side by a
/// polar decomposition in turn. The upper bound is the best of
/// `Σ‖x_k‖_1`, `d·max‖x_k‖_∞` and the factorization through
/// `(Σ|x_k*|)^{1/2}` and `(Σ|x_k|)^{1/2}`.
pub fn block_s1_estimate<T: Scalar>(x: &[T], k: usize, d: usize) -> XNormEstimate<T> {
    assert_eq!(x.len(), k * d * d, "block length");
    if x.iter().all(|v| *v == T::zero()) {
        return XNormEstimate {
            lower: T::zero(),
            upper: T::zero(),
        };
    }
    let mats: Vec<DenseMatrix<T>> = x
        .chunks_exact(d * d)
        .map(|c| DenseMatrix::new(d, d, c.to_vec()).expect("square block"))
        .collect();
    let svds: Vec<_> = mats.iter().map(svd).collect();
    let traces: Vec<T> = svds.iter().map(|f| f.s.iter().copied().sum()).collect();
    let ops: Vec<T> = svds.iter().map(|f| f.s.first().copied().unwrap_or(T::zero())).collect();

    let lower = alternating_lower(&mats, &traces, d);

    let sum_trace: T = traces.iter().copied().sum();
    let op_bound = T::of(d as f64) * ops.iter().copied().fold(T::zero(), T::max);
    let upper = sum_trace.min(op_bound).min(canonical_factorization(&mats, &svds, d));
    XNormEstimate {
        lower,
        upper: upper.max(lower),
    }
}

fn alternating_lower<T: Scalar>(mats: &[DenseMatrix<T>], traces: &[T], d: usize) -> T {
    let k = mats.len();
    let kf = T::of(k as f64);
    // Starts: the block of largest trace norm alone, and the uniform column.
    let kmax = (0..k).fold(0, |b, i| if traces[i] > traces[b] { i } else { b });
    let starts: [Vec<DenseMatrix<T>>; 2] = [
        (0..k)
            .map(|i| {
                if i == kmax {
                    DenseMatrix::identity(d)
                } else {
                    DenseMatrix::zeros(d, d)
                }
            })
            .collect(),
        (0..k)
            .map(|_| DenseMatrix::identity(d).scaled(T::one() / kf.sqrt()))
            .collect(),
    ];
    let mut best = T::zero();
    for mut b in starts {
        let mut value = T::zero();
        for _ in 0..ALTERNATING_STEPS {
            // Row step: Z = [x_1 b_1ᵀ … x_K b_Kᵀ], a = polar(Z).
            let z = DenseMatrix::from_fn(d, d * k, |i, c| {
                let (blk, j) = (c / d, c % d);
                (0..d).map(|l| mats[blk][(i, l)] * b[blk][(j, l)]).sum()
            });
            let (pa, _) = polar(&z);
            let a: Vec<DenseMatrix<T>> = (0..k)
                .map(|blk| DenseMatrix::from_fn(d, d, |i, j| pa[(i, blk * d + j)]))
                .collect();
            // Column step: W = [a_1ᵀ x_1; …; a_Kᵀ x_K], b = polar(W).
            let w = DenseMatrix::from_fn(d * k, d, |r, j| {
                let (blk, i) = (r / d, r % d);
                (0..d).map(|l| a[blk][(l, i)] * mats[blk][(l, j)]).sum()
            });
            let (pb, next) = polar(&w);
            b = (0..k)
                .map(|blk| DenseMatrix::from_fn(d, d, |i, j| pb[(blk * d + i, j)]))
                .collect();
            let done = next <= value * (T::one() + T::of(1e-12));
            value = value.max(next);
            if done {
                break;
            }
        }
        best = best.max(value);
    }
    best
}

fn canonical_factorization<T: Scalar>(mats: &[DenseMatrix<T>], svds: &[crate::numkit::Svd<T>], d: usize) -> T {
    // |x*| = U S Uᵀ and |x| = V S Vᵀ.
    let mut left = DenseMatrix::zeros(d, d);
    let mut right = DenseMatrix::zeros(d, d);
    for f in svds {
        for (r, &s) in f.s.iter().enumerate() {
            for i in 0..d {
                for j in 0..d {
                    left[(i, j)] += f.u[(i, r)] * s * f.u[(j, r)];
                    right[(i, j)] += f.v[(i, r)] * s * f.v[(j, r)];
                }
            }
        }
    }
    // α = P/‖P‖₂ with P = left^{1/2}, so ‖P‖₂² = tr(left); α⁺ = ‖P‖₂ · left^{-1/2}.
    let inv_sqrt = |m: &DenseMatrix<T>| {
        let scale = m.max_abs();
        let tol = scale * T::eps() * T::of(64.0);
        symmetric_apply(m, |l| if l > tol { T::one() / l.sqrt() } else { T::zero() })
    };
    let (Ok(li), Ok(ri)) = (inv_sqrt(&left), inv_sqrt(&right)) else {
        return T::infinity();
    };
    let scale = (left.trace() * right.trace()).sqrt();
    mats.iter()
        .map(|x| {
            let y = li.matmul(x).and_then(|t| t.matmul(&ri)).expect("square blocks");
            scale * svd(&y).s.first().copied().unwrap_or(T::zero())
        })
        .fold(T::zero(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian, seeded};

    fn random_block(seed: u64, k: usize, d: usize) -> Vec<f64> {
        let mut rng = seeded(seed, 0);
        (0..k * d * d).map(|_| gaussian(&mut rng)).collect()
    }

    #[test]
    fn level_one_is_sup_norm() {
        let x = [0.5f64, -3.0, 2.0];
        let e = block_s1_estimate(&x, 3, 1);
        assert!((e.lower - 3.0).abs() < 1e-12);
        assert!((e.upper - 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_block_is_trace_norm() {
        for s in 0..5 {
            let x = random_block(s, 1, 4);
            let tn = crate::numkit::trace_norm(&DenseMatrix::new(4, 4, x.clone()).unwrap());
            let e = block_s1_estimate(&x, 1, 4);
            assert!((e.lower - tn).abs() < 1e-9 * tn);
            assert!((e.upper - tn).abs() < 1e-9 * tn);
        }
    }

    #[test]
    fn orthogonal_supports_add() {
        // x_1 = e_0 e_0ᵀ, x_2 = e_1 e_1ᵀ in M_2: norm 2.
        let x = [1.0f64, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let e = block_s1_estimate(&x, 2, 2);
        assert!((e.lower - 2.0).abs() < 1e-9, "{e:?}");
        assert!((e.upper - 2.0).abs() < 1e-9, "{e:?}");
    }

    #[test]
    fn bounds_are_ordered_and_bracket_simple_bounds() {
        for s in 0..10 {
            let (k, d) = (3, 3);
            let x = random_block(100 + s, k, d);
            let e = block_s1_estimate(&x, k, d);
            assert!(e.lower <= e.upper * (1.0 + 1e-9));
            let traces: Vec<f64> = x
                .chunks(d * d)
                .map(|c| crate::numkit::trace_norm(&DenseMatrix::new(d, d, c.to_vec()).unwrap()))
                .collect();
            let max_t = traces.iter().cloned().fold(0.0, f64::max);
            assert!(e.lower >= max_t * (1.0 - 1e-12));
            assert!(e.upper <= traces.iter().sum::<f64>() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn estimates_are_homogeneous() {
        let x = random_block(7, 2, 3);
        let y: Vec<f64> = x.iter().map(|v| -2.5 * v).collect();
        let (a, b) = (block_s1_estimate(&x, 2, 3), block_s1_estimate(&y, 2, 3));
        assert!((b.lower - 2.5 * a.lower).abs() < 1e-9 * b.lower);
        assert!((b.upper - 2.5 * a.upper).abs() < 1e-9 * b.upper);
    }
}

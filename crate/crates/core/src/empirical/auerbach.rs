use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome, Variable};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{symmetric_eigen, DenseMatrix};
use crate::Scalar;

use super::{NormKind, SubspaceL1X};

/// Basis vectors are replaced only when their functional exceeds `1 + tol`.
const REPLACE_TOL: f64 = 1e-9;

/// A normalized basis with a certified coefficient bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AuerbachBasis<T> {
    /// Same span and inner norm as the input, each vector of unit `ℓ1^N(X)` norm.
    pub subspace: SubspaceL1X<T>,
    /// `max_i ‖λ_i‖` over the coordinate functionals: every unit vector of
    /// the span has coefficients bounded by `theta`.
    pub theta: T,
    /// `‖λ_i‖` for each basis vector.
    pub functional_norms: Vec<T>,
    /// `theta` before any replacement and after each accepted one.
    pub theta_history: Vec<T>,
    /// `ln |det|` gained by the replacements, relative to the normalized input.
    pub log_det_gain: T,
}

/// Cut-loop stops once the relaxed optimum has `ℓ1^N(X)` norm within this of 1.
const CUT_TOL: f64 = 1e-11;
const MAX_CUTS: usize = 100_000;

/// Rows `(e_j(x,k))_j` of the basis, grouped by atom, zero rows dropped.
fn atom_rows(basis: &[Vec<f64>], n: usize, k: usize) -> Vec<Vec<Vec<f64>>> {
    (0..n)
        .map(|x| {
            (0..k)
                .map(|kk| basis.iter().map(|b| b[x * k + kk]).collect::<Vec<f64>>())
                .filter(|r| r.iter().any(|v| *v != 0.0))
                .collect()
        })
        .collect()
}

/// `‖Σ c_j e_j‖` and a subgradient `g` with `⟨g, c⟩ = ‖Σ c_j e_j‖` and
/// `⟨g, c'⟩ ≤ ‖Σ c'_j e_j‖` for every `c'`.
fn norm_and_cut(rows: &[Vec<Vec<f64>>], c: &[f64]) -> (f64, Vec<f64>) {
    let mut total = 0.0;
    let mut g = vec![0.0; c.len()];
    for atom in rows {
        let mut best = (0.0, None);
        for r in atom {
            let v: f64 = r.iter().zip(c).map(|(a, b)| a * b).sum();
            if best.1.is_none() || v.abs() > best.0 {
                best = (v.abs(), Some((r, v.signum())));
            }
        }
        if let Some((r, sign)) = best.1 {
            total += best.0;
            for (gj, rj) in g.iter_mut().zip(r) {
                *gj += sign * rj;
            }
        }
    }
    (total, g)
}

fn lp_err(e: microlp::Error) -> Error {
    Error::Numerical(format!("linear program failed: {e:?}"))
}

/// Norm of each coordinate functional `λ_i` of the basis, with a unit vector
/// attaining it, written as coefficients in the basis.
///
/// `‖λ_i‖ = max c_i` over `{c : ‖Σ_j c_j e_j‖ ≤ 1}`. The unit ball is a
/// polytope in `ℝ^m`; it is approached from outside by subgradient cuts,
/// inside a box that provably contains it, until the relaxed maximizer lies
/// on the ball up to a relative `1e-11`. The returned norm is the relaxed
/// optimum, an upper bound; the returned vector is the maximizer rescaled
/// onto the unit sphere.
pub fn coefficient_bound<T: Scalar>(e: &SubspaceL1X<T>) -> Result<Vec<(T, Vec<T>)>> {
    let (n, k, m) = (e.n_atoms(), e.k(), e.dim());
    let basis: Vec<Vec<f64>> = e
        .basis()
        .iter()
        .map(|b| b.iter().map(|v| v.to_f64_lossy()).collect())
        .collect();
    let rows = atom_rows(&basis, n, k);
    // ‖x‖ ≥ ‖x‖_2 / √(NK) ≥ σ_min ‖c‖_2 / √(NK), so the ball sits in this box.
    let gram = DenseMatrix::from_fn(m, m, |i, j| {
        basis[i].iter().zip(&basis[j]).map(|(a, b)| a * b).sum::<f64>()
    });
    let lambda_min = symmetric_eigen(&gram)?.values.last().copied().unwrap_or(0.0);
    if !(lambda_min > 0.0) {
        return Err(Error::Rank {
            expected: m,
            found: m - 1,
        });
    }
    let radius = 2.0 * ((n * k) as f64).sqrt() / lambda_min.sqrt();
    (0..m)
        .map(|target| {
            let mut lp = Problem::new(OptimizationDirection::Maximize);
            let c: Vec<Variable> = (0..m)
                .map(|j| lp.add_var(if j == target { 1.0 } else { 0.0 }, (-radius, radius)))
                .collect();
            for j in 0..m {
                for sign in [1.0, -1.0] {
                    let mut dir = vec![0.0; m];
                    dir[j] = sign;
                    let (_, g) = norm_and_cut(&rows, &dir);
                    lp.add_constraint(c.iter().copied().zip(g).collect::<Vec<_>>(), ComparisonOp::Le, 1.0);
                }
            }
            let mut sol = match lp.solve().map_err(lp_err)? {
                SolveOutcome::Solution(s) => s,
                SolveOutcome::Interrupted(_) => return Err(Error::Numerical("linear program interrupted".into())),
            };
            for _ in 0..MAX_CUTS {
                let point: Vec<f64> = c.iter().map(|&v| sol.var_value(v)).collect();
                let (norm, g) = norm_and_cut(&rows, &point);
                if norm <= 1.0 + CUT_TOL {
                    let scale = norm.max(1.0);
                    return Ok((T::of(point[target]), point.iter().map(|v| T::of(v / scale)).collect()));
                }
                sol = match sol
                    .add_constraint(c.iter().copied().zip(g).collect::<Vec<_>>(), ComparisonOp::Le, 1.0)
                    .map_err(lp_err)?
                {
                    SolveOutcome::Solution(s) => s,
                    SolveOutcome::Interrupted(_) => return Err(Error::Numerical("linear program interrupted".into())),
                };
            }
            Err(Error::Numerical("coefficient bound did not converge".into()))
        })
        .collect()
}

fn normalize<T: Scalar>(e: &SubspaceL1X<T>) -> Result<Vec<Vec<T>>> {
    let level1 = e.with_kind(NormKind::Sup)?;
    e.basis()
        .iter()
        .map(|b| {
            let nrm = level1.norm(b);
            if nrm == T::zero() {
                return Err(Error::Rank {
                    expected: e.dim(),
                    found: e.dim() - 1,
                });
            }
            Ok(b.iter().map(|v| *v / nrm).collect())
        })
        .collect()
}

/// Normalizes the basis of `E` and improves it towards an Auerbach basis.
///
/// Each step takes the coordinate functional of largest norm `‖λ_i‖ > 1`
/// and replaces `e_i` by a unit vector attaining it, which multiplies the
/// coefficient determinant by `‖λ_i‖`. A step is kept only if `theta` does not
/// increase; otherwise the next candidate is tried. At most `iters` steps are
/// taken. Norms are computed at level one.
pub fn approximate_auerbach<T: Scalar>(e: &SubspaceL1X<T>, iters: usize) -> Result<AuerbachBasis<T>> {
    if iters == 0 {
        return Err(Error::arg("iters must be at least 1"));
    }
    let mut current = SubspaceL1X::new(e.n_atoms(), e.k(), NormKind::Sup, normalize(e)?)?;
    let mut bounds = coefficient_bound(&current)?;
    let theta_of = |b: &[(T, Vec<T>)]| b.iter().fold(T::zero(), |m, (v, _)| m.max(*v));
    let mut theta = theta_of(&bounds);
    let mut history = vec![theta];
    let mut log_det = T::zero();
    for _ in 0..iters {
        let mut order: Vec<usize> = (0..current.dim())
            .filter(|&i| bounds[i].0 > T::one() + T::of(REPLACE_TOL))
            .collect();
        order.sort_by(|&a, &b| {
            bounds[b]
                .0
                .partial_cmp(&bounds[a].0)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut accepted = false;
        for i in order {
            let v = current.combine(&bounds[i].1);
            let nrm = current.norm(&v);
            let mut basis = current.basis().to_vec();
            basis[i] = v.iter().map(|x| *x / nrm).collect();
            let Ok(candidate) = SubspaceL1X::new(e.n_atoms(), e.k(), NormKind::Sup, basis) else {
                continue;
            };
            let new_bounds = coefficient_bound(&candidate)?;
            let new_theta = theta_of(&new_bounds);
            if new_theta <= theta {
                log_det += bounds[i].0.ln();
                current = candidate;
                bounds = new_bounds;
                theta = new_theta;
                history.push(theta);
                accepted = true;
                break;
            }
        }
        if !accepted {
            break;
        }
    }
    Ok(AuerbachBasis {
        subspace: current.with_kind(e.kind())?,
        theta,
        functional_norms: bounds.into_iter().map(|b| b.0).collect(),
        theta_history: history,
        log_det_gain: log_det,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian, seeded};

    fn random_subspace(seed: u64, n: usize, k: usize, m: usize) -> SubspaceL1X<f64> {
        let mut rng = seeded(seed, 0);
        let basis = (0..m)
            .map(|_| (0..n * k).map(|_| gaussian(&mut rng)).collect())
            .collect();
        SubspaceL1X::new(n, k, NormKind::Sup, basis).unwrap()
    }

    /// `max c_i` subject to `Σ_x t_x ≤ 1`, `|Σ_j c_j e_j(x,k)| ≤ t_x`, as one LP.
    fn full_lp_bound(e: &SubspaceL1X<f64>, target: usize) -> f64 {
        let (n, k, m) = (e.n_atoms(), e.k(), e.dim());
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let c: Vec<_> = (0..m)
            .map(|j| lp.add_var(if j == target { 1.0 } else { 0.0 }, (f64::NEG_INFINITY, f64::INFINITY)))
            .collect();
        let mut total = Vec::new();
        for x in 0..n {
            let t = lp.add_var(0.0, (0.0, f64::INFINITY));
            total.push((t, 1.0));
            for kk in 0..k {
                let row: Vec<_> = (0..m).map(|j| (c[j], e.basis()[j][x * k + kk])).collect();
                let mut up = row.clone();
                up.push((t, -1.0));
                lp.add_constraint(up, ComparisonOp::Le, 0.0);
                let mut down: Vec<_> = row.iter().map(|&(v, a)| (v, -a)).collect();
                down.push((t, -1.0));
                lp.add_constraint(down, ComparisonOp::Le, 0.0);
            }
        }
        lp.add_constraint(total, ComparisonOp::Le, 1.0);
        lp.solve().unwrap().solution().unwrap().objective()
    }

    #[test]
    fn cuts_match_single_linear_program() {
        for (seed, m) in [(10, 2), (11, 3), (12, 4)] {
            let sub = random_subspace(seed, 20, 3, m);
            let bounds = coefficient_bound(&sub).unwrap();
            for (i, (value, coeffs)) in bounds.iter().enumerate() {
                let oracle = full_lp_bound(&sub, i);
                assert!((value - oracle).abs() <= 1e-8 * oracle, "{value} vs {oracle}");
                let x = sub.combine(coeffs);
                assert!(sub.norm(&x) <= 1.0 + 1e-12);
                assert!((coeffs[i] - oracle).abs() <= 1e-8 * oracle);
            }
        }
    }

    #[test]
    fn coordinate_atoms_are_auerbach() {
        let n = 6;
        let basis: Vec<Vec<f64>> = [1, 3, 4]
            .iter()
            .map(|&a| (0..n).map(|i| if i == a { -2.0 } else { 0.0 }).collect())
            .collect();
        let sub = SubspaceL1X::new(n, 1, NormKind::Sup, basis).unwrap();
        let out = approximate_auerbach(&sub, 5).unwrap();
        assert!((out.theta - 1.0).abs() < 1e-9);
        for (j, &a) in [1, 3, 4].iter().enumerate() {
            assert!((out.subspace.basis()[j][a] + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_dimensional_has_unit_theta() {
        let sub = random_subspace(1, 10, 2, 1);
        let out = approximate_auerbach(&sub, 3).unwrap();
        assert!((out.theta - 1.0).abs() < 1e-9);
    }

    #[test]
    fn theta_is_monotone_and_bounded() {
        let sub = random_subspace(2, 32, 2, 3);
        let out = approximate_auerbach(&sub, 20).unwrap();
        assert!(out.theta_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.theta <= 3.0);
        assert!(out.theta >= 1.0 - 1e-9);
        assert!(out.log_det_gain >= 0.0);
        let level1 = out.subspace.with_kind(NormKind::Sup).unwrap();
        for b in out.subspace.basis() {
            assert!((level1.norm(b) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn coefficient_bound_certifies_random_vectors() {
        let sub = random_subspace(3, 16, 3, 3);
        let out = approximate_auerbach(&sub, 10).unwrap();
        let mut rng = seeded(4, 0);
        for _ in 0..200 {
            let c: Vec<f64> = (0..3).map(|_| gaussian(&mut rng)).collect();
            let x = out.subspace.combine(&c);
            let nrm = out.subspace.norm(&x);
            for (ci, li) in c.iter().zip(&out.functional_norms) {
                assert!(ci.abs() <= li * nrm * (1.0 + 1e-7));
            }
        }
    }
}

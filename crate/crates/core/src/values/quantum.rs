use serde::{Deserialize, Serialize};

use crate::boolean_cube::{is_power_of_two, CosetTable};
use crate::error::{Error, Result};
use crate::games::BellTensor;
use crate::numkit::{symmetric_eigen, DenseMatrix};
use crate::Scalar;

/// Tolerance for PSD and completeness checks on measurement operators.
pub const POVM_TOL: f64 = 1e-10;

/// Real projective measurements of dimension `d` for both players, used
/// with the maximally entangled state.
///
/// Serialized as `{"d":…, "alice":[question][answer][row][col], "bob":…}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StrategyFile<T>", into = "StrategyFile<T>", bound = "T: Scalar")]
pub struct ProjectiveStrategyME<T> {
    d: usize,
    alice: Vec<Vec<DenseMatrix<T>>>,
    bob: Vec<Vec<DenseMatrix<T>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct StrategyFile<T> {
    d: usize,
    alice: Vec<Vec<Vec<Vec<T>>>>,
    bob: Vec<Vec<Vec<Vec<T>>>>,
}

fn to_rows<T: Scalar>(side: &[Vec<DenseMatrix<T>>]) -> Vec<Vec<Vec<Vec<T>>>> {
    side.iter()
        .map(|q| {
            q.iter()
                .map(|e| (0..e.rows()).map(|i| e.row(i).to_vec()).collect())
                .collect()
        })
        .collect()
}

fn from_rows<T: Scalar>(side: Vec<Vec<Vec<Vec<T>>>>) -> Result<Vec<Vec<DenseMatrix<T>>>> {
    side.into_iter()
        .map(|q| q.into_iter().map(|e| DenseMatrix::from_rows(&e)).collect())
        .collect()
}

impl<T: Scalar> TryFrom<StrategyFile<T>> for ProjectiveStrategyME<T> {
    type Error = Error;

    fn try_from(f: StrategyFile<T>) -> Result<Self> {
        ProjectiveStrategyME::new(f.d, from_rows(f.alice)?, from_rows(f.bob)?)
    }
}

impl<T: Scalar> From<ProjectiveStrategyME<T>> for StrategyFile<T> {
    fn from(s: ProjectiveStrategyME<T>) -> Self {
        StrategyFile {
            d: s.d,
            alice: to_rows(&s.alice),
            bob: to_rows(&s.bob),
        }
    }
}

impl<T: Scalar> ProjectiveStrategyME<T> {
    /// Checks shapes only; see [`validate`](Self::validate) for the POVM conditions.
    pub fn new(d: usize, alice: Vec<Vec<DenseMatrix<T>>>, bob: Vec<Vec<DenseMatrix<T>>>) -> Result<Self> {
        if d == 0 {
            return Err(Error::arg("dimension must be positive"));
        }
        for e in alice.iter().chain(&bob).flatten() {
            if e.rows() != d || e.cols() != d {
                return Err(Error::Shape(format!(
                    "operator is {}x{}, expected {d}x{d}",
                    e.rows(),
                    e.cols()
                )));
            }
        }
        Ok(ProjectiveStrategyME { d, alice, bob })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn alice(&self) -> &[Vec<DenseMatrix<T>>] {
        &self.alice
    }

    pub fn bob(&self) -> &[Vec<DenseMatrix<T>>] {
        &self.bob
    }

    /// Every operator is symmetric PSD and each question's operators sum to `I`.
    pub fn validate(&self) -> Result<()> {
        let tol = T::of(POVM_TOL);
        let id = DenseMatrix::identity(self.d);
        for (side, ops) in [("alice", &self.alice), ("bob", &self.bob)] {
            for (x, q) in ops.iter().enumerate() {
                let mut total = DenseMatrix::zeros(self.d, self.d);
                for (a, e) in q.iter().enumerate() {
                    let eig = symmetric_eigen(e)
                        .map_err(|err| Error::Validation(format!("{side} question {x} answer {a}: {err}")))?;
                    let min = eig.values.last().copied().unwrap_or(T::zero());
                    if min < -tol {
                        return Err(Error::Validation(format!(
                            "{side} question {x} answer {a}: eigenvalue {min} below zero"
                        )));
                    }
                    total = total.add(e)?;
                }
                let dev = total.sub(&id)?.max_abs();
                if dev > tol {
                    return Err(Error::Validation(format!(
                        "{side} question {x}: operators miss the identity by {dev}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Conjugates every operator by `Q`: `E ↦ Q E Qᵀ`.
    pub fn conjugated(&self, q: &DenseMatrix<T>) -> Result<Self> {
        let qt = q.transpose();
        let conj = |side: &[Vec<DenseMatrix<T>>]| -> Result<Vec<Vec<DenseMatrix<T>>>> {
            side.iter()
                .map(|ops| ops.iter().map(|e| q.matmul(e)?.matmul(&qt)).collect())
                .collect()
        };
        ProjectiveStrategyME::new(self.d, conj(&self.alice)?, conj(&self.bob)?)
    }
}

/// The unit vector `h_x = n^{-1/2} ((−1)^{x_i})_i`.
pub fn sign_vector<T: Scalar>(n: u32, x: u64) -> Vec<T> {
    let c = T::one() / T::of(n as f64).sqrt();
    (0..n).map(|i| if (x >> i) & 1 == 1 { -c } else { c }).collect()
}

/// Rank-one projections `h_x h_xᵀ`, one measurement per coset with answers
/// ordered by position in the coset; the same family for both players.
pub fn kv_me_strategy<T: Scalar>(cosets: &CosetTable) -> ProjectiveStrategyME<T> {
    let n = cosets.n();
    let side: Vec<Vec<DenseMatrix<T>>> = (0..cosets.num_cosets())
        .map(|c| {
            cosets
                .members(c)
                .iter()
                .map(|&x| {
                    let h = sign_vector::<T>(n, x);
                    DenseMatrix::outer(&h, &h)
                })
                .collect()
        })
        .collect();
    ProjectiveStrategyME::new(n as usize, side.clone(), side).expect("shapes are consistent")
}

/// Optimal two-dimensional CHSH strategy: Alice measures at angles `0, π/4`,
/// Bob at `±π/8`, answer `a` selecting the basis vector at `θ + aπ/2`.
pub fn chsh_optimal_strategy<T: Scalar>() -> ProjectiveStrategyME<T> {
    let basis = |theta: f64| -> Vec<DenseMatrix<T>> {
        [theta, theta + std::f64::consts::FRAC_PI_2]
            .iter()
            .map(|&t| {
                let v = [T::of(t.cos()), T::of(t.sin())];
                DenseMatrix::outer(&v, &v)
            })
            .collect()
    };
    let pi = std::f64::consts::PI;
    ProjectiveStrategyME::new(
        2,
        vec![basis(0.0), basis(pi / 4.0)],
        vec![basis(pi / 8.0), basis(-pi / 8.0)],
    )
    .expect("shapes are consistent")
}

/// `Σ M(x,a,y,b) (1/d) tr(E_x^a (F_y^b)ᵀ)`: the value of `M` on the
/// behavior of `strat` with the maximally entangled state.
///
/// Answers without an operator contribute zero; operators beyond the tensor's
/// answer range are ignored.
pub fn me_state_value<T: Scalar>(m: &BellTensor<T>, strat: &ProjectiveStrategyME<T>) -> Result<T> {
    let (n_a, k_a, n_b, k_b) = m.shape();
    if strat.alice.len() != n_a || strat.bob.len() != n_b {
        return Err(Error::Validation(format!(
            "strategy has {}/{} questions, tensor {n_a}/{n_b}",
            strat.alice.len(),
            strat.bob.len()
        )));
    }
    strat.validate()?;
    let d = T::of(strat.d as f64);
    let mut total = T::zero();
    for x in 0..n_a {
        for (a, e) in strat.alice[x].iter().enumerate().take(k_a) {
            for y in 0..n_b {
                for (b, f) in strat.bob[y].iter().enumerate().take(k_b) {
                    let c = m.get(x, a, y, b);
                    if c != T::zero() {
                        total += c * e.frobenius_dot(f);
                    }
                }
            }
        }
    }
    Ok(total / d)
}

/// The maximally entangled functional on `Σ_i A_i ⊗ A_i`: `(1/d) Σ_i tr(A_i A_iᵀ)`
/// where `A_i = Σ_{x,a} w_i(x,a) E_x^a` and `E` is Alice's family.
pub fn me_functional_sum_of_squares<T: Scalar>(
    vectors: &[Vec<T>],
    k: usize,
    strat: &ProjectiveStrategyME<T>,
) -> Result<T> {
    let d = strat.d;
    let mut total = T::zero();
    for w in vectors {
        if w.len() != strat.alice.len() * k {
            return Err(Error::Dimension {
                expected: strat.alice.len() * k,
                found: w.len(),
            });
        }
        let mut a_mat = DenseMatrix::zeros(d, d);
        for (x, ops) in strat.alice.iter().enumerate() {
            for (a, e) in ops.iter().enumerate().take(k) {
                let c = w[x * k + a];
                if c != T::zero() {
                    a_mat = a_mat.add(&e.scaled(c))?;
                }
            }
        }
        total += a_mat.frobenius_dot(&a_mat);
    }
    Ok(total / T::of(d as f64))
}

/// Value of the rank-one strategy on the tensor built with parameter `ε`,
/// with the weaker bound `N ε²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KvQuantumValue<T> {
    /// `N (ε² + (1 − ε²)/n)`.
    pub value: T,
    /// `N ε²`.
    pub lower_bound: T,
}

pub fn kv_quantum_closed_form<T: Scalar>(n: u32, eps: T) -> Result<KvQuantumValue<T>> {
    if !is_power_of_two(n as usize) || n > crate::boolean_cube::MAX_CUBE_BITS {
        return Err(Error::arg(format!("n = {n} is not a supported power of two")));
    }
    if !(eps > T::zero() && eps < T::one()) {
        return Err(Error::arg(format!("eps = {eps} outside (0,1)")));
    }
    let nf = T::of(n as f64);
    let nq = T::of(2f64.powi(n as i32)) / nf;
    let e2 = eps * eps;
    Ok(KvQuantumValue {
        value: nq * (e2 + (T::one() - e2) / nf),
        lower_bound: nq * e2,
    })
}

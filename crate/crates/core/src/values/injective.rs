use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boolean_cube::{build_cosets, is_power_of_two, NoiseParams};
use crate::error::{Error, Result};
use crate::games::BellTensor;
use crate::rng::{seeded, Rng};
use crate::Scalar;

use super::classical::{enumerate_bob, search_space};

/// Default cap on `(2K)^N` extreme points for exact enumeration.
pub const DEFAULT_EXTREME_BUDGET: u64 = 10_000_000;

/// A linear map from an `s`-dimensional Hilbert space into `ℓ1^N(ℓ∞^K)`,
/// stored as the images of an orthonormal basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct OhMap<T> {
    n_q: usize,
    k: usize,
    /// `columns[i][x * K + j]`.
    columns: Vec<Vec<T>>,
}

impl<T: Scalar> OhMap<T> {
    pub fn new(n_q: usize, k: usize, columns: Vec<Vec<T>>) -> Result<Self> {
        if n_q == 0 || k == 0 || columns.is_empty() {
            return Err(Error::Shape("empty map".into()));
        }
        for c in &columns {
            if c.len() != n_q * k {
                return Err(Error::Dimension {
                    expected: n_q * k,
                    found: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite coefficient"));
            }
        }
        Ok(OhMap { n_q, k, columns })
    }

    /// Columns `V δ_x` of the noise operator with correlation `√ε`, indexed
    /// through the coset identification.
    pub fn noise_operator(n: u32, eps: T) -> Result<Self> {
        let params = NoiseParams::new(n, eps)?;
        let cosets = build_cosets(n)?;
        let len = 1u64 << n;
        let table: Vec<T> = (0..=n).map(|d| params.kernel(d)).collect();
        let columns = (0..len)
            .map(|x| {
                let mut c = vec![T::zero(); len as usize];
                for g in 0..len {
                    c[cosets.flat_index(g)] = table[(x ^ g).count_ones() as usize];
                }
                c
            })
            .collect();
        OhMap::new(cosets.num_cosets(), n as usize, columns)
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn num_questions(&self) -> usize {
        self.n_q
    }

    pub fn num_answers(&self) -> usize {
        self.k
    }

    pub fn columns(&self) -> &[Vec<T>] {
        &self.columns
    }

    /// `Σ_i vθ_i ⊗ vθ_i` as a Bell tensor.
    pub fn symmetric_square(&self) -> BellTensor<T> {
        let (n, k) = (self.n_q, self.k);
        let w = n * k;
        let mut coeffs = vec![T::zero(); w * w];
        for c in &self.columns {
            for (p, &u) in c.iter().enumerate() {
                if u == T::zero() {
                    continue;
                }
                for (q, &v) in c.iter().enumerate() {
                    coeffs[p * w + q] += u * v;
                }
            }
        }
        BellTensor::new(n, k, n, k, coeffs).expect("shape is consistent")
    }

    /// `vθ_i(x, j)` for all `i`, one block per `(x, j)`.
    fn transposed(&self) -> Vec<T> {
        let s = self.dim();
        let mut t = vec![T::zero(); self.n_q * self.k * s];
        for (i, c) in self.columns.iter().enumerate() {
            for (p, &v) in c.iter().enumerate() {
                t[p * s + i] = v;
            }
        }
        t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    /// Enumerate every extreme point; refuses above the budget.
    Exact { budget: u64 },
    /// Block-coordinate ascent from random starts; a lower bound.
    Heuristic { restarts: usize },
}

impl Default for NormMode {
    fn default() -> Self {
        NormMode::Exact {
            budget: DEFAULT_EXTREME_BUDGET,
        }
    }
}

/// One extreme point of the unit ball of `ℓ∞^N(ℓ1^K)`: a signed coordinate per question.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtremePoint {
    pub answers: Vec<usize>,
    pub signs: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NormValue<T> {
    pub value: T,
    pub exact: bool,
    pub point: ExtremePoint,
}

/// `‖v‖ = sup_f (Σ_i ⟨f, vθ_i⟩²)^{1/2}` over the real extreme points `f`.
pub fn oh_map_norm<T: Scalar>(v: &OhMap<T>, mode: NormMode, seed: u64) -> Result<NormValue<T>> {
    match mode {
        NormMode::Exact { budget } => {
            let required = search_space(2 * v.k, v.n_q);
            if required > budget as f64 {
                return Err(Error::BudgetExceeded { required, budget });
            }
            Ok(oh_exact(v))
        }
        NormMode::Heuristic { restarts } => Ok(oh_heuristic(v, restarts.max(1), seed)),
    }
}

fn squared_norm<T: Scalar>(acc: &[T]) -> T {
    acc.iter().map(|a| *a * *a).sum()
}

fn oh_exact<T: Scalar>(v: &OhMap<T>) -> NormValue<T> {
    let (n_q, k, s) = (v.n_q, v.k, v.dim());
    let t = v.transposed();
    let radix = 2 * k;
    // The first question keeps a `+` sign: `f` and `−f` give the same value.
    let best = (0..k)
        .into_par_iter()
        .map(|first| {
            let mut digits = vec![0usize; n_q];
            digits[0] = first;
            let mut prefix = vec![T::zero(); (n_q + 1) * s];
            let mut valid_from = 0;
            let mut best: Option<(T, Vec<usize>)> = None;
            loop {
                for x in valid_from..n_q {
                    let (j, plus) = (digits[x] % k, digits[x] < k);
                    let block = &t[(x * k + j) * s..(x * k + j + 1) * s];
                    let (head, tail) = prefix.split_at_mut((x + 1) * s);
                    for ((nx, &pv), &b) in tail[..s].iter_mut().zip(&head[x * s..]).zip(block) {
                        *nx = if plus { pv + b } else { pv - b };
                    }
                }
                let value = squared_norm(&prefix[n_q * s..]);
                if best.as_ref().is_none_or(|b| value > b.0) {
                    best = Some((value, digits.clone()));
                }
                let mut x = n_q;
                loop {
                    if x == 1 {
                        return best.expect("non-empty");
                    }
                    x -= 1;
                    digits[x] += 1;
                    if digits[x] < radix {
                        break;
                    }
                    digits[x] = 0;
                }
                valid_from = x;
            }
        })
        .reduce_with(|p, q| if q.0 > p.0 { q } else { p })
        .expect("K ≥ 1");
    NormValue {
        value: best.0.sqrt(),
        exact: true,
        point: ExtremePoint {
            answers: best.1.iter().map(|d| d % k).collect(),
            signs: best.1.iter().map(|&d| d < k).collect(),
        },
    }
}

fn oh_heuristic<T: Scalar>(v: &OhMap<T>, restarts: usize, seed: u64) -> NormValue<T> {
    let (n_q, k, s) = (v.n_q, v.k, v.dim());
    let t = v.transposed();
    let best = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeded(seed, r as u64);
            let (value, digits) = oh_ascent(&t, n_q, k, s, &mut rng);
            (value, r, digits)
        })
        .reduce_with(|p, q| if q.0 > p.0 || (q.0 == p.0 && q.1 < p.1) { q } else { p })
        .expect("restarts ≥ 1");
    NormValue {
        value: best.0.sqrt(),
        exact: false,
        point: ExtremePoint {
            answers: best.2.iter().map(|d| d % k).collect(),
            signs: best.2.iter().map(|&d| d < k).collect(),
        },
    }
}

#[allow(clippy::needless_range_loop)]
fn oh_ascent<T: Scalar>(t: &[T], n_q: usize, k: usize, s: usize, rng: &mut Rng) -> (T, Vec<usize>) {
    use rand::Rng as _;
    let block = |x: usize, d: usize| {
        let j = d % k;
        (&t[(x * k + j) * s..(x * k + j + 1) * s], d < k)
    };
    let mut digits: Vec<usize> = (0..n_q).map(|_| rng.gen_range(0..2 * k)).collect();
    let mut acc = vec![T::zero(); s];
    for (x, &d) in digits.iter().enumerate() {
        let (b, plus) = block(x, d);
        for (a, &bv) in acc.iter_mut().zip(b) {
            *a += if plus { bv } else { -bv };
        }
    }
    let mut current = squared_norm(&acc);
    let mut rest = vec![T::zero(); s];
    loop {
        let mut improved = false;
        for x in 0..n_q {
            let (b, plus) = block(x, digits[x]);
            for ((r, &a), &bv) in rest.iter_mut().zip(&acc).zip(b) {
                *r = if plus { a - bv } else { a + bv };
            }
            let mut best = (digits[x], current);
            for d in 0..2 * k {
                let (b, plus) = block(x, d);
                let val: T = rest
                    .iter()
                    .zip(b)
                    .map(|(&r, &bv)| {
                        let y = if plus { r + bv } else { r - bv };
                        y * y
                    })
                    .sum();
                if val > best.1 {
                    best = (d, val);
                }
            }
            if best.0 != digits[x] {
                digits[x] = best.0;
                let (b, plus) = block(x, best.0);
                for ((a, &r), &bv) in acc.iter_mut().zip(&rest).zip(b) {
                    *a = if plus { r + bv } else { r - bv };
                }
                current = squared_norm(&acc);
                improved = true;
            }
        }
        if !improved {
            return (current, digits);
        }
    }
}

/// Real extreme-point injective norm `sup Σ M(x,a,y,b) f(x,a) g(y,b)` over
/// `f, g` in the unit ball of `ℓ∞(ℓ1)`.
pub fn injective_norm<T: Scalar>(m: &BellTensor<T>, mode: NormMode, seed: u64) -> Result<NormValue<T>> {
    let (n_a, k_a, n_b, k_b) = m.shape();
    match mode {
        NormMode::Exact { budget } => {
            let cost_b = search_space(2 * k_b, n_b);
            let cost_a = search_space(2 * k_a, n_a);
            let required = cost_a.min(cost_b);
            if required > budget as f64 {
                return Err(Error::BudgetExceeded { required, budget });
            }
            let (e, swapped) = if cost_a < cost_b {
                (enumerate_bob(&m.swap_players(), true), true)
            } else {
                (enumerate_bob(m, true), false)
            };
            let (answers, signs) = if swapped { (e.f_b, e.sign_b) } else { (e.f_a, e.sign_a) };
            Ok(NormValue {
                value: e.value,
                exact: true,
                point: ExtremePoint { answers, signs },
            })
        }
        NormMode::Heuristic { restarts } => Ok(injective_heuristic(m, restarts.max(1), seed)),
    }
}

fn injective_heuristic<T: Scalar>(m: &BellTensor<T>, restarts: usize, seed: u64) -> NormValue<T> {
    use rand::Rng as _;
    let (n_a, k_a, n_b, k_b) = m.shape();
    let best = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeded(seed, r as u64);
            let mut g: Vec<(usize, T)> = (0..n_b)
                .map(|_| {
                    let b = rng.gen_range(0..k_b);
                    (b, if rng.gen::<bool>() { T::one() } else { -T::one() })
                })
                .collect();
            let mut f = vec![(0usize, T::one()); n_a];
            let mut current = T::neg_infinity();
            loop {
                for (x, fx) in f.iter_mut().enumerate() {
                    *fx = best_signed((0..k_a).map(|a| (0..n_b).map(|y| g[y].1 * m.get(x, a, y, g[y].0)).sum()));
                }
                for (y, gy) in g.iter_mut().enumerate() {
                    *gy = best_signed((0..k_b).map(|b| (0..n_a).map(|x| f[x].1 * m.get(x, f[x].0, y, b)).sum()));
                }
                let value: T = (0..n_a)
                    .map(|x| {
                        (0..n_b)
                            .map(|y| f[x].1 * g[y].1 * m.get(x, f[x].0, y, g[y].0))
                            .sum::<T>()
                    })
                    .sum();
                if value <= current {
                    return (current, r, f);
                }
                current = value;
            }
        })
        .reduce_with(|p, q| if q.0 > p.0 || (q.0 == p.0 && q.1 < p.1) { q } else { p })
        .expect("restarts ≥ 1");
    NormValue {
        value: best.0,
        exact: false,
        point: ExtremePoint {
            answers: best.2.iter().map(|p| p.0).collect(),
            signs: best.2.iter().map(|p| p.1 > T::zero()).collect(),
        },
    }
}

/// Index and sign of the largest `|score|`, first index on ties.
fn best_signed<T: Scalar>(scores: impl Iterator<Item = T>) -> (usize, T) {
    let mut best = (0, T::one(), T::neg_infinity());
    for (i, v) in scores.enumerate() {
        if v.abs() > best.2 {
            best = (i, if v >= T::zero() { T::one() } else { -T::one() }, v.abs());
        }
    }
    (best.0, best.1)
}

/// Norm bound for the noise operator `ℓ∞^N(ℓ1^n) → ℓ2^{2^n}` from
/// hypercontractivity, with its two factors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypercontractiveBound<T> {
    /// `N^{1/2} n^{ε/(1+ε) − 1/2}`.
    pub value: T,
    /// `‖i_p‖ = N n^{1/p}` with `p = 1 + 1/ε`.
    pub inclusion: T,
    /// `‖j₂‖ = (Nn)^{−1/2}`.
    pub normalization: T,
}

pub fn hypercontractive_upper_bound<T: Scalar>(n: u32, eps: T) -> Result<HypercontractiveBound<T>> {
    if !is_power_of_two(n as usize) || n > crate::boolean_cube::MAX_CUBE_BITS {
        return Err(Error::arg(format!("n = {n} is not a supported power of two")));
    }
    let params = NoiseParams::new(n, eps)?;
    let nf = T::of(n as f64);
    let nq = T::of(2f64.powi(n as i32)) / nf;
    let inclusion = nq * nf.powf(T::one() / params.p_hc);
    let normalization = T::one() / (nq * nf).sqrt();
    let half = T::of(0.5);
    Ok(HypercontractiveBound {
        value: nq.sqrt() * nf.powf(eps / (T::one() + eps) - half),
        inclusion,
        normalization,
    })
}

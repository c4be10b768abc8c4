use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::BellTensor;
use crate::rng::seeded;
use crate::Scalar;

/// Default cap on `K_A^{N_A} · K_B^{N_B}` for exhaustive search.
pub const DEFAULT_CLASSICAL_BUDGET: u64 = 100_000_000;

/// Bob assignments handled per parallel task; fixed so results never depend
/// on the thread count.
const CHUNK: u64 = 4096;

/// Answer functions `f_A : [N_A] → [K_A]` and `f_B : [N_B] → [K_B]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DeterministicStrategy {
    pub f_a: Vec<usize>,
    pub f_b: Vec<usize>,
}

impl DeterministicStrategy {
    pub fn validate<T: Scalar>(&self, m: &BellTensor<T>) -> Result<()> {
        if self.f_a.len() != m.n_a() || self.f_b.len() != m.n_b() {
            return Err(Error::invalid("strategy question counts do not match tensor"));
        }
        if self.f_a.iter().any(|&a| a >= m.k_a()) || self.f_b.iter().any(|&b| b >= m.k_b()) {
            return Err(Error::invalid("strategy answer out of range"));
        }
        Ok(())
    }

    /// `⟨M, P⟩` summed in `(x, y)` order.
    pub fn pairing<T: Scalar>(&self, m: &BellTensor<T>) -> Result<T> {
        self.validate(m)?;
        Ok((0..m.n_a())
            .map(|x| (0..m.n_b()).map(|y| m.get(x, self.f_a[x], y, self.f_b[y])).sum::<T>())
            .sum())
    }

    /// Behavior table `P(a,b|x,y) = [a = f_A(x)][b = f_B(y)]` laid out like `m`.
    pub fn behavior<T: Scalar>(&self, k_a: usize, k_b: usize) -> Result<BellTensor<T>> {
        BellTensor::from_fn(self.f_a.len(), k_a, self.f_b.len(), k_b, |x, a, y, b| {
            if self.f_a[x] == a && self.f_b[y] == b {
                T::one()
            } else {
                T::zero()
            }
        })
    }

    fn swapped(self) -> Self {
        DeterministicStrategy {
            f_a: self.f_b,
            f_b: self.f_a,
        }
    }
}

/// A value attained by an explicit deterministic strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ClassicalValue<T> {
    pub value: T,
    pub strategy: DeterministicStrategy,
}

/// `K^N` as a float, so huge search spaces compare without overflow.
pub(crate) fn search_space(k: usize, n: usize) -> f64 {
    (k as f64).powi(n as i32)
}

/// Best Alice response to a fixed Bob assignment.
///
/// `s[x * k_a + a]` holds `Σ_y σ_y M(x, a, y, g(y))`. Unsigned search returns
/// the larger of `Σ_x max_a s` and `Σ_x max_a (−s)`; signed search lets each
/// question pick its own sign.
fn alice_response<T: Scalar>(s: &[T], k_a: usize, signed: bool) -> (T, Vec<usize>, Vec<bool>) {
    let n_a = s.len() / k_a;
    if signed {
        let mut total = T::zero();
        let mut answers = Vec::with_capacity(n_a);
        let mut signs = Vec::with_capacity(n_a);
        for row in s.chunks_exact(k_a) {
            let (a, v) = argmax(row.iter().map(|v| v.abs()));
            answers.push(a);
            signs.push(row[a] >= T::zero());
            total += v;
        }
        (total, answers, signs)
    } else {
        let (mut plus, mut minus) = (T::zero(), T::zero());
        let (mut fa_plus, mut fa_minus) = (Vec::with_capacity(n_a), Vec::with_capacity(n_a));
        for row in s.chunks_exact(k_a) {
            let (a, v) = argmax(row.iter().copied());
            plus += v;
            fa_plus.push(a);
            let (a, v) = argmax(row.iter().map(|v| -*v));
            minus += v;
            fa_minus.push(a);
        }
        if plus >= minus {
            (plus, fa_plus, vec![true; n_a])
        } else {
            (minus, fa_minus, vec![true; n_a])
        }
    }
}

/// First index attaining the maximum.
fn argmax<T: Scalar>(values: impl Iterator<Item = T>) -> (usize, T) {
    let mut best = (0, T::neg_infinity());
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Result of exhaustive search over Bob's (optionally signed) assignments.
pub(crate) struct Enumerated<T> {
    pub value: T,
    pub f_a: Vec<usize>,
    pub f_b: Vec<usize>,
    pub sign_a: Vec<bool>,
    pub sign_b: Vec<bool>,
}

/// Exhaustive maximization over Bob's assignments with Alice best-responding.
///
/// Each of Bob's questions takes one of `K_B` answers, or one of `2·K_B`
/// signed answers when `signed` (the first question's sign is fixed to `+`,
/// which loses nothing by symmetry). Assignments are enumerated in
/// lexicographic order; ties keep the earliest.
pub(crate) fn enumerate_bob<T: Scalar>(m: &BellTensor<T>, signed: bool) -> Enumerated<T> {
    let (n_a, k_a, n_b, k_b) = m.shape();
    let radix = if signed { 2 * k_b } else { k_b };
    // Total number of assignments; the first digit only ranges over K_B when signed.
    let total: u64 = (k_b as u64) * (radix as u64).pow(n_b as u32 - 1);
    let chunks = total.div_ceil(CHUNK);
    let decode = |digit: usize| -> (usize, bool) {
        if signed {
            (digit % k_b, digit < k_b)
        } else {
            (digit, true)
        }
    };
    let best = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(total);
            // Mixed-radix digits of `start`, most significant first.
            let mut digits = vec![0usize; n_b];
            let mut rest = start;
            for y in (0..n_b).rev() {
                let r = if y == 0 { k_b as u64 } else { radix as u64 };
                digits[y] = (rest % r) as usize;
                rest /= r;
            }
            // prefix[y] = Σ_{y' < y} σ_{y'} M(·, ·, y', g(y')).
            let w = n_a * k_a;
            let mut prefix = vec![T::zero(); (n_b + 1) * w];
            let mut valid_from = 0usize;
            let mut best: Option<(T, u64, Vec<usize>, Vec<bool>)> = None;
            for idx in start..end {
                for y in valid_from..n_b {
                    let (b, plus) = decode(digits[y]);
                    let (head, tail) = prefix.split_at_mut((y + 1) * w);
                    let prev = &head[y * w..];
                    let next = &mut tail[..w];
                    for x in 0..n_a {
                        for a in 0..k_a {
                            let v = m.get(x, a, y, b);
                            let i = x * k_a + a;
                            next[i] = if plus { prev[i] + v } else { prev[i] - v };
                        }
                    }
                }
                let (value, _, _) = alice_response(&prefix[n_b * w..], k_a, signed);
                if best.as_ref().is_none_or(|b| value > b.0) {
                    let f_b = digits.iter().map(|&d| decode(d).0).collect();
                    let s_b = digits.iter().map(|&d| decode(d).1).collect();
                    best = Some((value, idx, f_b, s_b));
                }
                // Advance the odometer and record the first changed digit.
                let mut y = n_b;
                while y > 0 {
                    y -= 1;
                    let r = if y == 0 { k_b } else { radix };
                    digits[y] += 1;
                    if digits[y] < r {
                        break;
                    }
                    digits[y] = 0;
                }
                valid_from = y;
            }
            best.expect("chunk is non-empty")
        })
        .reduce_with(|p, q| if q.0 > p.0 || (q.0 == p.0 && q.1 < p.1) { q } else { p })
        .expect("at least one assignment");
    let (_, _, f_b, sign_b) = best;
    // Recompute Alice's response for the winner from scratch.
    let mut s = vec![T::zero(); n_a * k_a];
    for y in 0..n_b {
        for x in 0..n_a {
            for a in 0..k_a {
                let v = m.get(x, a, y, f_b[y]);
                s[x * k_a + a] += if sign_b[y] { v } else { -v };
            }
        }
    }
    let (value, f_a, sign_a) = alice_response(&s, k_a, signed);
    Enumerated {
        value,
        f_a,
        f_b,
        sign_a,
        sign_b,
    }
}

/// Exact `ω(M) = max |⟨M, P⟩|` over deterministic strategies.
///
/// Refuses when `K_A^{N_A} · K_B^{N_B}` exceeds `budget`. The cheaper side is
/// enumerated and the other best-responds.
pub fn classical_value_bruteforce<T: Scalar>(m: &BellTensor<T>, budget: u64) -> Result<ClassicalValue<T>> {
    let (n_a, k_a, n_b, k_b) = m.shape();
    let required = search_space(k_a, n_a) * search_space(k_b, n_b);
    if required > budget as f64 {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let swap = search_space(k_a, n_a) < search_space(k_b, n_b);
    let strategy = if swap {
        let e = enumerate_bob(&m.swap_players(), false);
        DeterministicStrategy { f_a: e.f_a, f_b: e.f_b }.swapped()
    } else {
        let e = enumerate_bob(m, false);
        DeterministicStrategy { f_a: e.f_a, f_b: e.f_b }
    };
    let value = strategy.pairing(m)?.abs();
    Ok(ClassicalValue { value, strategy })
}

/// Alternating best responses from random starts, both signs of `M`.
///
/// The result is `|⟨M, P⟩|` of a valid strategy, hence a lower bound on `ω(M)`.
pub fn classical_value_heuristic<T: Scalar>(m: &BellTensor<T>, restarts: usize, seed: u64) -> ClassicalValue<T> {
    let restarts = restarts.max(1);
    let best = (0..2 * restarts)
        .into_par_iter()
        .map(|task| {
            let sign = if task % 2 == 0 { T::one() } else { -T::one() };
            let mut rng = seeded(seed, (task / 2) as u64);
            let strategy = alternate(m, sign, &mut rng);
            let value = strategy.pairing(m).expect("valid by construction").abs();
            (value, task, strategy)
        })
        .reduce_with(|p, q| if q.0 > p.0 || (q.0 == p.0 && q.1 < p.1) { q } else { p })
        .expect("at least one restart");
    ClassicalValue {
        value: best.0,
        strategy: best.2,
    }
}

fn alternate<T: Scalar>(m: &BellTensor<T>, sign: T, rng: &mut crate::rng::Rng) -> DeterministicStrategy {
    use rand::Rng;
    let (n_a, k_a, n_b, k_b) = m.shape();
    let mut f_b: Vec<usize> = (0..n_b).map(|_| rng.gen_range(0..k_b)).collect();
    let mut f_a = vec![0; n_a];
    let mut current = T::neg_infinity();
    loop {
        for (x, fa) in f_a.iter_mut().enumerate() {
            let scores = (0..k_a).map(|a| sign * (0..n_b).map(|y| m.get(x, a, y, f_b[y])).sum::<T>());
            *fa = argmax(scores).0;
        }
        for (y, fb) in f_b.iter_mut().enumerate() {
            let scores = (0..k_b).map(|b| sign * (0..n_a).map(|x| m.get(x, f_a[x], y, b)).sum::<T>());
            *fb = argmax(scores).0;
        }
        let s = DeterministicStrategy {
            f_a: f_a.clone(),
            f_b: f_b.clone(),
        };
        let value = sign * s.pairing(m).expect("valid by construction");
        if value <= current {
            return s;
        }
        current = value;
    }
}

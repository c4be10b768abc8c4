//! Bell functionals and games as dense `(x, a, y, b)` coefficient tensors,
//! the explicit Khot–Vishnoi tensor, and the conversion of a Bell functional
//! into a game with values in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::boolean_cube::{build_cosets, fwht_in_place, is_power_of_two, kernel_table, CosetTable, NoiseParams};
use crate::error::{Error, Result};
use crate::Scalar;

/// Real coefficients `M(x, a, y, b)` stored row-major in `(x, a, y, b)` order.
///
/// The JSON form is `{"N_A":…,"K_A":…,"N_B":…,"K_B":…,"coeffs":[…]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorFile<T>", into = "TensorFile<T>", bound = "T: Scalar")]
pub struct BellTensor<T> {
    n_a: usize,
    k_a: usize,
    n_b: usize,
    k_b: usize,
    coeffs: Vec<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct TensorFile<T> {
    #[serde(rename = "N_A")]
    n_a: usize,
    #[serde(rename = "K_A")]
    k_a: usize,
    #[serde(rename = "N_B")]
    n_b: usize,
    #[serde(rename = "K_B")]
    k_b: usize,
    coeffs: Vec<T>,
}

impl<T: Scalar> TryFrom<TensorFile<T>> for BellTensor<T> {
    type Error = Error;

    fn try_from(f: TensorFile<T>) -> Result<Self> {
        BellTensor::new(f.n_a, f.k_a, f.n_b, f.k_b, f.coeffs)
    }
}

impl<T> From<BellTensor<T>> for TensorFile<T> {
    fn from(t: BellTensor<T>) -> Self {
        TensorFile {
            n_a: t.n_a,
            k_a: t.k_a,
            n_b: t.n_b,
            k_b: t.k_b,
            coeffs: t.coeffs,
        }
    }
}

impl<T: Scalar> BellTensor<T> {
    pub fn new(n_a: usize, k_a: usize, n_b: usize, k_b: usize, coeffs: Vec<T>) -> Result<Self> {
        if n_a == 0 || k_a == 0 || n_b == 0 || k_b == 0 {
            return Err(Error::Shape("tensor dimensions must be positive".into()));
        }
        let len = n_a * k_a * n_b * k_b;
        if coeffs.len() != len {
            return Err(Error::Dimension {
                expected: len,
                found: coeffs.len(),
            });
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("coefficient {i} is not finite")));
        }
        Ok(BellTensor {
            n_a,
            k_a,
            n_b,
            k_b,
            coeffs,
        })
    }

    pub fn zeros(n_a: usize, k_a: usize, n_b: usize, k_b: usize) -> Result<Self> {
        Self::new(n_a, k_a, n_b, k_b, vec![T::zero(); n_a * k_a * n_b * k_b])
    }

    pub fn from_fn(
        n_a: usize,
        k_a: usize,
        n_b: usize,
        k_b: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(n_a * k_a * n_b * k_b);
        for x in 0..n_a {
            for a in 0..k_a {
                for y in 0..n_b {
                    for b in 0..k_b {
                        coeffs.push(f(x, a, y, b));
                    }
                }
            }
        }
        Self::new(n_a, k_a, n_b, k_b, coeffs)
    }

    /// Questions for Alice.
    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn k_a(&self) -> usize {
        self.k_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn k_b(&self) -> usize {
        self.k_b
    }

    /// `(N_A, K_A, N_B, K_B)`.
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n_a, self.k_a, self.n_b, self.k_b)
    }

    #[inline]
    pub fn index(&self, x: usize, a: usize, y: usize, b: usize) -> usize {
        ((x * self.k_a + a) * self.n_b + y) * self.k_b + b
    }

    #[inline]
    pub fn get(&self, x: usize, a: usize, y: usize, b: usize) -> T {
        self.coeffs[self.index(x, a, y, b)]
    }

    pub fn set(&mut self, x: usize, a: usize, y: usize, b: usize, v: T) {
        let i = self.index(x, a, y, b);
        self.coeffs[i] = v;
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Alice's `(x, a)` row: the `N_B · K_B` coefficients in `(y, b)` order.
    pub fn row(&self, x: usize, a: usize) -> &[T] {
        let w = self.n_b * self.k_b;
        let start = (x * self.k_a + a) * w;
        &self.coeffs[start..start + w]
    }

    pub fn sum(&self) -> T {
        self.coeffs.iter().copied().sum()
    }

    pub fn abs_sum(&self) -> T {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    pub fn max_abs(&self) -> T {
        self.coeffs.iter().map(|c| c.abs()).fold(T::zero(), T::max)
    }

    pub fn min_coeff(&self) -> T {
        self.coeffs.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.check_same_shape(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max))
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.shape(), other.shape())));
        }
        Ok(())
    }

    /// `⟨M, P⟩ = Σ M(x,a,y,b) P(a,b|x,y)` with `P` laid out like `M`.
    pub fn pair(&self, behavior: &Self) -> Result<T> {
        self.check_same_shape(behavior)?;
        Ok(self.coeffs.iter().zip(&behavior.coeffs).map(|(m, p)| *m * *p).sum())
    }

    pub fn scaled(&self, c: T) -> Self {
        self.clone_with(self.coeffs.iter().map(|v| *v * c).collect())
    }

    /// Exchanges the players: `M'(y, b, x, a) = M(x, a, y, b)`.
    pub fn swap_players(&self) -> Self {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for y in 0..self.n_b {
            for b in 0..self.k_b {
                for x in 0..self.n_a {
                    for a in 0..self.k_a {
                        coeffs.push(self.get(x, a, y, b));
                    }
                }
            }
        }
        BellTensor {
            n_a: self.n_b,
            k_a: self.k_b,
            n_b: self.n_a,
            k_b: self.k_a,
            coeffs,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tensor serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::invalid(e.to_string()))
    }
}

impl<T: Clone> BellTensor<T> {
    fn clone_with(&self, coeffs: Vec<T>) -> Self {
        BellTensor {
            n_a: self.n_a,
            k_a: self.k_a,
            n_b: self.n_b,
            k_b: self.k_b,
            coeffs,
        }
    }
}

impl<T: Scalar> std::ops::Deref for GameTensor<T> {
    type Target = BellTensor<T>;

    fn deref(&self) -> &BellTensor<T> {
        &self.0
    }
}

/// A Bell tensor whose coefficients all lie in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BellTensor<T>", into = "BellTensor<T>", bound = "T: Scalar")]
pub struct GameTensor<T>(BellTensor<T>);

impl<T: Scalar> GameTensor<T> {
    pub fn new(tensor: BellTensor<T>) -> Result<Self> {
        if let Some(i) = tensor.coeffs.iter().position(|c| *c < T::zero() || *c > T::one()) {
            return Err(Error::invalid(format!(
                "game coefficient {i} = {} outside [0,1]",
                tensor.coeffs[i]
            )));
        }
        Ok(GameTensor(tensor))
    }

    pub fn as_bell(&self) -> &BellTensor<T> {
        &self.0
    }

    pub fn into_bell(self) -> BellTensor<T> {
        self.0
    }
}

impl<T: Scalar> TryFrom<BellTensor<T>> for GameTensor<T> {
    type Error = Error;

    fn try_from(t: BellTensor<T>) -> Result<Self> {
        GameTensor::new(t)
    }
}

impl<T> From<GameTensor<T>> for BellTensor<T> {
    fn from(g: GameTensor<T>) -> Self {
        g.0
    }
}

/// The Khot–Vishnoi tensor `M = Σ_x Vδ_x ⊗ Vδ_x = N · G_KV` on the cosets of
/// the Hadamard subgroup: `N = 2^n/n` questions, `n` answers per player.
#[derive(Clone, Debug)]
pub struct KvGame<T> {
    pub n: u32,
    pub eps: T,
    pub cosets: CosetTable,
    pub tensor: BellTensor<T>,
}

impl<T: Scalar> KvGame<T> {
    pub fn num_questions(&self) -> usize {
        self.cosets.num_cosets()
    }

    /// `G_KV = M / N`.
    pub fn game_normalized(&self) -> BellTensor<T> {
        self.tensor.scaled(T::one() / T::of(self.num_questions() as f64))
    }

    /// Kernel `((1+ε)/2)^{n-d} ((1-ε)/2)^d` indexed by distance.
    pub fn kernel(&self) -> Vec<T> {
        kernel_table(self.n, self.eps)
    }
}

fn check_kv_args<T: Scalar>(n: u32, eps: T) -> Result<()> {
    if !is_power_of_two(n as usize) {
        return Err(Error::arg(format!("n = {n} is not a power of two")));
    }
    if !(eps > T::zero() && eps < T::one()) {
        return Err(Error::arg(format!("eps = {eps} outside (0,1)")));
    }
    Ok(())
}

/// Closed-form builder: the entry at `([y], Φ(y), [z], Φ(z))` is
/// `((1+ε)/2)^{n-|y⊖z|} ((1-ε)/2)^{|y⊖z|}`.
pub fn build_kv_tensor<T: Scalar>(n: u32, eps: T) -> Result<KvGame<T>> {
    check_kv_args(n, eps)?;
    let cosets = build_cosets(n)?;
    let table = kernel_table(n, eps);
    let nq = cosets.num_cosets();
    let k = n as usize;
    let size = 1usize << n;
    let mut coeffs = vec![T::zero(); size * size];
    // Row-major (x, a, y, b) order coincides with (flat(y), flat(z)).
    for y in 0..size as u64 {
        let row = cosets.flat_index(y) * size;
        for z in 0..size as u64 {
            coeffs[row + cosets.flat_index(z)] = table[(y ^ z).count_ones() as usize];
        }
    }
    let tensor = BellTensor::new(nq, k, nq, k, coeffs)?;
    Ok(KvGame { n, eps, cosets, tensor })
}

/// Independent builder: columns `Vδ_x` from the spectral noise operator, then
/// `Σ_x Vδ_x ⊗ Vδ_x` accumulated in fixed order.
pub fn build_kv_tensor_spectral<T: Scalar>(n: u32, eps: T) -> Result<BellTensor<T>> {
    check_kv_args(n, eps)?;
    let cosets = build_cosets(n)?;
    let params = NoiseParams::new(n, eps)?;
    let size = 1usize << n;
    let powers: Vec<T> = (0..=n).map(|k| params.rho.powi(k as i32)).collect();
    let inv = T::one() / T::of(size as f64);
    let mut coeffs = vec![T::zero(); size * size];
    let mut col = vec![T::zero(); size];
    for x in 0..size {
        // Vδ_x: the transform of δ_x is the character row (-1)^{|A∩x|}.
        for (a, c) in col.iter_mut().enumerate() {
            let sign = if (a & x).count_ones() % 2 == 0 {
                T::one()
            } else {
                -T::one()
            };
            *c = sign * powers[a.count_ones() as usize];
        }
        fwht_in_place(&mut col)?;
        col.iter_mut().for_each(|c| *c *= inv);
        for y in 0..size {
            let cy = col[y];
            let row = cosets.flat_index(y as u64) * size;
            for z in 0..size {
                coeffs[row + cosets.flat_index(z as u64)] += cy * col[z];
            }
        }
    }
    let nq = cosets.num_cosets();
    BellTensor::new(nq, n as usize, nq, n as usize, coeffs)
}

/// Appends one all-zero answer for each player.
pub fn pad_answers<T: Scalar>(m: &BellTensor<T>) -> BellTensor<T> {
    let (n_a, k_a, n_b, k_b) = m.shape();
    let mut coeffs = vec![T::zero(); n_a * (k_a + 1) * n_b * (k_b + 1)];
    let mut out = m.clone_with(Vec::new());
    out.k_a = k_a + 1;
    out.k_b = k_b + 1;
    for x in 0..n_a {
        for a in 0..k_a {
            for y in 0..n_b {
                for b in 0..k_b {
                    coeffs[out.index(x, a, y, b)] = m.get(x, a, y, b);
                }
            }
        }
    }
    out.coeffs = coeffs;
    out
}

/// Pads answers, then maps `M̃ ↦ 1/(2N²) + M̃/(2N²L)` with `L = max |M|`.
///
/// For every strategy `P`, `⟨G, P⟩ − 1/2 = ⟨M̃, P⟩ / (2N²L)`.
pub fn bell_to_game<T: Scalar>(m: &BellTensor<T>) -> Result<(GameTensor<T>, T)> {
    if m.n_a != m.n_b {
        return Err(Error::Shape(format!(
            "game conversion needs equal question counts, got {} and {}",
            m.n_a, m.n_b
        )));
    }
    let l = m.max_abs();
    if l == T::zero() {
        return Err(Error::Degenerate("Bell tensor is identically zero".into()));
    }
    let padded = pad_answers(m);
    let nn = T::of((m.n_a * m.n_a) as f64);
    let base = T::one() / (T::of(2.0) * nn);
    let slope = base / l;
    let coeffs = padded
        .coeffs
        .iter()
        .map(|c| (base + slope * *c).max(T::zero()).min(T::one()))
        .collect();
    Ok((GameTensor::new(padded.clone_with(coeffs))?, l))
}

/// CHSH game `G(x,a,y,b) = ¼ [a ⊕ b = x ∧ y]`.
pub fn chsh_game<T: Scalar>() -> BellTensor<T> {
    BellTensor::from_fn(
        2,
        2,
        2,
        2,
        |x, a, y, b| {
            if (a ^ b) == (x & y) {
                T::of(0.25)
            } else {
                T::zero()
            }
        },
    )
    .expect("fixed shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    /// Σ_x ⟨δ_y, Vδ_x⟩⟨δ_z, Vδ_x⟩ with V from the direct kernel.
    fn direct_entry(n: u32, eps: f64, y: u64, z: u64) -> f64 {
        let p = NoiseParams::new(n, eps).unwrap();
        (0..1u64 << n)
            .map(|x| p.kernel((x ^ y).count_ones()) * p.kernel((x ^ z).count_ones()))
            .sum()
    }

    #[test]
    fn kv_n2_entries_match_direct_convolution() {
        let kv = build_kv_tensor(2, 0.25f64).unwrap();
        for y in 0..4u64 {
            for z in 0..4u64 {
                let want = direct_entry(2, 0.25, y, z);
                let got = kv.tensor.coeffs()[kv.cosets.flat_index(y) * 4 + kv.cosets.flat_index(z)];
                assert!((got - want).abs() < 1e-15);
            }
        }
        let c = kv.tensor.coeffs();
        assert!((c[kv.cosets.flat_index(0) * 4 + kv.cosets.flat_index(0)] - 0.390625).abs() < 1e-15);
        assert!((c[kv.cosets.flat_index(0) * 4 + kv.cosets.flat_index(1)] - 0.234375).abs() < 1e-15);
        assert!((c[kv.cosets.flat_index(0) * 4 + kv.cosets.flat_index(3)] - 0.140625).abs() < 1e-15);
    }

    #[test]
    fn kv_row_sums_and_total() {
        for (n, eps) in [(2u32, 0.3f64), (4, 0.5), (8, 0.1)] {
            let kv = build_kv_tensor(n, eps).unwrap();
            let m = &kv.tensor;
            for x in 0..m.n_a() {
                for a in 0..m.k_a() {
                    let s: f64 = m.row(x, a).iter().sum();
                    assert!((s - 1.0).abs() < 1e-12);
                }
            }
            assert!((m.sum() - (1u64 << n) as f64).abs() < 1e-10);
            assert!(m.min_coeff() > 0.0);
        }
    }

    #[test]
    fn kv_builders_agree() {
        for n in [2u32, 4, 8] {
            let closed = build_kv_tensor(n, 0.37f64).unwrap().tensor;
            let spectral = build_kv_tensor_spectral(n, 0.37f64).unwrap();
            assert!(closed.max_abs_diff(&spectral).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn kv_depends_only_on_distance() {
        let kv = build_kv_tensor(4, 0.6f64).unwrap();
        let table = kv.kernel();
        let mut rng = seeded(5, 0);
        for _ in 0..200 {
            let y = rng.gen_range(0..16u64);
            let z = rng.gen_range(0..16u64);
            let got = kv.tensor.coeffs()[kv.cosets.flat_index(y) * 16 + kv.cosets.flat_index(z)];
            assert_eq!(got, table[(y ^ z).count_ones() as usize]);
        }
    }

    #[test]
    fn kv_rejects_bad_arguments() {
        assert!(build_kv_tensor(6, 0.5f64).is_err());
        assert!(build_kv_tensor(4, 1.5f64).is_err());
        assert!(build_kv_tensor_spectral(3, 0.5f64).is_err());
    }

    #[test]
    fn kv_game_normalization() {
        let kv = build_kv_tensor(4, 0.5f64).unwrap();
        let g = kv.game_normalized();
        assert!((g.sum() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn pad_answers_examples() {
        let m = BellTensor::new(1, 1, 1, 1, vec![3.5f64]).unwrap();
        let p = pad_answers(&m);
        assert_eq!(p.shape(), (1, 2, 1, 2));
        assert_eq!(p.coeffs(), &[3.5, 0.0, 0.0, 0.0]);
        let pp = pad_answers(&p);
        assert_eq!(pp.shape(), (1, 3, 1, 3));
        assert_eq!(pp.sum(), 3.5);
        assert_eq!(pp.get(0, 0, 0, 0), 3.5);
    }

    fn random_tensor(rng: &mut crate::rng::Rng, n: usize, k: usize) -> BellTensor<f64> {
        BellTensor::from_fn(n, k, n, k, |_, _, _, _| rng.gen_range(-1.0..1.0)).unwrap()
    }

    /// Random behavior table: for each (x, y) a probability vector over (a, b).
    fn random_behavior(rng: &mut crate::rng::Rng, n: usize, k: usize) -> BellTensor<f64> {
        let mut p = BellTensor::zeros(n, k, n, k).unwrap();
        for x in 0..n {
            for y in 0..n {
                let w: Vec<f64> = (0..k * k).map(|_| rng.gen_range(0.0..1.0)).collect();
                let s: f64 = w.iter().sum();
                for a in 0..k {
                    for b in 0..k {
                        p.set(x, a, y, b, w[a * k + b] / s);
                    }
                }
            }
        }
        p
    }

    /// Extends `p` with zero probability on the padded answers.
    fn extend_behavior(p: &BellTensor<f64>) -> BellTensor<f64> {
        pad_answers(p)
    }

    #[test]
    fn padding_preserves_pairing() {
        let mut rng = seeded(8, 0);
        for _ in 0..20 {
            let m = random_tensor(&mut rng, 3, 2);
            let p = random_behavior(&mut rng, 3, 2);
            let lhs = pad_answers(&m).pair(&extend_behavior(&p)).unwrap();
            let rhs = m.pair(&p).unwrap();
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }

    #[test]
    fn bell_to_game_single_entry() {
        let mut m = BellTensor::<f64>::zeros(2, 2, 2, 2).unwrap();
        m.set(1, 0, 0, 1, 7.0);
        let (g, l) = bell_to_game(&m).unwrap();
        assert_eq!(l, 7.0);
        assert_eq!(g.shape(), (2, 3, 2, 3));
        for x in 0..2 {
            for a in 0..3 {
                for y in 0..2 {
                    for b in 0..3 {
                        let want = if (x, a, y, b) == (1, 0, 0, 1) { 0.25 } else { 0.125 };
                        assert!((g.get(x, a, y, b) - want).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn bell_to_game_bias_identity_and_range() {
        let mut rng = seeded(13, 0);
        for _ in 0..50 {
            let m = random_tensor(&mut rng, 2, 2);
            let (g, l) = bell_to_game(&m).unwrap();
            let p = random_behavior(&mut rng, 2, 3);
            let lhs = g.pair(&p).unwrap() - 0.5;
            let rhs = pad_answers(&m).pair(&p).unwrap() / (2.0 * 4.0 * l);
            assert!((lhs - rhs).abs() <= 1e-12);
            assert!(g.min_coeff() >= 0.0);
            assert!(g.max_abs() <= 0.25 + 1e-15);
        }
    }

    #[test]
    fn bell_to_game_errors() {
        let z = BellTensor::<f64>::zeros(2, 2, 2, 2).unwrap();
        assert!(matches!(bell_to_game(&z), Err(Error::Degenerate(_))));
        let r = BellTensor::<f64>::from_fn(2, 2, 3, 2, |_, _, _, _| 1.0).unwrap();
        assert!(bell_to_game(&r).is_err());
    }

    #[test]
    fn tensor_json_round_trip_is_bit_exact() {
        let mut rng = seeded(2, 0);
        let m = BellTensor::from_fn(2, 3, 3, 2, |_, _, _, _| rng.gen_range(-1.0..1.0) / 3.0).unwrap();
        let s = m.to_json();
        assert!(s.starts_with("{\"N_A\":2,\"K_A\":3,\"N_B\":3,\"K_B\":2,\"coeffs\":["));
        let back = BellTensor::<f64>::from_json(&s).unwrap();
        assert_eq!(m, back);
        assert!(BellTensor::<f64>::from_json(r#"{"N_A":1,"K_A":1,"N_B":1,"K_B":1,"coeffs":[1,2]}"#).is_err());
    }

    #[test]
    fn game_tensor_rejects_out_of_range() {
        let t = BellTensor::new(1, 1, 1, 1, vec![1.5f64]).unwrap();
        assert!(GameTensor::new(t).is_err());
    }

    #[test]
    fn swap_players_transposes() {
        let m = BellTensor::<f64>::from_fn(2, 3, 4, 5, |x, a, y, b| (x * 1000 + a * 100 + y * 10 + b) as f64).unwrap();
        let s = m.swap_players();
        assert_eq!(s.shape(), (4, 5, 2, 3));
        assert_eq!(s.get(3, 4, 1, 2), m.get(1, 2, 3, 4));
        assert_eq!(s.swap_players(), m);
    }
}

//! The Cantor group `{0,1}^n`: Hamming metric, Walsh–Fourier analysis, the
//! biased noise convolution and cosets of the Sylvester–Hadamard subgroup.
//!
//! Bit strings are encoded as integers with bit `i` holding coordinate `x_i`.
//! Their textual form lists `x_0` first, so `"01"` is the integer `2`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

/// Largest cube dimension accepted for dense functions on `{0,1}^n`.
pub const MAX_CUBE_BITS: u32 = 30;

/// Largest `n` for which coset tables are built (the table has `2^n` entries).
pub const MAX_COSET_BITS: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitString {
    n: u32,
    value: u64,
}

impl BitString {
    pub fn new(n: u32, value: u64) -> Result<Self> {
        if n > 63 {
            return Err(Error::arg(format!("bit count {n} exceeds 63")));
        }
        if value >> n != 0 {
            return Err(Error::arg(format!("value {value} does not fit in {n} bits")));
        }
        Ok(BitString { n, value })
    }

    pub fn zero(n: u32) -> Self {
        BitString { n, value: 0 }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    /// Coordinate `x_i`.
    pub fn bit(&self, i: u32) -> bool {
        (self.value >> i) & 1 == 1
    }

    pub fn weight(&self) -> u32 {
        self.value.count_ones()
    }

    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        check_same_bits(self, other)?;
        Ok(BitString {
            n: self.n,
            value: self.value ^ other.value,
        })
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut value = 0u64;
        let mut n = 0u32;
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => value |= 1 << i,
                _ => return Err(Error::arg(format!("invalid bit character {c:?}"))),
            }
            n += 1;
        }
        BitString::new(n, value)
    }
}

fn check_same_bits(x: &BitString, y: &BitString) -> Result<()> {
    if x.n != y.n {
        return Err(Error::Dimension {
            expected: x.n as usize,
            found: y.n as usize,
        });
    }
    Ok(())
}

/// `|x ⊖ y|`, the number of differing coordinates.
pub fn hamming_distance(x: &BitString, y: &BitString) -> Result<u32> {
    check_same_bits(x, y)?;
    Ok((x.value ^ y.value).count_ones())
}

pub fn is_power_of_two(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

/// Real function on `{0,1}^n`, stored as the table of its `2^n` values.
///
/// Serializes as a flat array indexed by the integer encoding of the point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>", bound = "T: Scalar")]
pub struct CubeFunction<T> {
    n: u32,
    values: Vec<T>,
}

impl<T: Scalar> CubeFunction<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        let n = cube_bits(values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("entry {i} is not finite")));
        }
        Ok(CubeFunction { n, values })
    }

    pub fn zeros(n: u32) -> Result<Self> {
        check_cube_bits(n)?;
        Ok(CubeFunction {
            n,
            values: vec![T::zero(); 1 << n],
        })
    }

    pub fn from_fn(n: u32, f: impl FnMut(u64) -> T) -> Result<Self> {
        check_cube_bits(n)?;
        CubeFunction::new((0..1u64 << n).map(f).collect())
    }

    /// Indicator of a single point.
    pub fn delta(n: u32, x: u64) -> Result<Self> {
        let mut f = Self::zeros(n)?;
        if x >> n != 0 {
            return Err(Error::arg(format!("point {x} outside {{0,1}}^{n}")));
        }
        f.values[x as usize] = T::one();
        Ok(f)
    }

    /// Walsh character `w_A(x) = (-1)^{|A ∩ x|}` with `A` given as a bit mask.
    pub fn walsh(n: u32, a: u64) -> Result<Self> {
        Self::from_fn(n, |x| {
            if (a & x).count_ones().is_multiple_of(2) {
                T::one()
            } else {
                -T::one()
            }
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn sum(&self) -> T {
        self.values.iter().copied().sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }
}

impl<T: Scalar> TryFrom<Vec<T>> for CubeFunction<T> {
    type Error = Error;

    fn try_from(values: Vec<T>) -> Result<Self> {
        CubeFunction::new(values)
    }
}

impl<T> From<CubeFunction<T>> for Vec<T> {
    fn from(f: CubeFunction<T>) -> Vec<T> {
        f.values
    }
}

fn check_cube_bits(n: u32) -> Result<()> {
    if n > MAX_CUBE_BITS {
        return Err(Error::arg(format!("cube dimension {n} exceeds {MAX_CUBE_BITS}")));
    }
    Ok(())
}

fn cube_bits(len: usize) -> Result<u32> {
    if !is_power_of_two(len) {
        return Err(Error::Shape(format!("length {len} is not a power of two")));
    }
    let n = len.trailing_zeros();
    check_cube_bits(n)?;
    Ok(n)
}

/// Unnormalized Walsh–Hadamard butterfly on a slice of length `2^n`.
///
/// Applying it twice multiplies by `2^n`. Summation order is fixed per stage.
pub fn fwht_in_place<T: Scalar>(data: &mut [T]) -> Result<()> {
    cube_bits(data.len())?;
    let len = data.len();
    let mut h = 1;
    while h < len {
        for block in data.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    Ok(())
}

/// Walsh coefficients `f̂(A) = Σ_x f(x) w_A(x)`.
pub fn fwht<T: Scalar>(f: &CubeFunction<T>) -> CubeFunction<T> {
    let mut values = f.values.clone();
    fwht_in_place(&mut values).expect("cube function length is a power of two");
    CubeFunction { n: f.n, values }
}

/// Inverse of [`fwht`]: transform again and divide by `2^n`.
pub fn inverse_fwht<T: Scalar>(coeffs: &CubeFunction<T>) -> CubeFunction<T> {
    let mut out = fwht(coeffs);
    let scale = T::one() / T::of(coeffs.len() as f64);
    out.values.iter_mut().for_each(|v| *v *= scale);
    out
}

/// Mass `((1+c)/2)^{n-d} ((1-c)/2)^d` of the product measure with
/// per-coordinate correlation `c` at a point of weight `d`.
pub fn biased_kernel<T: Scalar>(n: u32, correlation: T, distance: u32) -> T {
    let two = T::of(2.0);
    let stay = (T::one() + correlation) / two;
    let flip = (T::one() - correlation) / two;
    stay.powi((n - distance) as i32) * flip.powi(distance as i32)
}

/// Kernel masses for every distance `0..=n`.
pub fn kernel_table<T: Scalar>(n: u32, correlation: T) -> Vec<T> {
    (0..=n).map(|d| biased_kernel(n, correlation, d)).collect()
}

/// Parameters of the noise operator `C_μ`, `μ = μ₀^{⊗n}` with
/// `μ₀ = ((1+√ε)/2) δ₀ + ((1−√ε)/2) δ₁`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams<T> {
    pub n: u32,
    pub eps: T,
    /// Per-coordinate correlation `√ε`.
    pub rho: T,
    /// Hypercontractive exponent `(1+ε)/ε`.
    pub p_hc: T,
}

impl<T: Scalar> NoiseParams<T> {
    pub fn new(n: u32, eps: T) -> Result<Self> {
        if !(eps > T::zero() && eps < T::one()) {
            return Err(Error::arg(format!("noise parameter {eps} outside (0,1)")));
        }
        Ok(NoiseParams {
            n,
            eps,
            rho: eps.sqrt(),
            p_hc: T::one() + T::one() / eps,
        })
    }

    /// Matrix entry `⟨δ_x, V δ_y⟩` as a function of `|x ⊖ y|`.
    pub fn kernel(&self, distance: u32) -> T {
        biased_kernel(self.n, self.rho, distance)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvolutionMode {
    /// `O(4^n)` double sum against the kernel.
    Direct,
    /// Walsh transform, diagonal scaling by `ε^{|A|/2}`, inverse transform.
    Spectral,
}

/// `V f = f * μ`.
pub fn noise_convolve<T: Scalar>(
    f: &CubeFunction<T>,
    params: &NoiseParams<T>,
    mode: ConvolutionMode,
) -> Result<CubeFunction<T>> {
    if f.n != params.n {
        return Err(Error::Dimension {
            expected: params.n as usize,
            found: f.n as usize,
        });
    }
    match mode {
        ConvolutionMode::Direct => {
            let table = kernel_table(params.n, params.rho);
            let len = f.len() as u64;
            let values = (0..len)
                .map(|x| {
                    (0..len)
                        .map(|y| table[(x ^ y).count_ones() as usize] * f.values[y as usize])
                        .sum()
                })
                .collect();
            Ok(CubeFunction { n: f.n, values })
        }
        ConvolutionMode::Spectral => {
            let powers: Vec<T> = (0..=params.n).map(|k| params.rho.powi(k as i32)).collect();
            let mut coeffs = fwht(f);
            for (a, c) in coeffs.values.iter_mut().enumerate() {
                *c *= powers[a.count_ones() as usize];
            }
            Ok(inverse_fwht(&coeffs))
        }
    }
}

/// The `n` Sylvester–Hadamard codewords: row `i` has `x_j = ⟨bits(i), bits(j)⟩ mod 2`.
pub fn hadamard_subgroup(n: u32) -> Result<Vec<BitString>> {
    if !is_power_of_two(n as usize) {
        return Err(Error::arg(format!("n = {n} is not a power of two")));
    }
    if n > 63 {
        return Err(Error::arg(format!("n = {n} exceeds 63")));
    }
    Ok((0..n as u64)
        .map(|i| {
            let value = (0..n as u64)
                .filter(|&j| (i & j).count_ones() % 2 == 1)
                .fold(0u64, |acc, j| acc | 1 << j);
            BitString { n, value }
        })
        .collect())
}

/// Cosets of the Hadamard subgroup `G₀` in `{0,1}^n`, with the per-coset
/// enumeration `Φ` fixed by numeric order.
#[derive(Clone, Debug, PartialEq)]
pub struct CosetTable {
    n: u32,
    subgroup: Vec<BitString>,
    coset_index: Vec<usize>,
    position: Vec<usize>,
    members: Vec<Vec<u64>>,
}

impl CosetTable {
    pub fn n(&self) -> u32 {
        self.n
    }

    /// Answers per question: `n`.
    pub fn coset_size(&self) -> usize {
        self.n as usize
    }

    /// `N = 2^n / n`.
    pub fn num_cosets(&self) -> usize {
        self.members.len()
    }

    pub fn subgroup(&self) -> &[BitString] {
        &self.subgroup
    }

    pub fn coset_of(&self, g: u64) -> usize {
        self.coset_index[g as usize]
    }

    /// `Φ_{[g]}(g)`.
    pub fn position_of(&self, g: u64) -> usize {
        self.position[g as usize]
    }

    /// Index of `δ_{[g]} ⊗ e_{Φ(g)}` in `ℓ1^N(ℓ∞^n)`.
    pub fn flat_index(&self, g: u64) -> usize {
        self.coset_index[g as usize] * self.n as usize + self.position[g as usize]
    }

    pub fn member(&self, coset: usize, position: usize) -> BitString {
        BitString {
            n: self.n,
            value: self.members[coset][position],
        }
    }

    /// Members of a coset in numeric order.
    pub fn members(&self, coset: usize) -> &[u64] {
        &self.members[coset]
    }

    pub fn representative(&self, coset: usize) -> BitString {
        self.member(coset, 0)
    }

    pub fn representatives(&self) -> Vec<BitString> {
        (0..self.num_cosets()).map(|c| self.representative(c)).collect()
    }
}

/// Partitions `{0,1}^n` into the `2^n/n` cosets of the Hadamard subgroup.
pub fn build_cosets(n: u32) -> Result<CosetTable> {
    if n < 2 {
        return Err(Error::arg(format!("coset table needs n >= 2, got {n}")));
    }
    if n > MAX_COSET_BITS {
        return Err(Error::arg(format!("n = {n} exceeds {MAX_COSET_BITS}")));
    }
    let subgroup = hadamard_subgroup(n)?;
    let size = 1usize << n;
    let mut coset_index = vec![usize::MAX; size];
    let mut position = vec![0; size];
    let mut members = Vec::with_capacity(size / n as usize);
    for g in 0..size as u64 {
        if coset_index[g as usize] != usize::MAX {
            continue;
        }
        let c = members.len();
        let mut coset: Vec<u64> = subgroup.iter().map(|h| g ^ h.value).collect();
        coset.sort_unstable();
        for (p, &x) in coset.iter().enumerate() {
            coset_index[x as usize] = c;
            position[x as usize] = p;
        }
        members.push(coset);
    }
    Ok(CosetTable {
        n,
        subgroup,
        coset_index,
        position,
        members,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn bits(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn naive_walsh(f: &[f64]) -> Vec<f64> {
        let len = f.len();
        (0..len)
            .map(|a| {
                (0..len)
                    .map(|x| if (a & x).count_ones() % 2 == 0 { f[x] } else { -f[x] })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming_distance(&bits("0101"), &bits("0011")).unwrap(), 2);
        let x = bits("1101");
        assert_eq!(hamming_distance(&x, &x).unwrap(), 0);
        assert!(matches!(
            hamming_distance(&bits("01"), &bits("011")),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn bitstring_text_lists_first_coordinate_first() {
        let x = bits("01");
        assert_eq!(x.value(), 2);
        assert_eq!(x.to_string(), "01");
        assert!(BitString::new(2, 4).is_err());
    }

    #[test]
    fn fwht_small_examples() {
        let f = CubeFunction::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(fwht(&f).values(), &[1.0, 1.0]);
        for a in 0..8u64 {
            let w = CubeFunction::<f64>::walsh(3, a).unwrap();
            let hat = fwht(&w);
            for (b, v) in hat.values().iter().enumerate() {
                let expected = if b as u64 == a { 8.0 } else { 0.0 };
                assert_eq!(*v, expected);
            }
        }
    }

    #[test]
    fn fwht_matches_naive_and_involution() {
        let mut rng = seeded(11, 0);
        let f: Vec<f64> = (0..1 << 10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = CubeFunction::new(f).unwrap();
        let hat = fwht(&f);
        let naive = naive_walsh(f.values());
        for (a, b) in hat.values().iter().zip(&naive) {
            assert!((a - b).abs() <= 1e-10);
        }
        let back = fwht(&hat);
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - 1024.0 * b).abs() <= 1e-10);
        }
    }

    #[test]
    fn fwht_rejects_bad_length() {
        let mut v = vec![1.0f64; 6];
        assert!(matches!(fwht_in_place(&mut v), Err(Error::Shape(_))));
        assert!(CubeFunction::new(vec![1.0f64; 3]).is_err());
        assert!(CubeFunction::new(vec![f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn noise_convolve_delta_n1() {
        let params = NoiseParams::new(1, 0.25f64).unwrap();
        let f = CubeFunction::delta(1, 0).unwrap();
        for mode in [ConvolutionMode::Direct, ConvolutionMode::Spectral] {
            let g = noise_convolve(&f, &params, mode).unwrap();
            assert!((g.values()[0] - 0.75).abs() < 1e-15);
            assert!((g.values()[1] - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn noise_walsh_eigenvalue_single_coordinate() {
        let params = NoiseParams::new(3, 0.36f64).unwrap();
        let w = CubeFunction::walsh(3, 0b010).unwrap();
        let g = noise_convolve(&w, &params, ConvolutionMode::Direct).unwrap();
        for (a, b) in g.values().iter().zip(w.values()) {
            assert!((a - 0.6 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_direct_vs_spectral_n4() {
        let mut rng = seeded(3, 0);
        let params = NoiseParams::new(4, 0.3f64).unwrap();
        let f = CubeFunction::from_fn(4, |_| rng.gen_range(-2.0..2.0)).unwrap();
        let d = noise_convolve(&f, &params, ConvolutionMode::Direct).unwrap();
        let s = noise_convolve(&f, &params, ConvolutionMode::Spectral).unwrap();
        assert!(d.max_abs_diff(&s) <= 1e-10);
        assert!((d.sum() - f.sum()).abs() <= 1e-10);
    }

    #[test]
    fn noise_rejects_mismatched_n() {
        let params = NoiseParams::new(3, 0.5).unwrap();
        let f = CubeFunction::<f64>::zeros(2).unwrap();
        assert!(noise_convolve(&f, &params, ConvolutionMode::Spectral).is_err());
        assert!(NoiseParams::new(3, 1.0f64).is_err());
        assert!(NoiseParams::new(3, 0.0f64).is_err());
    }

    #[test]
    fn noise_params_derived_fields() {
        let p = NoiseParams::new(4, 0.25f64).unwrap();
        assert_eq!(p.rho, 0.5);
        assert_eq!(p.p_hc, 5.0);
    }

    #[test]
    fn hadamard_subgroup_examples() {
        let g2: Vec<String> = hadamard_subgroup(2).unwrap().iter().map(|b| b.to_string()).collect();
        assert_eq!(g2, ["00", "01"]);
        let g4: Vec<String> = hadamard_subgroup(4).unwrap().iter().map(|b| b.to_string()).collect();
        assert_eq!(g4, ["0000", "0101", "0011", "0110"]);
        assert!(hadamard_subgroup(6).is_err());
    }

    #[test]
    fn hadamard_subgroup_is_code_of_distance_half_n() {
        for n in [2u32, 4, 8, 16] {
            let g = hadamard_subgroup(n).unwrap();
            let values: Vec<u64> = g.iter().map(|b| b.value()).collect();
            assert!(values.contains(&0));
            for x in &g {
                for y in &g {
                    assert!(values.contains(&x.xor(y).unwrap().value()));
                    if x != y {
                        assert_eq!(hamming_distance(x, y).unwrap(), n / 2);
                    }
                }
            }
        }
    }

    #[test]
    fn cosets_n2() {
        let t = build_cosets(2).unwrap();
        assert_eq!(t.num_cosets(), 2);
        let c0: Vec<String> = t
            .members(0)
            .iter()
            .map(|&v| BitString::new(2, v).unwrap().to_string())
            .collect();
        let c1: Vec<String> = t
            .members(1)
            .iter()
            .map(|&v| BitString::new(2, v).unwrap().to_string())
            .collect();
        assert_eq!(c0, ["00", "01"]);
        assert_eq!(c1, ["10", "11"]);
    }

    #[test]
    fn cosets_partition_and_distances() {
        for n in [2u32, 4, 8] {
            let t = build_cosets(n).unwrap();
            let size = 1usize << n;
            assert_eq!(t.num_cosets(), size / n as usize);
            let mut seen = vec![false; size];
            for c in 0..t.num_cosets() {
                let m = t.members(c);
                assert_eq!(m.len(), n as usize);
                for (p, &x) in m.iter().enumerate() {
                    assert!(!seen[x as usize]);
                    seen[x as usize] = true;
                    assert_eq!(t.coset_of(x), c);
                    assert_eq!(t.position_of(x), p);
                    for &y in m {
                        if x != y {
                            assert_eq!((x ^ y).count_ones(), n / 2);
                        }
                    }
                }
                assert_eq!(t.representative(c).value(), *m.iter().min().unwrap());
            }
            assert!(seen.iter().all(|&s| s));
        }
        assert!(build_cosets(1).is_err());
        assert!(build_cosets(12).is_err());
    }

    #[test]
    fn cube_function_json_is_flat_array() {
        let f = CubeFunction::new(vec![0.5, -1.25, 3.0, 0.1]).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, "[0.5,-1.25,3.0,0.1]");
        let g: CubeFunction<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
        assert!(serde_json::from_str::<CubeFunction<f64>>("[1.0,2.0,3.0]").is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let params = NoiseParams::new(3, 0.5f32).unwrap();
        let f = CubeFunction::<f32>::delta(3, 5).unwrap();
        let d = noise_convolve(&f, &params, ConvolutionMode::Direct).unwrap();
        let s = noise_convolve(&f, &params, ConvolutionMode::Spectral).unwrap();
        assert!(d.max_abs_diff(&s) < 1e-6);
    }
}

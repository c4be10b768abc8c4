//! Small dense kernels: row Gram–Schmidt, one-sided Jacobi SVD, power
//! iteration and the cyclic Jacobi eigensolver. Sized for matrices of at
//! most a few hundred rows.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{gaussian, seeded};
use crate::Scalar;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Dimension {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::Dimension {
                expected: cols,
                found: bad.len(),
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Rank-one matrix `u vᵀ`.
    pub fn outer(u: &[T], v: &[T]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
    }

    pub fn random_gaussian(rows: usize, cols: usize, seed: u64) -> Self {
        let mut rng = seeded(seed, 0);
        Self::from_fn(rows, cols, |_, _| gaussian(&mut rng))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let src = other.row(k);
                for (o, b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * *b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `Aᵀ v`.
    pub fn tmatvec(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += *a * vi;
            }
        }
        out
    }

    pub fn scaled(&self, c: T) -> Self {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| *v * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// `Σ_ij A_ij B_ij = tr(A Bᵀ)`.
    pub fn frobenius_dot(&self, other: &Self) -> T {
        dot(&self.data, &other.data)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|v| v.abs()).fold(T::zero(), T::max)
    }

    pub fn max_row_norm(&self) -> T {
        (0..self.rows).map(|i| norm2(self.row(i))).fold(T::zero(), T::max)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

pub fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

/// Orthonormal basis of the row space of `a`, one row per basis vector.
///
/// Rows whose residual after projection has norm `<= tol` are dropped, so the
/// output has as many rows as the numerical rank. Each residual is projected
/// twice to keep the output orthonormal to working precision.
pub fn gram_schmidt_rows<T: Scalar>(a: &DenseMatrix<T>, tol: T) -> DenseMatrix<T> {
    let mut basis: Vec<Vec<T>> = Vec::new();
    for i in 0..a.rows() {
        let mut r = a.row(i).to_vec();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &r);
                axpy(-c, q, &mut r);
            }
        }
        let nrm = norm2(&r);
        if nrm > tol {
            r.iter_mut().for_each(|v| *v /= nrm);
            basis.push(r);
        }
    }
    let k = basis.len();
    DenseMatrix {
        rows: k,
        cols: a.cols(),
        data: basis.concat(),
    }
}

/// [`gram_schmidt_rows`] with tolerance `1e-9 · max row norm`.
pub fn gram_schmidt_rows_default<T: Scalar>(a: &DenseMatrix<T>) -> DenseMatrix<T> {
    let tol = T::of(1e-9) * a.max_row_norm();
    gram_schmidt_rows(a, tol.max(T::min_positive_value()))
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ`.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    /// `rows × k` with orthonormal columns where `s > 0`.
    pub u: DenseMatrix<T>,
    /// Singular values in decreasing order, `k = min(rows, cols)`.
    pub s: Vec<T>,
    /// `cols × k` with orthonormal columns.
    pub v: DenseMatrix<T>,
}

const MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd<T: Scalar>(a: &DenseMatrix<T>) -> Svd<T> {
    if a.rows() < a.cols() {
        let t = svd(&a.transpose());
        return Svd { u: t.v, s: t.s, v: t.u };
    }
    let (m, n) = (a.rows(), a.cols());
    let mut w: Vec<Vec<T>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    let tol = T::eps() * T::of(m.max(1) as f64);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut w, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(T, usize)> = w.iter().enumerate().map(|(j, col)| (norm2(col), j)).collect();
    order.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));
    let s: Vec<T> = order.iter().map(|(sv, _)| *sv).collect();
    let u = DenseMatrix::from_fn(m, n, |i, k| {
        let (sv, j) = order[k];
        if sv > T::zero() {
            w[j][i] / sv
        } else {
            T::zero()
        }
    });
    let vm = DenseMatrix::from_fn(n, n, |i, k| v[order[k].1][i]);
    Svd { u, s, v: vm }
}

fn rotate_pair<T: Scalar>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (left, right) = cols.split_at_mut(q);
    let (wp, wq) = (&mut left[p], &mut right[0]);
    for (x, y) in wp.iter_mut().zip(wq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

pub fn singular_values<T: Scalar>(a: &DenseMatrix<T>) -> Vec<T> {
    svd(a).s
}

/// Sum of singular values.
pub fn trace_norm<T: Scalar>(a: &DenseMatrix<T>) -> T {
    singular_values(a).into_iter().sum()
}

/// Power iteration on `AᵀA` from a seeded Gaussian start.
///
/// Returns the largest `‖Av‖` seen over unit iterates, a lower bound on `σ_max`.
pub fn spectral_norm<T: Scalar>(a: &DenseMatrix<T>, iters: usize, seed: u64) -> T {
    if a.rows() == 0 || a.cols() == 0 {
        return T::zero();
    }
    let mut rng = seeded(seed, 0);
    let mut v: Vec<T> = (0..a.cols()).map(|_| gaussian(&mut rng)).collect();
    let mut best = T::zero();
    for _ in 0..iters.max(1) {
        let nv = norm2(&v);
        if nv == T::zero() {
            break;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let w = a.matvec(&v);
        best = best.max(norm2(&w));
        v = a.tmatvec(&w);
    }
    best
}

#[derive(Clone, Debug)]
pub struct SymmetricEigen<T> {
    /// Eigenvalues in decreasing order.
    pub values: Vec<T>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: DenseMatrix<T>,
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
pub fn symmetric_eigen<T: Scalar>(a: &DenseMatrix<T>) -> Result<SymmetricEigen<T>> {
    if !a.is_square() {
        return Err(Error::Shape(format!("{}x{} is not square", a.rows(), a.cols())));
    }
    let n = a.rows();
    let scale = a.max_abs();
    for i in 0..n {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > T::of(1e-9) * scale.max(T::one()) {
                return Err(Error::invalid("matrix is not symmetric"));
            }
        }
    }
    let mut m = a.clone();
    let mut vecs = DenseMatrix::identity(n);
    for _ in 0..MAX_SWEEPS {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off <= T::eps() * T::eps() * (scale * scale).max(T::min_positive_value()) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::of(2.0) * apq);
                let t = if theta == T::zero() {
                    T::one()
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (vecs[(k, p)], vecs[(k, q)]);
                    vecs[(k, p)] = c * vkp - s * vkq;
                    vecs[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[(y, y)].partial_cmp(&m[(x, x)]).unwrap_or(std::cmp::Ordering::Equal));
    Ok(SymmetricEigen {
        values: order.iter().map(|&k| m[(k, k)]).collect(),
        vectors: DenseMatrix::from_fn(n, n, |i, k| vecs[(i, order[k])]),
    })
}

/// `f(A) = Q f(Λ) Qᵀ` for symmetric `A`.
pub fn symmetric_apply<T: Scalar>(a: &DenseMatrix<T>, f: impl Fn(T) -> T) -> Result<DenseMatrix<T>> {
    let eig = symmetric_eigen(a)?;
    let n = a.rows();
    let fl: Vec<T> = eig.values.iter().map(|&l| f(l)).collect();
    Ok(DenseMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| eig.vectors[(i, k)] * fl[k] * eig.vectors[(j, k)]).sum()
    }))
}

/// Random orthogonal matrix (Gram–Schmidt of a Gaussian matrix).
pub fn random_orthogonal<T: Scalar>(n: usize, seed: u64) -> DenseMatrix<T> {
    let q = gram_schmidt_rows(&DenseMatrix::random_gaussian(n, n, seed), T::of(1e-12));
    debug_assert_eq!(q.rows(), n);
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn projector(q: &DenseMatrix<f64>) -> DenseMatrix<f64> {
        q.transpose().matmul(q).unwrap()
    }

    #[test]
    fn gram_schmidt_identity_and_rank_one() {
        let id = DenseMatrix::<f64>::identity(4);
        assert_eq!(gram_schmidt_rows(&id, 1e-12), id);
        let a = DenseMatrix::<f64>::from_rows(&[vec![1.0, 2.0, 2.0], vec![2.0, 4.0, 4.0]]).unwrap();
        let g = gram_schmidt_rows_default(&a);
        assert_eq!(g.rows(), 1);
        assert!((norm2(g.row(0)) - 1.0).abs() < 1e-15);
        assert!((g[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gram_schmidt_rank_three() {
        let left = DenseMatrix::<f64>::random_gaussian(6, 3, 1);
        let right = DenseMatrix::<f64>::random_gaussian(3, 10, 2);
        let a = left.matmul(&right).unwrap();
        let g = gram_schmidt_rows_default(&a);
        assert_eq!(g.rows(), 3);
        let gram = g.matmul(&g.transpose()).unwrap();
        assert!(gram.sub(&DenseMatrix::identity(3)).unwrap().max_abs() <= 1e-10);
        // The row space of `a` is the row space of `right`.
        let reference = gram_schmidt_rows_default(&right);
        let diff = projector(&g).sub(&projector(&reference)).unwrap();
        assert!(diff.max_abs() <= 1e-8);
    }

    #[test]
    fn gram_schmidt_zero_input_is_empty() {
        let z = DenseMatrix::<f64>::zeros(3, 4);
        assert_eq!(gram_schmidt_rows(&z, 1e-9).rows(), 0);
    }

    #[test]
    fn trace_norm_examples() {
        let d = DenseMatrix::<f64>::from_rows(&[vec![1.0, 0.0], vec![0.0, -2.0]]).unwrap();
        assert!((trace_norm(&d) - 3.0).abs() < 1e-14);
        let q = random_orthogonal::<f64>(7, 5);
        assert!((trace_norm(&q) - 7.0).abs() < 1e-10);
    }

    #[test]
    fn trace_norm_orthogonal_invariance() {
        let a = DenseMatrix::<f64>::random_gaussian(4, 4, 9);
        let u = random_orthogonal::<f64>(4, 10);
        let w = random_orthogonal::<f64>(4, 11);
        let b = u.matmul(&a).unwrap().matmul(&w).unwrap();
        assert!((trace_norm(&a) - trace_norm(&b)).abs() <= 1e-8);
    }

    #[test]
    fn svd_reconstructs_rectangular() {
        for (r, c) in [(5, 3), (3, 5), (4, 4)] {
            let a = DenseMatrix::<f64>::random_gaussian(r, c, (r * 10 + c) as u64);
            let f = svd(&a);
            let k = r.min(c);
            let rec = DenseMatrix::from_fn(r, c, |i, j| (0..k).map(|t| f.u[(i, t)] * f.s[t] * f.v[(j, t)]).sum());
            assert!(rec.sub(&a).unwrap().max_abs() < 1e-12);
            assert!(f.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn spectral_norm_examples() {
        let id = DenseMatrix::<f64>::identity(5);
        assert!((spectral_norm(&id, 3, 1) - 1.0).abs() <= 1e-10);
        let u = [1.0f64, -2.0, 2.0];
        let v = [3.0, 4.0];
        let r1 = DenseMatrix::outer(&u, &v);
        assert!((spectral_norm(&r1, 5, 2) - 15.0).abs() <= 1e-10);
    }

    #[test]
    fn spectral_norm_matches_jacobi_on_symmetric() {
        let g = DenseMatrix::<f64>::random_gaussian(8, 8, 21);
        let s = g.add(&g.transpose()).unwrap();
        let eig = symmetric_eigen(&s).unwrap();
        let lmax = eig.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!((spectral_norm(&s, 2000, 4) - lmax).abs() <= 1e-6);
    }

    #[test]
    fn symmetric_eigen_reconstructs() {
        let g = DenseMatrix::<f64>::random_gaussian(6, 6, 3);
        let s = g.add(&g.transpose()).unwrap();
        let e = symmetric_eigen(&s).unwrap();
        let rec = DenseMatrix::from_fn(6, 6, |i, j| {
            (0..6)
                .map(|k| e.vectors[(i, k)] * e.values[k] * e.vectors[(j, k)])
                .sum()
        });
        assert!(rec.sub(&s).unwrap().max_abs() < 1e-12);
        assert!(symmetric_eigen(&g).is_err());
        assert!(symmetric_eigen(&DenseMatrix::<f64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn norm_ordering_holds() {
        for seed in 0..10 {
            let a = DenseMatrix::<f64>::random_gaussian(5, 7, 100 + seed);
            let t = trace_norm(&a);
            let s = spectral_norm(&a, 200, seed);
            assert!(t + 1e-12 >= s);
            assert!(s + 1e-12 >= t / 5.0);
        }
    }
}

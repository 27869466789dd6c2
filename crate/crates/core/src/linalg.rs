//! Dense complex matrices. Eigenvalues and the matrix exponential are
//! delegated to nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Square complex matrix, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        CMatrix {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_row_major(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::WrongLength {
                expected: dim * dim,
                got: data.len(),
            });
        }
        Ok(CMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                let row = &rhs.data[k * n..(k + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> CMatrix {
        CMatrix {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * c).collect(),
        }
    }

    pub fn add(&self, rhs: &CMatrix) -> CMatrix {
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `sum |x_ij|^2`, which equals `Tr X^2` for hermitian `X`.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// `max |X - X*|`.
    pub fn hermitian_residual(&self) -> f64 {
        let n = self.dim;
        let mut r: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                r = r.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        r
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    /// Copy of the `rows x cols` block starting at `(r0, c0)`, row major.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                out.push(self[(r0 + i, c0 + j)]);
            }
        }
        out
    }

    /// Conjugation `k X k*`.
    pub fn conjugate_by(&self, k: &CMatrix) -> CMatrix {
        k.matmul(self).matmul(&k.adjoint())
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

fn to_dense(a: &CMatrix) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(a.dim, a.dim, &a.data)
}

fn from_dense(m: &DMatrix<Complex64>) -> CMatrix {
    CMatrix {
        dim: m.nrows(),
        data: m.transpose().as_slice().to_vec(),
    }
}

/// Matrix exponential (Pade with scaling and squaring).
pub fn expm(a: &CMatrix) -> CMatrix {
    from_dense(&to_dense(a).exp())
}

/// Iteration budget per unit of dimension.
const SWEEPS_PER_DIM: usize = 60;

fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

/// Eigenvalues of a real symmetric matrix (row major, only the lower
/// triangle is read), sorted nonincreasing.
pub fn symmetric_eigenvalues(a: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    if n == 0 {
        return Ok(Vec::new());
    }
    let budget = SWEEPS_PER_DIM * n;
    let eig = SymmetricEigen::try_new(DMatrix::from_row_slice(n, n, &a), f64::EPSILON, budget)
        .ok_or(Error::NoConvergence(budget))?;
    Ok(sorted_desc(eig.eigenvalues.as_slice()))
}

/// Eigenvalues of a hermitian matrix with multiplicity, sorted
/// nonincreasing. Only the lower triangle is read.
pub fn hermitian_eigenvalues(x: &CMatrix) -> Result<Vec<f64>> {
    let n = x.dim();
    if n == 0 {
        return Ok(Vec::new());
    }
    if x.is_real() {
        return symmetric_eigenvalues(x.data.iter().map(|z| z.re).collect(), n);
    }
    let budget = SWEEPS_PER_DIM * n;
    let eig = SymmetricEigen::try_new(to_dense(x), f64::EPSILON, budget).ok_or(Error::NoConvergence(budget))?;
    Ok(sorted_desc(eig.eigenvalues.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal_and_small_cases() {
        assert_eq!(symmetric_eigenvalues(vec![3.0], 1).unwrap(), vec![3.0]);
        let ev = symmetric_eigenvalues(vec![2.0, 1.0, 1.0, 2.0], 2).unwrap();
        assert!((ev[0] - 3.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
        let ev = symmetric_eigenvalues(vec![0.0; 9], 3).unwrap();
        assert_eq!(ev, vec![0.0; 3]);
    }

    #[test]
    fn tridiagonal_toeplitz_closed_form() {
        // eigenvalues of tridiag(-1, 2, -1) are 2 - 2 cos(k pi / (n + 1))
        let n = 40;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 2.0;
            if i + 1 < n {
                a[(i + 1) * n + i] = -1.0;
            }
        }
        let ev = symmetric_eigenvalues(a, n).unwrap();
        let mut exact: Vec<f64> = (1..=n)
            .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
            .collect();
        exact.sort_by(|x, y| y.total_cmp(x));
        for (a, b) in ev.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn dense_symmetric_trace_identities() {
        let n = 30;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = ((i * 7 + j * 13) % 11) as f64 - 5.0 + 0.1 * (i as f64).sin();
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        let tr: f64 = (0..n).map(|i| a[i * n + i]).sum();
        let fro: f64 = a.iter().map(|x| x * x).sum();
        let ev = symmetric_eigenvalues(a, n).unwrap();
        let s1: f64 = ev.iter().sum();
        let s2: f64 = ev.iter().map(|x| x * x).sum();
        assert!((s1 - tr).abs() < 1e-10 * fro.sqrt());
        assert!((s2 - fro).abs() < 1e-12 * fro);
        assert!(ev.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn chiral_block_with_large_zero_cluster() {
        // [[0, B], [B', 0]] with B of size 24 x 104 has 80 zero eigenvalues.
        let (s, t) = (24, 104);
        let n = s + t;
        let mut state = 0x9e37_79b9_7f4a_7c15u64;
        let mut a = vec![0.0; n * n];
        for i in 0..s {
            for j in 0..t {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let x = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                a[(s + j) * n + i] = x;
                a[i * n + s + j] = x;
            }
        }
        let ev = symmetric_eigenvalues(a, n).unwrap();
        assert_eq!(ev.iter().filter(|x| x.abs() < 1e-10).count(), t - s);
        for k in 0..n {
            assert!((ev[k] + ev[n - 1 - k]).abs() < 1e-12);
        }
    }

    #[test]
    fn hermitian_two_by_two() {
        // [[1, i], [-i, 1]] has eigenvalues 2 and 0
        let x = CMatrix::from_row_major(2, vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(1.0, 0.0)])
            .unwrap();
        let ev = hermitian_eigenvalues(&x).unwrap();
        assert!((ev[0] - 2.0).abs() < 1e-14 && ev[1].abs() < 1e-14);
    }

    #[test]
    fn expm_of_skew_generator_is_unitary() {
        let n = 5;
        let mut k = CMatrix::zeros(n);
        for i in 0..n {
            k[(i, i)] = c(0.0, 0.3 * i as f64);
            for j in i + 1..n {
                let z = c((i + j) as f64 * 0.2, (i as f64 - j as f64) * 0.3);
                k[(i, j)] = z;
                k[(j, i)] = -z.conj();
            }
        }
        let u = expm(&k);
        let err = u.matmul(&u.adjoint()).add(&CMatrix::identity(n).scale(c(-1.0, 0.0))).max_abs();
        assert!(err < 1e-12, "unitarity error {err}");
    }

    #[test]
    fn expm_matches_scalar_exponential() {
        let mut a = CMatrix::zeros(1);
        a[(0, 0)] = c(0.0, 2.0);
        let e = expm(&a)[(0, 0)];
        assert!((e - c(2.0f64.cos(), 2.0f64.sin())).norm() < 1e-14);
    }
}

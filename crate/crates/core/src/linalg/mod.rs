//! Dense complex linear algebra for the small matrices (n ≤ 16) that carry
//! Hamiltonians, projectors and resolvents.
//!
//! Everything here is written from scratch: LU with partial pivoting, a
//! Householder Hessenberg reduction followed by single-shift complex QR for
//! the spectrum, and inverse iteration for right and left eigenvectors.

mod eigen;
mod lu;

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

pub use eigen::{biorthonormalize, eigensystem, eigenvalues, EigenSystem, EigenTolerances};
pub use lu::{solve_linear, LuFactors};

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix is singular (pivot {pivot_index} has magnitude {magnitude:.3e})")]
    SingularMatrix { pivot_index: usize, magnitude: f64 },
    #[error("eigenvalues {first} and {second} are nearly degenerate (gap {gap:.3e} below {threshold:.3e})")]
    NearDegenerate {
        first: C64,
        second: C64,
        gap: f64,
        threshold: f64,
    },
    #[error("QR iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("left/right eigenvector pair {index} is nearly orthogonal (|<left|right>| = {overlap:.3e}); exceptional point?")]
    DefectivePair { index: usize, overlap: f64 },
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },
}

/// Column vector in ℂⁿ.
#[derive(Clone, PartialEq)]
pub struct CVector(Vec<C64>);

impl CVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![ZERO; dim])
    }

    pub fn from_vec(entries: Vec<C64>) -> Self {
        Self(entries)
    }

    pub fn from_real(entries: &[f64]) -> Self {
        Self(entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Standard basis vector `e_index`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[index] = ONE;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, C64> {
        self.0.iter()
    }

    /// ⟨self|other⟩, antilinear in `self`.
    pub fn inner(&self, other: &CVector) -> C64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, factor: C64) -> CVector {
        CVector(self.0.iter().map(|z| z * factor).collect())
    }

    pub fn scale_mut(&mut self, factor: C64) {
        for z in &mut self.0 {
            *z *= factor;
        }
    }

    /// `self + factor * other`
    pub fn axpy(&self, factor: C64, other: &CVector) -> CVector {
        CVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + factor * b)
                .collect(),
        )
    }

    pub fn normalized(&self) -> CVector {
        let n = self.norm();
        self.scale(C64::new(1.0 / n, 0.0))
    }

    pub fn conj(&self) -> CVector {
        CVector(self.0.iter().map(|z| z.conj()).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.is_finite())
    }
}

impl fmt::Debug for CVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl Index<usize> for CVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for CVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.0[i]
    }
}

impl Add for &CVector {
    type Output = CVector;
    fn add(self, rhs: &CVector) -> CVector {
        CVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &CVector {
    type Output = CVector;
    fn sub(self, rhs: &CVector) -> CVector {
        CVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Add for CVector {
    type Output = CVector;
    fn add(self, rhs: CVector) -> CVector {
        &self + &rhs
    }
}

impl Sub for CVector {
    type Output = CVector;
    fn sub(self, rhs: CVector) -> CVector {
        &self - &rhs
    }
}

impl FromIterator<C64> for CVector {
    fn from_iter<T: IntoIterator<Item = C64>>(iter: T) -> Self {
        CVector(iter.into_iter().collect())
    }
}

/// Square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
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

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    /// Builds a matrix from row-major entries; panics when the length is not a
    /// perfect square.
    pub fn from_row_major(entries: Vec<C64>) -> Self {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        assert_eq!(dim * dim, entries.len(), "entry count must be a square");
        Self { dim, data: entries }
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let dim = rows.len();
        Self::from_fn(dim, |i, j| rows[i][j])
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        Self::from_fn(dim, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn diagonal(entries: &[C64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &z) in entries.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    /// Outer product |u⟩⟨v|.
    pub fn outer(u: &CVector, v: &CVector) -> Self {
        Self::from_fn(u.dim(), |i, j| u[i] * v[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn column(&self, j: usize) -> CVector {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &CVector) {
        for i in 0..self.dim {
            self[(i, j)] = v[i];
        }
    }

    pub fn mul_vec(&self, v: &CVector) -> CVector {
        debug_assert_eq!(self.dim, v.dim());
        (0..self.dim)
            .map(|i| {
                self.data[i * self.dim..(i + 1) * self.dim]
                    .iter()
                    .zip(v.iter())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// ⟨u|self|v⟩
    pub fn sandwich(&self, u: &CVector, v: &CVector) -> C64 {
        u.inner(&self.mul_vec(v))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Spectral norm ‖A‖₂, from the largest eigenvalue of A†A.
    pub fn operator_norm(&self) -> f64 {
        let gram = &self.adjoint() * self;
        match eigenvalues(&gram) {
            Ok(ev) => ev.iter().map(|z| z.re).fold(0.0, f64::max).max(0.0).sqrt(),
            Err(_) => self.frobenius_norm(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }

    /// Hermitian part's "imaginary" component (A − A†)/(2i).
    pub fn anti_hermitian_part(&self) -> Self {
        let half_over_i = C64::new(0.0, -0.5);
        Self::from_fn(self.dim, |i, j| {
            (self[(i, j)] - self[(j, i)].conj()) * half_over_i
        })
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[C64]> = self.data.chunks(self.dim.max(1)).collect();
        f.debug_list().entries(rows).finish()
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        debug_assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

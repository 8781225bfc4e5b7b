// Copyright 2026 qheom Contributors
// SPDX-License-Identifier: Apache-2.0

//! Dense complex matrices and the density-matrix wrapper used everywhere else.
//!
//! Everything in this crate lives in dimension 2 or 4, so the representation
//! is a plain row-major `Vec<Complex64>` with no blocking or sparsity. The two
//! nontrivial routines are a cyclic Jacobi eigensolver for Hermitian matrices
//! (quadratically convergent, machine-precision accurate at these sizes) and a
//! scaling-and-squaring matrix exponential. Both are written for correctness,
//! not speed; the propagation hot path uses its own fixed-size kernels and
//! only comes back here at sampling time.

use num_complex::Complex64;
use thiserror::Error;

/// Shorthand used across the crate.
pub type C64 = Complex64;

/// Relative hermiticity tolerance for eigensolver input checks.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Errors from matrix construction and decomposition.
#[derive(Debug, Error)]
pub enum QmatError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix not Hermitian: max |A - A^dag| = {defect:e}")]
    NotHermitian { defect: f64 },
    #[error("Jacobi sweep limit reached; off-diagonal norm {off:e}")]
    EigenNoConvergence { off: f64 },
    #[error("not a density matrix: {reason}")]
    NotDensity { reason: String },
}

/// Dense square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Builds from a row-major slice; `data.len()` must be `dim * dim`.
    pub fn from_row_major(dim: usize, data: &[C64]) -> Self {
        assert_eq!(data.len(), dim * dim, "row-major data length");
        ComplexMatrix {
            dim,
            data: data.to_vec(),
        }
    }

    /// Builds from real entries, row-major.
    pub fn from_real(dim: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), dim * dim, "row-major data length");
        ComplexMatrix {
            dim,
            data: data.iter().map(|&x| C64::new(x, 0.0)).collect(),
        }
    }

    pub fn diag_real(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &x) in entries.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        m
    }

    /// Rank-one projector |psi><psi| from an (unnormalized) state vector.
    pub fn projector(psi: &[C64]) -> Self {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let dim = psi.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = psi[i] * psi[j].conj() / norm2;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn dagger(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    /// Entrywise complex conjugate (no transpose).
    pub fn conj(&self) -> Self {
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, z: C64) -> Self {
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|a| a * z).collect(),
        }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.data[i * n + k];
                if aik == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += aik * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Induced 1-norm (max absolute column sum); drives exp scaling.
    pub fn one_norm(&self) -> f64 {
        let n = self.dim;
        (0..n)
            .map(|j| (0..n).map(|i| self.data[i * n + j].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Max entry magnitude of `A - A^dag`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                let d = (self[(i, j)] - self[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Kronecker product `self (x) rhs`; dims multiply.
    pub fn kron(&self, rhs: &Self) -> Self {
        let (na, nb) = (self.dim, rhs.dim);
        let n = na * nb;
        let mut out = Self::zeros(n);
        for ia in 0..na {
            for ja in 0..na {
                let a = self[(ia, ja)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for ib in 0..nb {
                    for jb in 0..nb {
                        out[(ia * nb + ib, ja * nb + jb)] = a * rhs[(ib, jb)];
                    }
                }
            }
        }
        out
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
    /// rotations. Returns eigenvalues ascending and eigenvectors as the
    /// columns of a unitary, so `A V = V diag(values)`.
    ///
    /// Rejects input whose hermiticity defect exceeds
    /// `HERMITICITY_TOL * max(1, max_abs)`.
    pub fn hermitian_eigen(&self) -> Result<HermitianEigen, QmatError> {
        let scale = self.max_abs().max(1.0);
        let defect = self.hermiticity_defect();
        if defect > HERMITICITY_TOL * scale {
            return Err(QmatError::NotHermitian { defect });
        }

        let n = self.dim;
        let mut a = self.clone();
        // Work on the exactly Hermitian average to keep the diagonal real.
        for i in 0..n {
            for j in 0..n {
                let sym = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
                a[(i, j)] = sym;
                a[(j, i)] = sym.conj();
            }
        }
        let mut v = Self::identity(n);

        let off = |m: &ComplexMatrix| -> f64 {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        s += m[(i, j)].norm_sqr();
                    }
                }
            }
            s.sqrt()
        };

        let stop = 1e-15 * scale * (n as f64);
        let max_sweeps = 60;
        for _ in 0..max_sweeps {
            if off(&a) <= stop {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    let mag = apq.norm();
                    if mag <= 1e-300 {
                        continue;
                    }
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    // Rotation zeroing A[p][q]: phase w = apq/|apq|, angle from
                    // t^2 + 2 tau t - 1 = 0 with tau = (aqq - app)/(2|apq|).
                    let w = apq / mag;
                    let tau = (aqq - app) / (2.0 * mag);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;

                    // Rows p,q of A (left action of J^dag).
                    for j in 0..n {
                        let apj = a[(p, j)];
                        let aqj = a[(q, j)];
                        a[(p, j)] = apj * c - aqj * (w * s);
                        a[(q, j)] = apj * (w.conj() * s) + aqj * c;
                    }
                    // Columns p,q of A (right action of J).
                    for i in 0..n {
                        let aip = a[(i, p)];
                        let aiq = a[(i, q)];
                        a[(i, p)] = aip * c - aiq * (w.conj() * s);
                        a[(i, q)] = aip * (w * s) + aiq * c;
                    }
                    // Accumulate eigenvectors: V <- V J.
                    for i in 0..n {
                        let vip = v[(i, p)];
                        let viq = v[(i, q)];
                        v[(i, p)] = vip * c - viq * (w.conj() * s);
                        v[(i, q)] = vip * (w * s) + viq * c;
                    }
                }
            }
        }
        let residual = off(&a);
        if residual > 1e-10 * scale {
            return Err(QmatError::EigenNoConvergence { off: residual });
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
        let values: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
        let mut vectors = Self::zeros(n);
        for (col, &src) in order.iter().enumerate() {
            for row in 0..n {
                vectors[(row, col)] = v[(row, src)];
            }
        }
        Ok(HermitianEigen { values, vectors })
    }

    /// Matrix exponential by scaling and squaring with a Taylor core.
    ///
    /// The argument is scaled so its 1-norm is below 1/2, the series is summed
    /// to machine precision, and the result is squared back up. Verified by
    /// `exp(M) exp(-M) = I` to 1e-10 in the tests.
    pub fn matrix_exp(&self) -> Self {
        let n = self.dim;
        let norm = self.one_norm();
        let squarings = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as u32
        } else {
            0
        };
        let scaled = self.scale(C64::new(1.0 / f64::powi(2.0, squarings as i32), 0.0));

        let mut result = Self::identity(n);
        let mut term = Self::identity(n);
        for k in 1..=64 {
            term = term.mul(&scaled).scale(C64::new(1.0 / k as f64, 0.0));
            result = result.add(&term);
            if term.max_abs() < 1e-18 * result.max_abs().max(1.0) {
                break;
            }
        }
        for _ in 0..squarings {
            result = result.mul(&result);
        }
        result
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        let n = self.dim;
        &mut self.data[i * n + j]
    }
}

impl std::fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "ComplexMatrix dim={}", self.dim)?;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, " {:+.6}{:+.6}i", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Commutator `[a, b] = a b - b a`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.mul(b).sub(&b.mul(a))
}

/// Result of [`ComplexMatrix::hermitian_eigen`]: values ascending, eigenvectors
/// as columns of a unitary.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// Column `k` as a vector.
    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.vectors.dim()).map(|i| self.vectors[(i, k)]).collect()
    }
}

/// Hermitian unit-trace matrix with physicality checks.
///
/// Construction from raw matrices goes through [`DensityMatrix::from_matrix`],
/// which enforces hermiticity and unit trace; positivity is reported rather
/// than enforced because propagation produces harmless O(1e-12) negative
/// eigenvalues that downstream code clips explicitly.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    m: ComplexMatrix,
}

impl DensityMatrix {
    pub fn from_matrix(m: ComplexMatrix, tol: f64) -> Result<Self, QmatError> {
        let defect = m.hermiticity_defect();
        if defect > tol {
            return Err(QmatError::NotDensity {
                reason: format!("hermiticity defect {defect:e} > {tol:e}"),
            });
        }
        let tr = m.trace();
        let tr_err = (tr - C64::new(1.0, 0.0)).norm();
        if tr_err > tol {
            return Err(QmatError::NotDensity {
                reason: format!("trace error {tr_err:e} > {tol:e}"),
            });
        }
        Ok(DensityMatrix { m })
    }

    /// Skips validation; for states that are correct by construction.
    pub fn from_matrix_unchecked(m: ComplexMatrix) -> Self {
        DensityMatrix { m }
    }

    /// Pure state |psi><psi| (normalizes the input vector).
    pub fn pure(psi: &[C64]) -> Self {
        DensityMatrix {
            m: ComplexMatrix::projector(psi),
        }
    }

    /// Thermal state `exp(-beta h) / Z` of a Hermitian `h`.
    pub fn thermal(h: &ComplexMatrix, beta: f64) -> Self {
        let e = h.scale(C64::new(-beta, 0.0)).matrix_exp();
        let z = e.trace();
        DensityMatrix {
            m: e.scale(1.0 / z),
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.m
    }

    pub fn trace_error(&self) -> f64 {
        (self.m.trace() - C64::new(1.0, 0.0)).norm()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.m.hermiticity_defect()
    }

    pub fn min_eigenvalue(&self) -> Result<f64, QmatError> {
        let eig = self.m.hermitian_eigen()?;
        Ok(eig.values[0])
    }
}

//! Small dense symmetric linear algebra.
//!
//! Matrices are stored row-major in a flat `Vec<f64>`. Dimensions are small
//! (a handful of risk factors), so everything is written as plain loops.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute per-entry tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Cholesky pivots at or below this value reject the matrix.
pub const PIVOT_FLOOR: f64 = 1e-300;

/// Symmetric positive-definite matrix with its lower Cholesky factor.
///
/// Construction symmetrizes the input and factors it once; the value is
/// immutable afterwards. Quadratic forms and solves go through the factor,
/// the inverse is never formed on the hot path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SpdMatrix {
    dim: usize,
    entries: Vec<f64>,
    chol: Vec<f64>,
}

/// Builds an [`SpdMatrix`] from rows.
pub fn build_spd(rows: &[Vec<f64>]) -> Result<SpdMatrix> {
    let dim = rows.len();
    let mut flat = Vec::with_capacity(dim * dim);
    for (row, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(Error::NotSquare {
                rows: dim,
                row,
                cols: r.len(),
            });
        }
        flat.extend_from_slice(r);
    }
    SpdMatrix::from_flat(dim, flat)
}

impl SpdMatrix {
    /// Builds from a row-major `dim × dim` buffer.
    pub fn from_flat(dim: usize, mut entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("matrix dimension must be positive"));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let a = entries[i * dim + j];
                let b = entries[j * dim + i];
                let gap = libm::fabs(a - b);
                if !(gap <= SYMMETRY_TOL) {
                    return Err(Error::NotSymmetric { row: i, col: j, gap });
                }
                let avg = 0.5 * (a + b);
                entries[i * dim + j] = avg;
                entries[j * dim + i] = avg;
            }
        }
        let chol = cholesky(dim, &entries)?;
        Ok(Self { dim, entries, chol })
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self {
            dim,
            chol: entries.clone(),
            entries,
        }
    }

    /// Diagonal matrix; every entry of `diag` must be positive.
    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let dim = diag.len();
        let mut entries = vec![0.0; dim * dim];
        for (i, &d) in diag.iter().enumerate() {
            entries[i * dim + i] = d;
        }
        Self::from_flat(dim, entries)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Row-major lower Cholesky factor `L` with `L Lᵀ = self`.
    pub fn chol(&self) -> &[f64] {
        &self.chol
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    /// Forward substitution: returns `L⁻¹ v`.
    pub fn solve_lower(&self, v: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.dim, v.len())?;
        let mut y = v.to_vec();
        self.solve_lower_in_place(&mut y);
        Ok(y)
    }

    fn solve_lower_in_place(&self, y: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            let mut acc = y[i];
            for j in 0..i {
                acc -= self.chol[i * d + j] * y[j];
            }
            y[i] = acc / self.chol[i * d + i];
        }
    }

    fn solve_upper_in_place(&self, y: &mut [f64]) {
        // Lᵀ x = y
        let d = self.dim;
        for i in (0..d).rev() {
            let mut acc = y[i];
            for j in (i + 1)..d {
                acc -= self.chol[j * d + i] * y[j];
            }
            y[i] = acc / self.chol[i * d + i];
        }
    }

    /// Returns `self⁻¹ v` via two triangular solves.
    pub fn solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.dim, v.len())?;
        let mut y = v.to_vec();
        self.solve_lower_in_place(&mut y);
        self.solve_upper_in_place(&mut y);
        Ok(y)
    }

    /// Returns `L u`.
    pub fn mul_chol(&self, u: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.dim, u.len())?;
        let d = self.dim;
        Ok((0..d)
            .map(|i| (0..=i).fold(0.0, |acc, j| acc + self.chol[i * d + j] * u[j]))
            .collect())
    }

    /// `vᵀ self⁻¹ v` without allocating; `v` must have length `dim`.
    pub(crate) fn quad_form_unchecked(&self, v: &[f64], scratch: &mut [f64]) -> f64 {
        scratch[..self.dim].copy_from_slice(v);
        self.solve_lower_in_place(&mut scratch[..self.dim]);
        squared_norm(&scratch[..self.dim])
    }

    /// Explicit inverse, for diagnostics only.
    pub fn inverse(&self) -> Vec<Vec<f64>> {
        let d = self.dim;
        let mut out = vec![vec![0.0; d]; d];
        let mut e = vec![0.0; d];
        for j in 0..d {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            self.solve_lower_in_place(&mut e);
            self.solve_upper_in_place(&mut e);
            for i in 0..d {
                out[i][j] = e[i];
            }
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = 0.5 * (out[i][j] + out[j][i]);
                out[i][j] = avg;
                out[j][i] = avg;
            }
        }
        out
    }
}

impl TryFrom<Vec<Vec<f64>>> for SpdMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        build_spd(&rows)
    }
}

impl From<SpdMatrix> for Vec<Vec<f64>> {
    fn from(m: SpdMatrix) -> Self {
        m.rows()
    }
}

fn cholesky(dim: usize, a: &[f64]) -> Result<Vec<f64>> {
    let mut l = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut acc = a[i * dim + j];
            for k in 0..j {
                acc -= l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                if !(acc > PIVOT_FLOOR) {
                    return Err(Error::NotPositiveDefinite { index: i, pivot: acc });
                }
                l[i * dim + i] = libm::sqrt(acc);
            } else {
                l[i * dim + j] = acc / l[j * dim + j];
            }
        }
    }
    Ok(l)
}

/// Sum of squares, accumulated left to right.
#[inline]
pub fn squared_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, &x| acc + x * x)
}

/// Squared Mahalanobis norm `vᵀ m⁻¹ v`.
pub fn quad_form(m: &SpdMatrix, v: &[f64]) -> Result<f64> {
    let y = m.solve_lower(v)?;
    Ok(squared_norm(&y))
}

/// Spectral norm `max |λ|` of a symmetric matrix.
pub fn operator_norm(rows: &[Vec<f64>]) -> Result<f64> {
    let eig = symmetric_eigenvalues(rows)?;
    Ok(eig.iter().fold(0.0_f64, |acc, &l| acc.max(libm::fabs(l))))
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, unsorted.
pub fn symmetric_eigenvalues(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = rows.len();
    let mut a = vec![0.0; n * n];
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(Error::NotSquare {
                rows: n,
                row: i,
                cols: r.len(),
            });
        }
        a[i * n..(i + 1) * n].copy_from_slice(r);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = libm::fabs(a[i * n + j] - a[j * n + i]);
            if !(gap <= SYMMETRY_TOL) {
                return Err(Error::NotSymmetric { row: i, col: j, gap });
            }
            let avg = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = avg;
            a[j * n + i] = avg;
        }
    }
    jacobi_sweeps(n, &mut a);
    Ok((0..n).map(|i| a[i * n + i]).collect())
}

const MAX_SWEEPS: usize = 64;

fn off_diagonal_norm(n: usize, a: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    libm::sqrt(s)
}

fn jacobi_sweeps(n: usize, a: &mut [f64]) {
    let frob = libm::sqrt(squared_norm(a));
    if frob == 0.0 {
        return;
    }
    // Relative to ‖A‖_F so the result is homogeneous under scaling.
    let tol = 1e-14 * frob;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(n, a) < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = libm::copysign(1.0, theta) / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
}

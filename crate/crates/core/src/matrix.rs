//! Dense symmetric matrices with an exact-symmetry invariant.

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{CggmError, Result};

/// A dense `p x p` matrix whose entries satisfy `a[i][j] == a[j][i]` exactly.
///
/// Constructors reject any asymmetry, so every value of this type can be
/// handed to a Cholesky factorization without re-checking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    /// Wraps `m` after verifying it is square and exactly symmetric.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(CggmError::ShapeMismatch(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let p = m.nrows();
        for j in 0..p {
            for i in (j + 1)..p {
                if m[(i, j)] != m[(j, i)] {
                    return Err(CggmError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { inner: m })
    }

    /// Averages `m` with its transpose. Use for results of floating-point
    /// products that are symmetric only up to rounding.
    pub fn symmetrize(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        // floating-point addition commutes, so the result is bitwise symmetric
        let s = (m + t) * 0.5;
        Self { inner: s }
    }

    pub fn identity(p: usize) -> Self {
        Self {
            inner: DMatrix::identity(p, p),
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let p = d.len();
        let mut m = DMatrix::zeros(p, p);
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        Self { inner: m }
    }

    /// Builds a matrix from its upper triangle given row by row, so
    /// `rows[i]` holds entries `(i, i), (i, i + 1), ..., (i, p - 1)`.
    pub fn from_upper_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        let mut m = DMatrix::zeros(p, p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p - i {
                return Err(CggmError::DimensionMismatch {
                    expected: p - i,
                    got: row.len(),
                });
            }
            for (offset, &v) in row.iter().enumerate() {
                m[(i, i + offset)] = v;
                m[(i + offset, i)] = v;
            }
        }
        Ok(Self { inner: m })
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    /// `trace(self * other)` for symmetric arguments, computed as the
    /// entrywise inner product.
    pub fn trace_product(&self, other: &SymMatrix) -> f64 {
        self.inner.dot(&other.inner)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    pub fn cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        self.inner
            .clone()
            .cholesky()
            .ok_or(CggmError::NotPositiveDefinite)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_ok()
    }

    /// `log det` from the Cholesky pivots.
    pub fn log_det(&self) -> Result<f64> {
        let chol = self.cholesky()?;
        Ok(log_det_from_cholesky(&chol))
    }

    pub fn inverse(&self) -> Result<SymMatrix> {
        let chol = self.cholesky()?;
        Ok(SymMatrix::symmetrize(chol.inverse()))
    }

    /// Largest absolute difference between `self` and its transpose.
    pub fn asymmetry(&self) -> f64 {
        (&self.inner - self.inner.transpose()).amax()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| self.inner.row(i).iter().copied().collect())
            .collect()
    }
}

pub(crate) fn log_det_from_cholesky(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = CggmError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let p = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(CggmError::DimensionMismatch {
                expected: p,
                got: bad.len(),
            });
        }
        SymMatrix::new(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.to_rows()
    }
}

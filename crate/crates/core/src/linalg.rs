//! Covariance square roots and random rotations.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::rng::RngStream;

const SYMMETRY_TOL: f64 = 1e-12;
const JITTER_SCALE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is {rows}x{cols}, expected a square matrix")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix has zero dimension")]
    Empty,
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not symmetric: |a[{row},{col}] - a[{col},{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },
    #[error("matrix is not positive definite even after jitter")]
    NotPositiveDefinite,
}

fn check_square_finite(m: &DMatrix<f64>) -> Result<usize, LinalgError> {
    let (rows, cols) = m.shape();
    if rows != cols {
        return Err(LinalgError::NotSquare { rows, cols });
    }
    if rows == 0 {
        return Err(LinalgError::Empty);
    }
    for c in 0..cols {
        for r in 0..rows {
            if !m[(r, c)].is_finite() {
                return Err(LinalgError::NonFinite { row: r, col: c });
            }
        }
    }
    Ok(rows)
}

/// A symmetric (nominally positive semi-definite) covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    /// Validates shape, finiteness and symmetry (relative tolerance 1e-12).
    pub fn new(m: DMatrix<f64>) -> Result<Self, LinalgError> {
        let n = check_square_finite(&m)?;
        let scale = m.amax().max(1.0);
        for c in 0..n {
            for r in (c + 1)..n {
                let gap = (m[(r, c)] - m[(c, r)]).abs();
                if gap > SYMMETRY_TOL * scale {
                    return Err(LinalgError::NotSymmetric { row: r, col: c, gap });
                }
            }
        }
        Ok(Self(m))
    }

    /// Replaces `m` by `(m + mᵀ)/2`.
    pub fn symmetrize(m: DMatrix<f64>) -> Result<Self, LinalgError> {
        check_square_finite(&m)?;
        let t = m.transpose();
        Ok(Self((m + t) * 0.5))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self(DMatrix::identity(n, n) * s)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Cholesky factor, retrying once with `1e-9·trace/n` added to the
    /// diagonal. Does not fall back to an eigen square root.
    pub fn cholesky_with_jitter(&self) -> Result<(DMatrix<f64>, bool), LinalgError> {
        if let Some(c) = Cholesky::new(self.0.clone()) {
            return Ok((c.l(), false));
        }
        let jittered = self.jittered();
        Cholesky::new(jittered)
            .map(|c| (c.l(), true))
            .ok_or(LinalgError::NotPositiveDefinite)
    }

    fn jittered(&self) -> DMatrix<f64> {
        let n = self.dim();
        let jitter = JITTER_SCALE * self.trace().abs().max(f64::MIN_POSITIVE) / n as f64;
        &self.0 + DMatrix::identity(n, n) * jitter
    }

    /// Symmetrizes, then makes sure a Cholesky factor exists, adding jitter
    /// once if needed. Used after every covariance update in the filter.
    pub fn condition(m: DMatrix<f64>) -> Result<Self, LinalgError> {
        let sym = Self::symmetrize(m)?;
        if Cholesky::new(sym.0.clone()).is_some() {
            return Ok(sym);
        }
        let jittered = sym.jittered();
        if Cholesky::new(jittered.clone()).is_some() {
            Ok(Self(jittered))
        } else {
            Err(LinalgError::NotPositiveDefinite)
        }
    }
}

impl TryFrom<DMatrix<f64>> for SpdMatrix {
    type Error = LinalgError;

    fn try_from(m: DMatrix<f64>) -> Result<Self, Self::Error> {
        Self::new(m)
    }
}

/// Lower-triangular `L` with `L·Lᵀ = P`.
///
/// Cholesky first, then Cholesky of the jittered matrix, and finally the
/// symmetric eigen square root with negative eigenvalues clamped to zero
/// (re-triangularised through a QR step).
pub fn spd_sqrt(p: &SpdMatrix) -> Result<DMatrix<f64>, LinalgError> {
    check_square_finite(&p.0)?;
    if let Ok((l, _)) = p.cholesky_with_jitter() {
        return Ok(l);
    }
    Ok(eigen_sqrt_lower(&p.0))
}

fn eigen_sqrt_lower(p: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(p.clone());
    let mut factor = eig.eigenvectors.clone();
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        factor.column_mut(j).scale_mut(s);
    }
    // factor·factorᵀ = P; with factorᵀ = Q·R we get P = Rᵀ·R, so Rᵀ is a
    // lower-triangular square root.
    let r = factor.transpose().qr().r();
    let mut l = r.transpose();
    for j in 0..l.ncols() {
        if l[(j, j)] < 0.0 {
            l.column_mut(j).neg_mut();
        }
    }
    l
}

/// Orthogonal matrix with `QᵀQ = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMatrix(DMatrix<f64>);

impl OrthogonalMatrix {
    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// Haar-uniform random orthogonal matrix: Q factor of a standard Gaussian
/// matrix with columns flipped so that `diag(R) > 0`.
pub fn haar_orthogonal(n: usize, rng: &mut RngStream) -> Result<OrthogonalMatrix, LinalgError> {
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    let x = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = x.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(OrthogonalMatrix(q))
}

//! Real-valued lifting of complex vectors and Hermitian matrices.
//!
//! A complex vector `v ∈ C^N` maps to the stacked real vector
//! `(Re v; Im v) ∈ R^{2N}`, and a Hermitian matrix `R` maps to the
//! symmetric block matrix `[[Re R, -Im R], [Im R, Re R]]`. The lifting
//! preserves the forms the rest of the crate relies on:
//! `Re{w^H a} = w_r^T a_r` and `w^H R w = w_r^T R_r w_r`.

use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

/// Complex scalar used throughout the crate.
pub type C64 = Complex<f64>;

/// Absolute tolerance for Hermitian / symmetry / block-structure checks.
pub const STRUCTURE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LiftError {
    #[error("lifted vector length must be even, got {0}")]
    OddLength(usize),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian: max deviation {deviation:.3e} exceeds {tol:.1e}")]
    NotHermitian { deviation: f64, tol: f64 },
    #[error("matrix is not symmetric: max deviation {deviation:.3e} exceeds {tol:.1e}")]
    NotSymmetric { deviation: f64, tol: f64 },
    #[error("matrix lacks [[A, -B], [B, A]] block structure: max deviation {deviation:.3e}")]
    BadBlockStructure { deviation: f64 },
    #[error("matrix dimension {0} must be even")]
    OddDimension(usize),
}

/// Real 2N-vector image of a complex N-vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedVector {
    data: DVector<f64>,
}

impl LiftedVector {
    /// Wraps a real vector, requiring even length.
    pub fn from_vector(data: DVector<f64>) -> Result<Self, LiftError> {
        if data.len() % 2 != 0 || data.is_empty() {
            return Err(LiftError::OddLength(data.len()));
        }
        Ok(Self { data })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self, LiftError> {
        Self::from_vector(DVector::from_column_slice(values))
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.data
    }

    /// Total real dimension 2N.
    pub fn dim(&self) -> usize {
        self.data.len()
    }

    /// Underlying complex dimension N.
    pub fn half_dim(&self) -> usize {
        self.data.len() / 2
    }

    pub fn norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn dot(&self, other: &LiftedVector) -> f64 {
        self.data.dot(&other.data)
    }

    /// Inverse lifting: `z_k = v_k + i v_{N+k}`.
    pub fn to_complex(&self) -> DVector<C64> {
        let n = self.half_dim();
        DVector::from_fn(n, |k, _| Complex::new(self.data[k], self.data[n + k]))
    }
}

/// Real 2N x 2N symmetric image of a complex Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedMatrix {
    data: DMatrix<f64>,
}

impl LiftedMatrix {
    /// Wraps an even-dimensional symmetric matrix.
    ///
    /// Images of Hermitian matrices additionally carry the
    /// `[[A, -B], [B, A]]` block structure, which [`lift_matrix`] guarantees
    /// by construction and [`Self::block_structure_deviation`] measures; the
    /// constructor does not require it so that plain symmetric quadratic
    /// forms (diagonal loadings, test matrices) can flow through the same
    /// solver paths.
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Self, LiftError> {
        if data.nrows() != data.ncols() {
            return Err(LiftError::NotSquare {
                rows: data.nrows(),
                cols: data.ncols(),
            });
        }
        if data.nrows() % 2 != 0 || data.is_empty() {
            return Err(LiftError::OddDimension(data.nrows()));
        }
        let sym_dev = max_symmetry_deviation(&data);
        if sym_dev > STRUCTURE_TOL {
            return Err(LiftError::NotSymmetric {
                deviation: sym_dev,
                tol: STRUCTURE_TOL,
            });
        }
        Ok(Self { data })
    }

    /// Max deviation from the `[[A, -B], [B, A]]` structure with A symmetric
    /// and B antisymmetric; zero (to rounding) for lifted Hermitian inputs.
    pub fn block_structure_deviation(&self) -> f64 {
        max_block_deviation(&self.data)
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn half_dim(&self) -> usize {
        self.data.nrows() / 2
    }

    /// Quadratic form `w^T R w`.
    pub fn quad_form(&self, w: &LiftedVector) -> f64 {
        (w.data().transpose() * &self.data * w.data())[(0, 0)]
    }

    /// Diagonally loaded copy `R + rho I`; preserves the block structure.
    pub fn loaded(&self, rho: f64) -> LiftedMatrix {
        let mut data = self.data.clone();
        for i in 0..data.nrows() {
            data[(i, i)] += rho;
        }
        LiftedMatrix { data }
    }

    /// Smallest eigenvalue (symmetric eigendecomposition).
    pub fn min_eigenvalue(&self) -> f64 {
        self.data
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Inverse lifting back to the complex Hermitian matrix.
    pub fn to_complex(&self) -> DMatrix<C64> {
        let n = self.half_dim();
        DMatrix::from_fn(n, n, |i, j| {
            Complex::new(self.data[(i, j)], self.data[(n + i, j)])
        })
    }
}

/// `(Re v; Im v)` image of a complex vector.
pub fn lift_vector(v: &DVector<C64>) -> LiftedVector {
    let n = v.len();
    let data = DVector::from_fn(2 * n, |k, _| if k < n { v[k].re } else { v[k - n].im });
    LiftedVector { data }
}

/// `[[Re R, -Im R], [Im R, Re R]]` image of a Hermitian matrix.
///
/// Rejects inputs whose Hermitian deviation exceeds [`STRUCTURE_TOL`].
pub fn lift_matrix(r: &DMatrix<C64>) -> Result<LiftedMatrix, LiftError> {
    if r.nrows() != r.ncols() {
        return Err(LiftError::NotSquare {
            rows: r.nrows(),
            cols: r.ncols(),
        });
    }
    let dev = max_hermitian_deviation(r);
    if dev > STRUCTURE_TOL {
        return Err(LiftError::NotHermitian {
            deviation: dev,
            tol: STRUCTURE_TOL,
        });
    }
    let n = r.nrows();
    let data = DMatrix::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, true) => r[(i, j)].re,
        (true, false) => -r[(i, j - n)].im,
        (false, true) => r[(i - n, j)].im,
        (false, false) => r[(i - n, j - n)].re,
    });
    Ok(LiftedMatrix { data })
}

/// Max element deviation `|R - R^H|`.
pub fn max_hermitian_deviation(r: &DMatrix<C64>) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..r.nrows() {
        for j in 0..r.ncols() {
            dev = dev.max((r[(i, j)] - r[(j, i)].conj()).norm());
        }
    }
    dev
}

fn max_symmetry_deviation(m: &DMatrix<f64>) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    dev
}

fn max_block_deviation(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows() / 2;
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let a = m[(i, j)];
            let b = m[(n + i, j)];
            // A symmetric, B antisymmetric, top-right = -B, bottom-right = A.
            dev = dev.max((a - m[(j, i)]).abs());
            dev = dev.max((b + m[(n + j, i)]).abs());
            dev = dev.max((m[(i, n + j)] + b).abs());
            dev = dev.max((m[(n + i, n + j)] - a).abs());
        }
    }
    dev
}

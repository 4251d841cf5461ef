use nalgebra::{Cholesky, Dyn};

use super::{Matrix, Vector};
use crate::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;

/// A symmetric positive-definite matrix together with its Cholesky factor.
///
/// The factorization is computed once at construction; solves, inverses and
/// log-determinants reuse it.
#[derive(Clone, Debug)]
pub struct SpdMatrix {
    matrix: Matrix,
    chol: Cholesky<f64, Dyn>,
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix
    }
}

impl SpdMatrix {
    /// Validates symmetry (1e-10 relative to the largest entry) and factors.
    /// `name` is used in error messages.
    pub fn new(matrix: Matrix, name: &str) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::dims(
                name,
                "square matrix",
                format!("{}x{}", matrix.nrows(), matrix.ncols()),
            ));
        }
        super::ensure_finite(&matrix, name)?;
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSpd {
                name: format!("{name} (asymmetry {asym:.3e})"),
            });
        }
        Self::factor(matrix, name)
    }

    /// Replaces `matrix` by `(m + mᵀ)/2` before factoring.
    pub fn from_symmetrized(matrix: Matrix, name: &str) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::dims(
                name,
                "square matrix",
                format!("{}x{}", matrix.nrows(), matrix.ncols()),
            ));
        }
        super::ensure_finite(&matrix, name)?;
        Self::factor(super::symmetrize(&matrix), name)
    }

    pub fn identity(n: usize) -> Self {
        Self::factor(Matrix::identity(n, n), "identity").expect("identity is SPD")
    }

    pub fn from_diagonal(diag: &Vector, name: &str) -> Result<Self> {
        if diag.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::NotSpd {
                name: name.to_string(),
            });
        }
        Self::factor(Matrix::from_diagonal(diag), name)
    }

    fn factor(matrix: Matrix, name: &str) -> Result<Self> {
        let chol = Cholesky::new(matrix.clone()).ok_or_else(|| Error::NotSpd {
            name: name.to_string(),
        })?;
        if chol.l_dirty().diagonal().iter().any(|&p| !(p > 0.0)) {
            return Err(Error::NotSpd {
                name: name.to_string(),
            });
        }
        Ok(Self { matrix, chol })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    /// Lower-triangular Cholesky factor `C` with `C Cᵀ = self`.
    pub fn cholesky_factor(&self) -> Matrix {
        self.chol.l()
    }

    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        if b.nrows() != self.dim() {
            return Err(Error::dims("spd solve", self.dim(), b.nrows()));
        }
        Ok(self.chol.solve(b))
    }

    pub fn solve_vec(&self, b: &Vector) -> Result<Vector> {
        if b.len() != self.dim() {
            return Err(Error::dims("spd solve", self.dim(), b.len()));
        }
        Ok(self.chol.solve(b))
    }

    /// `vᵀ S⁻¹ v`, via a single triangular solve.
    pub fn inv_quad_form(&self, v: &Vector) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(Error::dims("spd quadratic form", self.dim(), v.len()));
        }
        let mut w = v.clone();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut w);
        Ok(w.norm_squared())
    }

    pub fn inverse(&self) -> Result<SpdMatrix> {
        Self::factor(super::symmetrize(&self.chol.inverse()), "inverse")
    }

    pub fn logdet(&self) -> f64 {
        2.0 * self
            .chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|p| p.ln())
            .sum::<f64>()
    }

    pub fn scale(&self, c: f64) -> Result<SpdMatrix> {
        SpdMatrix::factor(&self.matrix * c, "scaled matrix")
    }
}

/// Solves `s · x = b` through the Cholesky factor of `s`.
pub fn spd_solve(s: &SpdMatrix, b: &Matrix) -> Result<Matrix> {
    s.solve(b)
}

pub fn spd_inverse(s: &SpdMatrix) -> Result<SpdMatrix> {
    s.inverse()
}

pub fn spd_logdet(s: &SpdMatrix) -> f64 {
    s.logdet()
}

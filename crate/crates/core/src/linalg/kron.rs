use super::{Matrix, Vector};
use crate::{Error, Result};

/// Kronecker product `a ⊗ b`: block `(i, j)` of the result is `a[(i, j)] · b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vec(m: &Matrix) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`]: rebuilds a `rows × cols` matrix from its stacked columns.
pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Result<Matrix> {
    if v.len() != rows * cols {
        return Err(Error::dims(
            "unvec",
            format!("length {}", rows * cols),
            format!("length {}", v.len()),
        ));
    }
    Ok(Matrix::from_column_slice(rows, cols, v.as_slice()))
}

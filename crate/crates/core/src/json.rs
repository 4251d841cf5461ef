//! Row-major nested-array encoding of matrices for the JSON file formats.

use crate::linalg::{Matrix, SpdMatrix, Vector};
use crate::{Error, Result};

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::Parse(format!(
            "`{what}`: ragged rows ({} vs {ncols} columns)",
            bad.len()
        )));
    }
    let m = Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
    crate::linalg::ensure_finite(&m, what)?;
    Ok(m)
}

pub fn rows_to_spd(rows: &[Vec<f64>], what: &str) -> Result<SpdMatrix> {
    SpdMatrix::new(rows_to_matrix(rows, what)?, what)
}

pub fn vector_to_vec(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

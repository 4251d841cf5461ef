use rand::Rng;
use rand_distr::StandardNormal;

use super::{Matrix, SpdMatrix};
use crate::{Error, Result};

/// `rows × cols` matrix of iid standard normal draws, filled column by column.
pub fn standard_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_iterator(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)),
    )
}

/// Draws `X ~ MN(mean, u, v)`, i.e. `vec(X) ~ N(vec(mean), v ⊗ u)`, as
/// `mean + chol(u) · Z · chol(v)ᵀ`.
pub fn sample_matrix_normal<R: Rng + ?Sized>(
    mean: &Matrix,
    u: &SpdMatrix,
    v: &SpdMatrix,
    rng: &mut R,
) -> Result<Matrix> {
    if u.dim() != mean.nrows() || v.dim() != mean.ncols() {
        return Err(Error::dims(
            "matrix normal",
            format!(
                "row cov {}x{}, col cov {}x{}",
                mean.nrows(),
                mean.nrows(),
                mean.ncols(),
                mean.ncols()
            ),
            format!("{}x{}, {}x{}", u.dim(), u.dim(), v.dim(), v.dim()),
        ));
    }
    let z = standard_normal_matrix(mean.nrows(), mean.ncols(), rng);
    Ok(mean + u.cholesky_factor() * z * v.cholesky_factor().transpose())
}

//! Dense linear-algebra primitives: Kronecker products, column-stacking
//! vectorization, commutation permutations, SPD factorizations, matrix-normal
//! sampling, chi-square quantiles and ellipsoids.
//!
//! Matrices are `nalgebra::DMatrix<f64>`, stored column-major. `vec` stacks
//! columns, so `vec(M)` is exactly the storage slice of `M`, and every formula
//! in the crate is written in that convention: `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.

mod chi2;
mod ellipsoid;
mod kron;
mod normal;
mod permutation;
mod spd;

pub use chi2::{chi2_cdf, chi2_quantile, ln_gamma, regularized_gamma_lower};
pub use ellipsoid::{ellipsoid_volume, unit_ball_log_volume, Ellipsoid};
pub use kron::{kron, unvec, vec};
pub use normal::{sample_matrix_normal, standard_normal_matrix};
pub use permutation::{commutation_matrix, PermutationMatrix};
pub use spd::{spd_inverse, spd_logdet, spd_solve, SpdMatrix};

pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;

/// Fails with `NonFinite` if any entry is NaN or infinite.
pub fn ensure_finite(m: &Matrix, what: &str) -> crate::Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(crate::Error::NonFinite(what.to_string()))
    }
}

/// `‖a − b‖_F / ‖b‖_F`, falling back to the absolute error when `b` is zero.
pub fn rel_frobenius(a: &Matrix, b: &Matrix) -> f64 {
    let diff = (a - b).norm();
    let base = b.norm();
    if base > 0.0 {
        diff / base
    } else {
        diff
    }
}

/// Returns `(m + mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

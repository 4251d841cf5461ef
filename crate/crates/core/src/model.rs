//! Inverse and forward parameter triples and the mapping Ψ between them.
//!
//! The inverse model is `Y ~ N_L(0, Γ)`, `X | Y = A Y + e` with
//! `e ~ N_D(0, Σ)` and Σ diagonal. The forward model is `X ~ N_D(0, Γ*)`,
//! `Y | X = A* X + ε` with `ε ~ N_L(0, Σ*)`. Ψ carries one triple to the other
//! and only ever inverts `L × L` or diagonal matrices.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::json::{matrix_to_rows, rows_to_matrix, rows_to_spd, vector_to_vec};
use crate::linalg::{rel_frobenius, Matrix, SpdMatrix, Vector};
use crate::{Error, Result};

/// Floor applied to the diagonal noise variances Σ_jj.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Inverse-model parameters `(Γ, A, Σ)`: `gamma` is `L × L`, `slope` is
/// `D × L`, and Σ is stored as its diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct InverseParams {
    gamma: SpdMatrix,
    slope: Matrix,
    sigma_diag: Vector,
}

impl InverseParams {
    pub fn new(gamma: SpdMatrix, slope: Matrix, sigma_diag: Vector) -> Result<Self> {
        let (d, l) = slope.shape();
        if gamma.dim() != l {
            return Err(Error::dims(
                "inverse params: gamma vs slope columns",
                l,
                gamma.dim(),
            ));
        }
        if sigma_diag.len() != d {
            return Err(Error::dims(
                "inverse params: sigma_diag vs slope rows",
                d,
                sigma_diag.len(),
            ));
        }
        crate::linalg::ensure_finite(&slope, "slope")?;
        let mut sigma_diag = sigma_diag;
        let mut floored = 0;
        for s in sigma_diag.iter_mut() {
            if !s.is_finite() || *s < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "noise variances must be non-negative and finite, got {s}"
                )));
            }
            if *s < SIGMA_FLOOR {
                *s = SIGMA_FLOOR;
                floored += 1;
            }
        }
        if floored > 0 {
            warn!("{floored} of {d} noise variances floored at {SIGMA_FLOOR:e}");
        }
        Ok(Self {
            gamma,
            slope,
            sigma_diag,
        })
    }

    pub fn gamma(&self) -> &SpdMatrix {
        &self.gamma
    }

    pub fn slope(&self) -> &Matrix {
        &self.slope
    }

    pub fn sigma_diag(&self) -> &Vector {
        &self.sigma_diag
    }

    /// Number of responses L.
    pub fn l(&self) -> usize {
        self.slope.ncols()
    }

    /// Number of predictors D.
    pub fn d(&self) -> usize {
        self.slope.nrows()
    }

    /// `Σ⁻¹ A` (row scaling, no inversion).
    pub fn sigma_inv_slope(&self) -> Matrix {
        let mut m = self.slope.clone();
        for (mut row, s) in m.row_iter_mut().zip(self.sigma_diag.iter()) {
            row /= *s;
        }
        m
    }

    pub fn with_slope(&self, slope: Matrix) -> Result<Self> {
        Self::new(self.gamma.clone(), slope, self.sigma_diag.clone())
    }
}

/// Forward-model parameters `(Γ*, A*, Σ*)`: `gamma_star` is `D × D`,
/// `slope_star` is `L × D`, `sigma_star` is `L × L`.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardParams {
    gamma_star: SpdMatrix,
    slope_star: Matrix,
    sigma_star: SpdMatrix,
}

impl ForwardParams {
    pub fn new(gamma_star: SpdMatrix, slope_star: Matrix, sigma_star: SpdMatrix) -> Result<Self> {
        let (l, d) = slope_star.shape();
        if gamma_star.dim() != d {
            return Err(Error::dims(
                "forward params: gamma_star",
                d,
                gamma_star.dim(),
            ));
        }
        if sigma_star.dim() != l {
            return Err(Error::dims(
                "forward params: sigma_star",
                l,
                sigma_star.dim(),
            ));
        }
        crate::linalg::ensure_finite(&slope_star, "slope_star")?;
        Ok(Self {
            gamma_star,
            slope_star,
            sigma_star,
        })
    }

    pub fn gamma_star(&self) -> &SpdMatrix {
        &self.gamma_star
    }

    pub fn slope_star(&self) -> &Matrix {
        &self.slope_star
    }

    pub fn sigma_star(&self) -> &SpdMatrix {
        &self.sigma_star
    }

    pub fn l(&self) -> usize {
        self.slope_star.nrows()
    }

    pub fn d(&self) -> usize {
        self.slope_star.ncols()
    }
}

/// Ψ: `(Γ, A, Σ) ↦ (Σ + AΓAᵀ, Σ* AᵀΣ⁻¹, (Γ⁻¹ + AᵀΣ⁻¹A)⁻¹)`.
pub fn psi(p: &InverseParams) -> Result<ForwardParams> {
    let sinv_a = p.sigma_inv_slope();
    let gamma_inv = p.gamma.inverse().map_err(|_| singular("gamma"))?;
    let precision = gamma_inv.as_matrix() + p.slope.transpose() * &sinv_a;
    let precision = SpdMatrix::from_symmetrized(precision, "Γ⁻¹ + AᵀΣ⁻¹A")
        .map_err(|_| singular("Γ⁻¹ + AᵀΣ⁻¹A"))?;
    let sigma_star = precision.inverse().map_err(|_| singular("sigma_star"))?;
    let slope_star = sigma_star.as_matrix() * sinv_a.transpose();

    let mut gamma_star = &p.slope * p.gamma.as_matrix() * p.slope.transpose();
    for (j, s) in p.sigma_diag.iter().enumerate() {
        gamma_star[(j, j)] += s;
    }
    let gamma_star = SpdMatrix::from_symmetrized(gamma_star, "gamma_star")?;
    ForwardParams::new(gamma_star, slope_star, sigma_star)
}

fn singular(name: &str) -> Error {
    Error::Singular {
        name: name.to_string(),
        reason: "Cholesky factorization failed".into(),
    }
}

/// The same algebraic map on dense inputs of arbitrary orientation:
/// `(G, B, S) ↦ (S + BGBᵀ, (G⁻¹ + BᵀS⁻¹B)⁻¹ BᵀS⁻¹, (G⁻¹ + BᵀS⁻¹B)⁻¹)`.
///
/// Applied to a forward triple this recovers the inverse triple, with Σ
/// returned as a dense matrix. Used for checks; it inverts the `S` block.
pub fn psi_dense(
    g: &SpdMatrix,
    b: &Matrix,
    s: &SpdMatrix,
) -> Result<(SpdMatrix, Matrix, SpdMatrix)> {
    if g.dim() != b.ncols() || s.dim() != b.nrows() {
        return Err(Error::dims(
            "psi_dense",
            format!("{}x{}", s.dim(), g.dim()),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    let sinv_b = s.solve(b)?;
    let g_inv = g.inverse().map_err(|_| singular("G"))?;
    let precision =
        SpdMatrix::from_symmetrized(g_inv.as_matrix() + b.transpose() * &sinv_b, "precision")
            .map_err(|_| singular("G⁻¹ + BᵀS⁻¹B"))?;
    let out_noise = precision.inverse()?;
    let out_slope = out_noise.as_matrix() * sinv_b.transpose();
    let out_gamma = SpdMatrix::from_symmetrized(
        s.as_matrix() + b * g.as_matrix() * b.transpose(),
        "S + BGBᵀ",
    )?;
    Ok((out_gamma, out_slope, out_noise))
}

/// Applies Ψ, then Ψ again to the forward triple, and returns the largest
/// relative Frobenius deviation from `p` across the three components.
pub fn psi_involution_check(p: &InverseParams) -> Result<f64> {
    let f = psi(p)?;
    let (gamma, slope, sigma) = psi_dense(&f.gamma_star, &f.slope_star, &f.sigma_star)?;
    let sigma_dense = Matrix::from_diagonal(&p.sigma_diag);
    Ok(rel_frobenius(sigma.as_matrix(), &sigma_dense)
        .max(rel_frobenius(gamma.as_matrix(), p.gamma.as_matrix()))
        .max(rel_frobenius(&slope, &p.slope)))
}

/// `(1/L) · trace(A* Γ* A*ᵀ (Σ*)⁻¹)`.
pub fn snr(f: &ForwardParams) -> Result<f64> {
    let signal = &f.slope_star * f.gamma_star.as_matrix() * f.slope_star.transpose();
    let ratio = f.sigma_star.solve(&signal)?;
    Ok(ratio.trace() / f.l() as f64)
}

#[derive(Serialize, Deserialize)]
pub(crate) struct InverseParamsJson {
    pub gamma: Vec<Vec<f64>>,
    pub slope: Vec<Vec<f64>>,
    pub sigma_diag: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct ForwardParamsJson {
    pub gamma_star: Vec<Vec<f64>>,
    pub slope_star: Vec<Vec<f64>>,
    pub sigma_star: Vec<Vec<f64>>,
}

impl From<&InverseParams> for InverseParamsJson {
    fn from(p: &InverseParams) -> Self {
        Self {
            gamma: matrix_to_rows(p.gamma.as_matrix()),
            slope: matrix_to_rows(&p.slope),
            sigma_diag: vector_to_vec(&p.sigma_diag),
        }
    }
}

impl TryFrom<InverseParamsJson> for InverseParams {
    type Error = Error;

    fn try_from(j: InverseParamsJson) -> Result<Self> {
        InverseParams::new(
            rows_to_spd(&j.gamma, "gamma")?,
            rows_to_matrix(&j.slope, "slope")?,
            Vector::from_vec(j.sigma_diag),
        )
    }
}

impl From<&ForwardParams> for ForwardParamsJson {
    fn from(f: &ForwardParams) -> Self {
        Self {
            gamma_star: matrix_to_rows(f.gamma_star.as_matrix()),
            slope_star: matrix_to_rows(&f.slope_star),
            sigma_star: matrix_to_rows(f.sigma_star.as_matrix()),
        }
    }
}

impl TryFrom<ForwardParamsJson> for ForwardParams {
    type Error = Error;

    fn try_from(j: ForwardParamsJson) -> Result<Self> {
        ForwardParams::new(
            rows_to_spd(&j.gamma_star, "gamma_star")?,
            rows_to_matrix(&j.slope_star, "slope_star")?,
            rows_to_spd(&j.sigma_star, "sigma_star")?,
        )
    }
}

impl Serialize for InverseParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        InverseParamsJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for InverseParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        InverseParamsJson::deserialize(d)?
            .try_into()
            .map_err(serde::de::Error::custom)
    }
}

impl Serialize for ForwardParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ForwardParamsJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ForwardParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        ForwardParamsJson::deserialize(d)?
            .try_into()
            .map_err(serde::de::Error::custom)
    }
}

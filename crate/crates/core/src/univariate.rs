//! The scalar-response (L = 1) path written directly in vector form: the
//! gradient of `g : A ↦ s* AᵀΣ⁻¹`, the covariance of `Â*`, and prediction
//! intervals. It shares no code with the Kronecker assembly in
//! [`crate::inference`] and serves as its cross-check at `L = 1`.

use serde::{Deserialize, Serialize};

use crate::estimation::FitResult;
use crate::linalg::{chi2_quantile, Matrix, SpdMatrix, Vector};
use crate::model::InverseParams;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct UniParams {
    pub gamma: f64,
    pub slope: Vector,
    pub sigma_diag: Vector,
    pub s_star: f64,
}

impl UniParams {
    pub fn new(gamma: f64, slope: Vector, sigma_diag: Vector) -> Result<Self> {
        if !(gamma > 0.0)
            || slope.len() != sigma_diag.len()
            || sigma_diag.iter().any(|&s| !(s > 0.0))
        {
            return Err(Error::InvalidParameter(
                "univariate parameters need gamma > 0 and positive sigma of matching length".into(),
            ));
        }
        let quad: f64 = slope
            .iter()
            .zip(sigma_diag.iter())
            .map(|(a, s)| a * a / s)
            .sum();
        let s_star = 1.0 / (1.0 / gamma + quad);
        Ok(Self {
            gamma,
            slope,
            sigma_diag,
            s_star,
        })
    }

    pub fn from_inverse(p: &InverseParams) -> Result<Self> {
        if p.l() != 1 {
            return Err(Error::dims("univariate parameters: L", 1, p.l()));
        }
        Self::new(
            p.gamma().as_matrix()[(0, 0)],
            p.slope().column(0).into_owned(),
            p.sigma_diag().clone(),
        )
    }

    pub fn d(&self) -> usize {
        self.slope.len()
    }

    /// `A* = s* AᵀΣ⁻¹`, returned as a column vector.
    pub fn a_star(&self) -> Vector {
        self.slope.component_div(&self.sigma_diag) * self.s_star
    }
}

/// `∇g = −2 s* Σ⁻¹ A A* + s* Σ⁻¹` (`D × D`, symmetric).
pub fn nabla_g(p: &UniParams) -> Matrix {
    let sinv_a = p.slope.component_div(&p.sigma_diag);
    let mut grad = &sinv_a * p.a_star().transpose() * (-2.0 * p.s_star);
    for j in 0..p.d() {
        grad[(j, j)] += p.s_star / p.sigma_diag[j];
    }
    grad
}

/// Variance of the scalar column factor of `Â`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UniScaling {
    /// `(yᵀy)⁻¹`, the finite-sample variance.
    FiniteSample { yty: f64 },
    /// `γ⁻¹`, the per-√N asymptotic variance.
    PerSqrtN,
}

/// `c · ∇gᵀ Σ ∇g` with `c` from `scaling`, symmetrized.
pub fn uni_covariance(p: &UniParams, scaling: UniScaling) -> Result<SpdMatrix> {
    let c = match scaling {
        UniScaling::FiniteSample { yty } => 1.0 / yty,
        UniScaling::PerSqrtN => 1.0 / p.gamma,
    };
    let grad = nabla_g(p);
    let cov = grad.transpose() * Matrix::from_diagonal(&p.sigma_diag) * &grad * c;
    SpdMatrix::from_symmetrized(cov, "univariate covariance")
}

fn fit_parts(fit: &FitResult) -> Result<(UniParams, SpdMatrix)> {
    let p = UniParams::from_inverse(&fit.inverse)?;
    let yty = fit.yty.as_matrix()[(0, 0)];
    let cov = uni_covariance(&p, UniScaling::FiniteSample { yty })?;
    Ok((p, cov))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub center: f64,
    pub half_width: f64,
    /// `v = x̃ᵀ Cov(Â*) x̃ + s*`.
    pub variance: f64,
    pub radius2: f64,
    pub level: f64,
}

impl Interval {
    pub fn lower(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn contains(&self, y: f64) -> bool {
        (y - self.center).abs() <= self.half_width
    }

    pub fn length(&self) -> f64 {
        2.0 * self.half_width
    }

    /// The interval as a degenerate one-dimensional region.
    pub fn to_region_json(&self) -> crate::inference::RegionJson {
        crate::inference::RegionJson {
            center: vec![self.center],
            shape: vec![vec![self.variance]],
            radius2: self.radius2,
            level: self.level,
            volume: self.length(),
            normalized_volume: self.length(),
            statistic: None,
        }
    }
}

/// Prediction interval `Â* x̃ + ȳ ± sqrt(v · χ²_1(level))`.
pub fn uni_prediction_interval(fit: &FitResult, x_new: &Vector, level: f64) -> Result<Interval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidProbability(level));
    }
    if x_new.len() != fit.x_means.len() {
        return Err(Error::dims("new profile", fit.x_means.len(), x_new.len()));
    }
    let (p, cov) = fit_parts(fit)?;
    let xc = x_new - &fit.x_means;
    let center = p.a_star().dot(&xc) + fit.y_means[0];
    let variance = xc.dot(&(cov.as_matrix() * &xc)) + p.s_star;
    let radius2 = chi2_quantile(1, level)?;
    Ok(Interval {
        center,
        half_width: (variance * radius2).sqrt(),
        variance,
        radius2,
        level,
    })
}

/// `(a − Â*)ᵀ Cov(Â*)⁻¹ (a − Â*)` for a candidate forward slope `a`.
pub fn uni_confidence_statistic(fit: &FitResult, candidate: &Vector) -> Result<f64> {
    let (p, cov) = fit_parts(fit)?;
    if candidate.len() != p.d() {
        return Err(Error::dims("candidate slope", p.d(), candidate.len()));
    }
    cov.inv_quad_form(&(candidate - p.a_star()))
}

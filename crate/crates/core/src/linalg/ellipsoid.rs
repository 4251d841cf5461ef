use super::{ln_gamma, SpdMatrix, Vector};
use crate::{Error, Result};

/// `{ y : (y − center)ᵀ shape⁻¹ (y − center) ≤ radius2 }`.
///
/// `shape` is the covariance-form matrix; membership uses its cached Cholesky
/// factor rather than an explicit inverse.
#[derive(Clone, Debug)]
pub struct Ellipsoid {
    center: Vector,
    shape: SpdMatrix,
    radius2: f64,
}

impl Ellipsoid {
    pub fn new(center: Vector, shape: SpdMatrix, radius2: f64) -> Result<Self> {
        if center.len() != shape.dim() {
            return Err(Error::dims("ellipsoid", shape.dim(), center.len()));
        }
        if !(radius2 > 0.0 && radius2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ellipsoid squared radius must be positive, got {radius2}"
            )));
        }
        if center.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ellipsoid center".into()));
        }
        Ok(Self {
            center,
            shape,
            radius2,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn shape(&self) -> &SpdMatrix {
        &self.shape
    }

    pub fn radius2(&self) -> f64 {
        self.radius2
    }

    /// The quadratic form `(y − c)ᵀ shape⁻¹ (y − c)`.
    pub fn statistic(&self, y: &Vector) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(Error::dims("ellipsoid membership", self.dim(), y.len()));
        }
        self.shape.inv_quad_form(&(y - &self.center))
    }

    pub fn contains(&self, y: &Vector) -> Result<bool> {
        Ok(self.statistic(y)? <= self.radius2)
    }

    pub fn log_volume(&self) -> f64 {
        let k = self.dim() as f64;
        unit_ball_log_volume(self.dim()) + 0.5 * k * self.radius2.ln() + 0.5 * self.shape.logdet()
    }

    pub fn volume(&self) -> f64 {
        self.log_volume().exp()
    }
}

/// Log volume of the unit ball in `k` dimensions, `π^{k/2} / Γ(k/2 + 1)`.
pub fn unit_ball_log_volume(k: usize) -> f64 {
    let half = k as f64 / 2.0;
    half * std::f64::consts::PI.ln() - ln_gamma(half + 1.0)
}

pub fn ellipsoid_volume(e: &Ellipsoid) -> f64 {
    e.volume()
}

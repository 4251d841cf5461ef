//! Inverse regression for multiple-multivariate Gaussian linear models.
//!
//! The forward regression `Y | X = A* X + ε` is estimated by regressing the
//! predictors on the responses (`X | Y = A Y + e`, diagonal noise) and mapping
//! the inverse parameters forward. Only `L × L` and diagonal matrices are
//! inverted, so fitting works when `D > N`. On top of the fit the crate
//! assembles the delta-method covariance of the forward slope, confidence
//! ellipsoids for the slope, prediction ellipsoids for new responses, and a
//! seeded Monte Carlo harness for coverage studies.

pub mod error;
pub mod estimation;
pub mod inference;
pub mod json;
pub mod linalg;
pub mod model;
pub mod simulation;
pub mod univariate;
pub mod validate;

pub use error::{Error, Result};

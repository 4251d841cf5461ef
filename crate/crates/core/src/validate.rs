//! Oracle suites behind `invreg validate`.

use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::estimation::{center, fit_forward};
use crate::inference::{confidence_region_slope_only, dg_apply_with, prediction_region};
use crate::linalg::{rel_frobenius, symmetrize, Matrix, SpdMatrix, Vector};
use crate::model::{psi, psi_involution_check, ForwardParams, InverseParams};
use crate::simulation::{
    gen_params_seeded, mc_confidence_coverage, mc_slope_law, mc_validate_theta,
    random_inverse_params, run_experiment, simulate_dataset, substream, Case, CaseSpec,
    ExperimentConfig, Method,
};
use crate::univariate::{uni_confidence_statistic, uni_prediction_interval};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Involution,
    ThetaOracle,
    UniCross,
    Coverage,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::Involution,
        Suite::ThetaOracle,
        Suite::UniCross,
        Suite::Coverage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Involution => "involution",
            Suite::ThetaOracle => "theta-oracle",
            Suite::UniCross => "uni-cross",
            Suite::Coverage => "coverage",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown suite `{s}`")))
    }
}

/// One measured quantity and its acceptance band `[lo, hi]`.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Check {
    pub fn at_most(name: &str, measured: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            lo: f64::NEG_INFINITY,
            hi,
        }
    }

    pub fn within(name: &str, measured: f64, target: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            lo: target - tol,
            hi: target + tol,
        }
    }

    pub fn passed(&self) -> bool {
        self.measured >= self.lo && self.measured <= self.hi
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        if self.lo.is_finite() {
            write!(
                f,
                "{verdict} {}: {:.4} (accept [{:.4}, {:.4}])",
                self.name, self.measured, self.lo, self.hi
            )
        } else {
            write!(
                f,
                "{verdict} {}: {:.3e} (accept <= {:e})",
                self.name, self.measured, self.hi
            )
        }
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<Check>> {
    match suite {
        Suite::Involution => involution(seed),
        Suite::ThetaOracle => theta_oracle(seed),
        Suite::UniCross => uni_cross(seed),
        Suite::Coverage => coverage(seed),
    }
}

/// `Y | X` from the joint Gaussian of `(Y, X)` by Schur complement, using
/// dense `D × D` inversion.
pub fn schur_conditional(p: &InverseParams) -> Result<ForwardParams> {
    let g = p.gamma().as_matrix();
    let a = p.slope();
    let cross = g * a.transpose();
    let gamma_star = a * g * a.transpose() + Matrix::from_diagonal(p.sigma_diag());
    let inv = gamma_star
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular {
            name: "Γ*".into(),
            reason: "dense inverse failed".into(),
        })?;
    let slope_star = &cross * &inv;
    let sigma_star = g - &slope_star * cross.transpose();
    ForwardParams::new(
        SpdMatrix::from_symmetrized(gamma_star, "Γ*")?,
        slope_star,
        SpdMatrix::from_symmetrized(symmetrize(&sigma_star), "Σ*")?,
    )
}

fn forward_distance(a: &ForwardParams, b: &ForwardParams) -> f64 {
    rel_frobenius(a.gamma_star().as_matrix(), b.gamma_star().as_matrix())
        .max(rel_frobenius(a.slope_star(), b.slope_star()))
        .max(rel_frobenius(
            a.sigma_star().as_matrix(),
            b.sigma_star().as_matrix(),
        ))
}

fn involution(seed: u64) -> Result<Vec<Check>> {
    let mut rng = substream(seed, 0);
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let l = [1, 2, 5][k % 3];
        let d = [2, 5, 20, 100][(k / 3) % 4];
        worst = worst.max(psi_involution_check(&random_inverse_params(
            l, d, &mut rng,
        ))?);
    }
    let mut schur: f64 = 0.0;
    for _ in 0..50 {
        let p = random_inverse_params(2, 4, &mut rng);
        schur = schur.max(forward_distance(&psi(&p)?, &schur_conditional(&p)?));
    }
    Ok(vec![
        Check::at_most("psi involution, 200 triples", worst, 1e-8),
        Check::at_most("psi vs Schur complement, 50 triples", schur, 1e-8),
    ])
}

/// Worst relative error of `dg_apply` against central differences of the
/// slope map over `count` random instances.
pub fn dg_finite_difference_error<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Result<f64> {
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let l = rng.random_range(1..=3);
        let d = rng.random_range(1..=6);
        let p = random_inverse_params(l, d, rng);
        let f = psi(&p)?;
        let h = Matrix::from_fn(d, l, |_, _| rng.random_range(-1.0..1.0));
        let up = psi(&p.with_slope(p.slope() + &h * eps)?)?;
        let dn = psi(&p.with_slope(p.slope() - &h * eps)?)?;
        let fd = (up.slope_star() - dn.slope_star()) / (2.0 * eps);
        worst = worst.max(rel_frobenius(&dg_apply_with(&p, &f, &h)?, &fd));
    }
    Ok(worst)
}

fn theta_oracle(seed: u64) -> Result<Vec<Check>> {
    let p = gen_params_seeded(&CaseSpec::new(Case::Case1, 2, 5, seed))?;
    let theta = mc_validate_theta(&p, 2000, 5000, &mut substream(seed, 1))?;
    let slope = mc_slope_law(&p, 200, 5000, &mut substream(seed, 2))?;
    let dg = dg_finite_difference_error(50, &mut substream(seed, 3))?;
    Ok(vec![
        Check::at_most(
            "theta replication oracle (L=2, D=5, N=2000)",
            theta.rel_frobenius_error,
            0.15,
        ),
        Check::at_most(
            "slope law replication oracle (L=2, D=5, N=200)",
            slope,
            0.15,
        ),
        Check::at_most("dg vs central differences, 50 instances", dg, 1e-4),
    ])
}

/// Largest relative disagreement between the univariate and multivariate
/// paths at `L = 1` over `fits` random fits, for intervals and statistics.
pub fn uni_cross_error(fits: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = substream(seed, 4);
    let (mut interval, mut stat): (f64, f64) = (0.0, 0.0);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
    for _ in 0..fits {
        let d = rng.random_range(2..=20);
        let n = rng.random_range(d + 5..=d + 200);
        let p = random_inverse_params(1, d, &mut rng);
        let fit = fit_forward(&center(&simulate_dataset(&p, n, &mut rng)?))?;
        let x = Vector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
        let uni = uni_prediction_interval(&fit, &x, 0.95)?;
        let multi = prediction_region(&fit, &x, 0.95)?;
        let half =
            (multi.ellipsoid().shape().as_matrix()[(0, 0)] * multi.ellipsoid().radius2()).sqrt();
        interval = interval
            .max(rel(uni.center, multi.center()[0]))
            .max(rel(uni.half_width, half));
        let cand =
            fit.forward.slope_star() + Matrix::from_fn(1, d, |_, _| rng.random_range(-0.1..0.1));
        let a = uni_confidence_statistic(&fit, &cand.row(0).transpose())?;
        let b = confidence_region_slope_only(&fit, 0.95)?.statistic(&cand)?;
        stat = stat.max(rel(a, b));
    }
    Ok((interval, stat))
}

fn uni_cross(seed: u64) -> Result<Vec<Check>> {
    let (interval, stat) = uni_cross_error(50, seed)?;
    Ok(vec![
        Check::at_most("L=1 prediction intervals, 50 fits", interval, 1e-8),
        Check::at_most("L=1 confidence statistics, 50 fits", stat, 1e-8),
    ])
}

fn coverage(seed: u64) -> Result<Vec<Check>> {
    let p = gen_params_seeded(&CaseSpec::new(Case::Case1, 2, 5, seed))?;
    let conf = mc_confidence_coverage(&p, 500, 500, 0.95, seed)?;
    let cfg = ExperimentConfig::new(
        CaseSpec::new(Case::Case1, 2, 100, seed),
        500,
        500,
        vec![Method::Ir],
    );
    let pred = run_experiment(&cfg)?
        .row(Method::Ir)
        .map(|r| r.coverage)
        .unwrap_or(f64::NAN);
    Ok(vec![
        Check::within(
            "confidence region coverage (L=2, D=5, N=500)",
            conf,
            0.95,
            0.03,
        ),
        Check::within(
            "IR prediction coverage (Case1, L=2, D=100, N=500)",
            pred,
            0.94,
            0.03,
        ),
    ])
}

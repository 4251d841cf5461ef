//! Asymptotic covariance of the forward slope estimator and the regions built
//! on it.
//!
//! `g : A ↦ A* = Σ* AᵀΣ⁻¹` is differentiated at the inverse slope and pushed
//! through the matrix-normal law of `Â`: `vec(Â) ~ N(vec(A), K ⊗ Σ)` where
//! `K` is the column covariance of `Â`. With `K = (YᵀY)⁻¹` the resulting Θ is
//! the finite-sample covariance of `vec(Â*)` and the quadratic-form
//! statistics need no extra `N` factor; with `K = Γ⁻¹` it is the covariance of
//! `√N (vec(Â*) − vec(A*))`.
//!
//! Conventions: `vec` stacks columns, so the `L × D` slope `A*` is indexed
//! `i + L·j` (response `i`, predictor `j`).

use log::warn;
use serde::{Deserialize, Serialize};

use crate::estimation::{FitResult, LseFit};
use crate::json::{matrix_to_rows, vector_to_vec};
use crate::linalg::{chi2_quantile, vec, Ellipsoid, Matrix, SpdMatrix, Vector};
use crate::model::{psi, ForwardParams, InverseParams};
use crate::{Error, Result};

/// Eigenvalue floor applied to Θ before it is inverted.
pub const THETA_EIGEN_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// `K = (YᵀY)⁻¹`: Θ is `Cov(vec(Â*))` itself.
    FiniteSample,
    /// `K = Γ⁻¹`: Θ is the covariance of `√N · vec(Â* − A*)`.
    PerSqrtN,
}

/// `DL × DL` covariance of `vec(Â*)`.
#[derive(Clone, Debug)]
pub struct ThetaCov {
    matrix: SpdMatrix,
    scaling: Scaling,
    l: usize,
    d: usize,
    floored: usize,
    nuisance: bool,
}

impl ThetaCov {
    /// True when the `Γ̂`/`Σ̂` term of [`nuisance_covariance`] is included.
    pub fn includes_nuisance(&self) -> bool {
        self.nuisance
    }

    pub fn matrix(&self) -> &SpdMatrix {
        &self.matrix
    }

    pub fn scaling(&self) -> Scaling {
        self.scaling
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// How many eigenvalues were raised to [`THETA_EIGEN_FLOOR`].
    pub fn floored_eigenvalues(&self) -> usize {
        self.floored
    }

    /// `Ω(x) = (xᵀ ⊗ I_L) Θ (x ⊗ I_L)`, the `L × L` covariance of `Â* x`.
    pub fn project(&self, x: &Vector) -> Result<Matrix> {
        if x.len() != self.d {
            return Err(Error::dims("profile length", self.d, x.len()));
        }
        let (l, th) = (self.l, self.matrix.as_matrix());
        let mut omega = Matrix::zeros(l, l);
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for (k, &xk) in x.iter().enumerate() {
                if xk == 0.0 {
                    continue;
                }
                let w = xj * xk;
                for b in 0..l {
                    for a in 0..l {
                        omega[(a, b)] += w * th[(a + l * j, b + l * k)];
                    }
                }
            }
        }
        Ok(crate::linalg::symmetrize(&omega))
    }
}

/// The differential of `g` at `A` applied to a `D × L` direction `h`:
/// `Σ* hᵀ Σ⁻¹ − Σ* hᵀ Σ⁻¹ A A* − A* h A*`.
pub fn dg_apply(p: &InverseParams, h: &Matrix) -> Result<Matrix> {
    let f = psi(p)?;
    dg_apply_with(p, &f, h)
}

/// [`dg_apply`] with a precomputed `f = psi(p)`.
pub fn dg_apply_with(p: &InverseParams, f: &ForwardParams, h: &Matrix) -> Result<Matrix> {
    if h.shape() != p.slope().shape() {
        return Err(Error::dims(
            "dg_apply direction",
            format!("{}x{}", p.d(), p.l()),
            format!("{}x{}", h.nrows(), h.ncols()),
        ));
    }
    let mut sinv_h = h.clone();
    for (mut row, s) in sinv_h.row_iter_mut().zip(p.sigma_diag().iter()) {
        row /= *s;
    }
    let ss = f.sigma_star().as_matrix();
    let a_star = f.slope_star();
    let left = ss * sinv_h.transpose();
    Ok(&left - &left * p.slope() * a_star - a_star * h * a_star)
}

/// Closed-form `Cov(vec(Dg(A)·(Â − A)))` for `vec(Â − A) ~ N(0, K ⊗ Σ)`,
/// before symmetrization or flooring.
///
/// With `B = Σ⁻¹ − 2Σ⁻¹AA* + A*ᵀAᵀΣ⁻¹AA*`, `U = I − A*ᵀAᵀ` and the
/// commutation permutation `T` (realized through the index algebra below):
///
/// `Θ = B ⊗ Σ*KΣ* + A*ᵀKA* ⊗ A*ΣA*ᵀ − C − Cᵀ`,
/// `C = (U ⊗ Σ*K) T (A* ⊗ A*ᵀ)`, `C[i+Lj, k+Ll] = (Σ*KA*)[i,l] · (A*Uᵀ)[k,j]`.
pub fn theta_closed_form(p: &InverseParams, f: &ForwardParams, col_cov: &Matrix) -> Result<Matrix> {
    let (l, d) = (p.l(), p.d());
    if col_cov.shape() != (l, l) {
        return Err(Error::dims(
            "theta column covariance",
            format!("{l}x{l}"),
            format!("{}x{}", col_cov.nrows(), col_cov.ncols()),
        ));
    }
    let sigma = p.sigma_diag();
    let a = p.slope();
    let a_star = f.slope_star();
    let ss = f.sigma_star().as_matrix();
    let sinv_a = p.sigma_inv_slope();

    // Σ⁻¹AA* is symmetric (= Σ⁻¹AΣ*AᵀΣ⁻¹).
    let sinv_a_astar = &sinv_a * a_star;
    let mut b = a_star.transpose() * (a.transpose() * &sinv_a) * a_star - &sinv_a_astar * 2.0;
    for j in 0..d {
        b[(j, j)] += 1.0 / sigma[j];
    }
    let r1 = ss * col_cov * ss;

    let b2 = a_star.transpose() * col_cov * a_star;
    let mut scaled = a_star.clone();
    for (mut c, s) in scaled.column_iter_mut().zip(sigma.iter()) {
        c *= *s;
    }
    let r2 = &scaled * a_star.transpose();

    // U = I − A*ᵀAᵀ, so A*Uᵀ = A* − A*AA*.
    let p_mat = ss * col_cov * a_star;
    let q_mat = a_star - a_star * a * a_star;

    let n = l * d;
    let mut th = Matrix::zeros(n, n);
    for lcol in 0..d {
        for k in 0..l {
            let c = k + l * lcol;
            for j in 0..d {
                let (bj, b2j) = (b[(j, lcol)], b2[(j, lcol)]);
                for i in 0..l {
                    th[(i + l * j, c)] = bj * r1[(i, k)] + b2j * r2[(i, k)]
                        - p_mat[(i, lcol)] * q_mat[(k, j)]
                        - p_mat[(k, j)] * q_mat[(i, lcol)];
                }
            }
        }
    }
    Ok(th)
}

fn finalize(raw: Matrix, scaling: Scaling, l: usize, d: usize) -> Result<ThetaCov> {
    let sym = crate::linalg::symmetrize(&raw);
    let eig = sym.clone().symmetric_eigen();
    let floored = eig
        .eigenvalues
        .iter()
        .filter(|&&v| v < THETA_EIGEN_FLOOR)
        .count();
    let matrix = if floored == 0 {
        sym
    } else {
        let vals = eig.eigenvalues.map(|v| v.max(THETA_EIGEN_FLOOR));
        let vecs = &eig.eigenvectors;
        crate::linalg::symmetrize(&(vecs * Matrix::from_diagonal(&vals) * vecs.transpose()))
    };
    let matrix = SpdMatrix::new(matrix, "theta").map_err(|_| Error::Singular {
        name: "theta".into(),
        reason: "not positive definite after eigenvalue flooring".into(),
    })?;
    Ok(ThetaCov {
        matrix,
        scaling,
        l,
        d,
        floored,
        nuisance: false,
    })
}

/// Finite-sample Θ: the column covariance of `Â` is `(YᵀY)⁻¹`.
pub fn theta(p: &InverseParams, yty: &SpdMatrix) -> Result<ThetaCov> {
    let f = psi(p)?;
    theta_with(p, &f, yty)
}

/// [`theta`] with a precomputed `f = psi(p)`.
pub fn theta_with(p: &InverseParams, f: &ForwardParams, yty: &SpdMatrix) -> Result<ThetaCov> {
    if yty.dim() != p.l() {
        return Err(Error::dims("theta: YᵀY", p.l(), yty.dim()));
    }
    let k = yty.inverse()?;
    let raw = theta_closed_form(p, f, k.as_matrix())?;
    finalize(raw, Scaling::FiniteSample, p.l(), p.d())
}

/// Θ plus [`nuisance_covariance`] with divisor `dof`: the covariance of
/// `vec(Â*)` when `Γ̂` and `Σ̂` are estimated too.
pub fn theta_with_nuisance(
    p: &InverseParams,
    f: &ForwardParams,
    yty: &SpdMatrix,
    dof: f64,
) -> Result<ThetaCov> {
    if yty.dim() != p.l() {
        return Err(Error::dims("theta: YᵀY", p.l(), yty.dim()));
    }
    let k = yty.inverse()?;
    let raw = theta_closed_form(p, f, k.as_matrix())? + nuisance_covariance(p, f, dof)?;
    let mut out = finalize(raw, Scaling::FiniteSample, p.l(), p.d())?;
    out.nuisance = true;
    Ok(out)
}

/// Per-√N Θ: the column covariance of `√N · Â` tends to `Γ⁻¹`.
pub fn theta_asymptotic(p: &InverseParams) -> Result<ThetaCov> {
    let f = psi(p)?;
    let k = p.gamma().inverse()?;
    let raw = theta_closed_form(p, &f, k.as_matrix())?;
    finalize(raw, Scaling::PerSqrtN, p.l(), p.d())
}

/// Delta-method covariance of `vec(Â*)` due to the noise in `Γ̂` and `Σ̂`,
/// which Θ holds fixed. `dof` is the divisor of both estimators, giving
/// `Cov(Γ̂_ab, Γ̂_cd) = (Γ_ac Γ_bd + Γ_ad Γ_bc)/dof` and
/// `Var(Σ̂_mm) = 2 σ_m² / dof`. The two are independent of `Â` given `Y`.
///
/// With `R = Σ*Γ⁻¹A*` and `W = Σ⁻¹(AA* − I)`, entry `[i+Lj, k+Ll]` is
/// `((Σ*Γ⁻¹Σ*)_ik (A*ᵀΓ⁻¹A*)_jl + R_il R_kj) / dof
///  + Σ_m 2σ_m² A*_im A*_km W_mj W_ml / dof`.
pub fn nuisance_covariance(p: &InverseParams, f: &ForwardParams, dof: f64) -> Result<Matrix> {
    if !(dof > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "nuisance degrees of freedom must be positive, got {dof}"
        )));
    }
    let (l, d) = (p.l(), p.d());
    let sigma = p.sigma_diag();
    let a_star = f.slope_star();
    let ss = f.sigma_star().as_matrix();
    let g_inv = p.gamma().inverse()?;
    let g_inv = g_inv.as_matrix();
    let left = ss * g_inv * ss;
    let right = a_star.transpose() * g_inv * a_star;
    let r = ss * g_inv * a_star;
    let mut w = p.slope() * a_star;
    for (mut row, s) in w.row_iter_mut().zip(sigma.iter()) {
        row /= *s;
    }
    for m in 0..d {
        w[(m, m)] -= 1.0 / sigma[m];
    }

    let n = l * d;
    let mut out = Matrix::zeros(n, n);
    for lc in 0..d {
        for k in 0..l {
            let c = k + l * lc;
            for j in 0..d {
                for i in 0..l {
                    out[(i + l * j, c)] = left[(i, k)] * right[(j, lc)] + r[(i, lc)] * r[(k, j)];
                }
            }
        }
    }
    // Σ̂ part as V Vᵀ, column m of V being sqrt(2) σ_m (w_m ⊗ a*_m).
    let mut v = Matrix::zeros(n, d);
    for m in 0..d {
        let scale = std::f64::consts::SQRT_2 * sigma[m];
        for j in 0..d {
            let wj = w[(m, j)] * scale;
            for i in 0..l {
                v[(i + l * j, m)] = wj * a_star[(i, m)];
            }
        }
    }
    out += &v * v.transpose();
    Ok(out / dof)
}

/// `(xᵀ ⊗ I_L) N (x ⊗ I_L)` for `N` = [`nuisance_covariance`], without
/// forming the DL × DL matrix.
pub fn nuisance_omega(
    p: &InverseParams,
    f: &ForwardParams,
    dof: f64,
    x: &Vector,
) -> Result<Matrix> {
    if !(dof > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "nuisance degrees of freedom must be positive, got {dof}"
        )));
    }
    if x.len() != p.d() {
        return Err(Error::dims("profile length", p.d(), x.len()));
    }
    let sigma = p.sigma_diag();
    let a_star = f.slope_star();
    let ss = f.sigma_star().as_matrix();
    let g_inv = p.gamma().inverse()?;
    let g_inv = g_inv.as_matrix();
    let w = a_star * x;
    let rx = ss * g_inv * &w;
    let mut out = ss * g_inv * ss * w.dot(&(g_inv * &w)) + &rx * rx.transpose();
    // (W x)_m with W = Σ⁻¹(AA* − I).
    let aw = p.slope() * &w;
    for m in 0..p.d() {
        let wx = (aw[m] - x[m]) / sigma[m];
        let c = 2.0 * sigma[m] * sigma[m] * wx * wx;
        if c != 0.0 {
            let col = a_star.column(m);
            out.ger(c, &col, &col, 1.0);
        }
    }
    Ok(crate::linalg::symmetrize(&(out / dof)))
}

fn warn_if_ill_conditioned(theta: &ThetaCov, n: usize) {
    let total = theta.l * theta.d;
    if theta.floored * 100 > total {
        warn!(
            "theta is ill-conditioned: {} of {} eigenvalues floored (D = {}, L = {}, N = {n})",
            theta.floored, total, theta.d, theta.l
        );
    }
}

/// Confidence ellipsoid for `vec(A*)`:
/// `{a : (vec(a) − vec(Â*))ᵀ Θ̂⁻¹ (vec(a) − vec(Â*)) ≤ χ²_{DL}(level)}`.
#[derive(Clone, Debug)]
pub struct ConfidenceRegion {
    ellipsoid: Ellipsoid,
    theta: ThetaCov,
    level: f64,
}

impl ConfidenceRegion {
    pub fn center(&self) -> &Vector {
        self.ellipsoid.center()
    }

    pub fn theta(&self) -> &ThetaCov {
        &self.theta
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn radius2(&self) -> f64 {
        self.ellipsoid.radius2()
    }

    pub fn ellipsoid(&self) -> &Ellipsoid {
        &self.ellipsoid
    }

    /// The quadratic-form statistic of a candidate `L × D` slope.
    pub fn statistic(&self, a: &Matrix) -> Result<f64> {
        if a.shape() != (self.theta.l, self.theta.d) {
            return Err(Error::dims(
                "candidate slope",
                format!("{}x{}", self.theta.l, self.theta.d),
                format!("{}x{}", a.nrows(), a.ncols()),
            ));
        }
        self.ellipsoid.statistic(&vec(a))
    }

    pub fn contains(&self, a: &Matrix) -> Result<bool> {
        Ok(self.statistic(a)? <= self.radius2())
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability(level))
    }
}

/// Confidence region for the forward slope at `level`, with covariance
/// Θ̂ + the `Γ̂`/`Σ̂` term (divisor `N − 1`).
pub fn confidence_region(fit: &FitResult, level: f64) -> Result<ConfidenceRegion> {
    check_level(level)?;
    let theta = theta_with_nuisance(&fit.inverse, &fit.forward, &fit.yty, (fit.n - 1) as f64)?;
    confidence_from_theta(fit, theta, level)
}

/// [`confidence_region`] with Θ̂ alone, treating `Γ̂` and `Σ̂` as known. Its
/// coverage falls well short of `level` once `A*` carries real signal.
pub fn confidence_region_slope_only(fit: &FitResult, level: f64) -> Result<ConfidenceRegion> {
    check_level(level)?;
    let theta = theta_with(&fit.inverse, &fit.forward, &fit.yty)?;
    confidence_from_theta(fit, theta, level)
}

fn confidence_from_theta(fit: &FitResult, theta: ThetaCov, level: f64) -> Result<ConfidenceRegion> {
    warn_if_ill_conditioned(&theta, fit.n);
    let radius2 = chi2_quantile(theta.l * theta.d, level)?;
    let ellipsoid = Ellipsoid::new(vec(fit.forward.slope_star()), theta.matrix.clone(), radius2)?;
    Ok(ConfidenceRegion {
        ellipsoid,
        theta,
        level,
    })
}

/// Prediction ellipsoid for a new response, with shape `Ω + Σ̂*`.
#[derive(Clone, Debug)]
pub struct PredictionRegion {
    ellipsoid: Ellipsoid,
    omega: Matrix,
    sigma_star: SpdMatrix,
    level: f64,
}

impl PredictionRegion {
    pub fn ellipsoid(&self) -> &Ellipsoid {
        &self.ellipsoid
    }

    /// Estimation part of the shape; zero at the training mean, hence PSD only.
    pub fn omega(&self) -> &Matrix {
        &self.omega
    }

    pub fn sigma_star(&self) -> &SpdMatrix {
        &self.sigma_star
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn center(&self) -> &Vector {
        self.ellipsoid.center()
    }

    pub fn contains(&self, y: &Vector) -> Result<bool> {
        self.ellipsoid.contains(y)
    }

    pub fn statistic(&self, y: &Vector) -> Result<f64> {
        self.ellipsoid.statistic(y)
    }
}

fn centered_profile(x_new: &Vector, x_means: &Vector) -> Result<Vector> {
    if x_new.len() != x_means.len() {
        return Err(Error::dims("new profile", x_means.len(), x_new.len()));
    }
    Ok(x_new - x_means)
}

fn build_prediction(
    center: Vector,
    omega: Matrix,
    sigma_star: &SpdMatrix,
    level: f64,
) -> Result<PredictionRegion> {
    check_level(level)?;
    let shape = SpdMatrix::from_symmetrized(&omega + sigma_star.as_matrix(), "Ω + Σ*")?;
    let radius2 = chi2_quantile(sigma_star.dim(), level)?;
    Ok(PredictionRegion {
        ellipsoid: Ellipsoid::new(center, shape, radius2)?,
        omega,
        sigma_star: sigma_star.clone(),
        level,
    })
}

/// Prediction region for the response at `x_new` (uncentered; the training
/// means are removed here and the response mean added back to the center).
pub fn prediction_region(fit: &FitResult, x_new: &Vector, level: f64) -> Result<PredictionRegion> {
    check_level(level)?;
    let theta = theta_with(&fit.inverse, &fit.forward, &fit.yty)?;
    warn_if_ill_conditioned(&theta, fit.n);
    prediction_region_with_theta(fit, &theta, x_new, level)
}

/// `Ω(x) = Cov(Â* x)` without assembling Θ. With `u = (Σ⁻¹ − Σ⁻¹AA*) x`,
/// `w = A* x` and `c = Σ*K w (Σu)ᵀ A*ᵀ`:
///
/// `Ω = (uᵀΣu) Σ*KΣ* + (wᵀKw) A*ΣA*ᵀ − c − cᵀ`.
pub fn omega_direct(
    p: &InverseParams,
    f: &ForwardParams,
    col_cov: &Matrix,
    x: &Vector,
) -> Result<Matrix> {
    let (l, d) = (p.l(), p.d());
    if x.len() != d {
        return Err(Error::dims("profile length", d, x.len()));
    }
    if col_cov.shape() != (l, l) {
        return Err(Error::dims(
            "omega column covariance",
            format!("{l}x{l}"),
            format!("{}x{}", col_cov.nrows(), col_cov.ncols()),
        ));
    }
    let sigma = p.sigma_diag();
    let a_star = f.slope_star();
    let ss = f.sigma_star().as_matrix();
    let w = a_star * x;
    let aw = p.slope() * &w;
    let u = Vector::from_fn(d, |j, _| (x[j] - aw[j]) / sigma[j]);
    let su = u.component_mul(sigma);
    let mut scaled = a_star.clone();
    for (mut c, s) in scaled.column_iter_mut().zip(sigma.iter()) {
        c *= *s;
    }
    let kw = col_cov * &w;
    let sskw = ss * &kw;
    let c = &sskw * (a_star * &su).transpose();
    let omega = ss * col_cov * ss * u.dot(&su) + &scaled * a_star.transpose() * w.dot(&kw)
        - &c
        - c.transpose();
    Ok(crate::linalg::symmetrize(&omega))
}

/// [`prediction_region`] with `Ω` from [`omega_direct`]; no DL × DL matrix is
/// formed, which keeps the cost at `O(D L²)` after the fit.
pub fn prediction_region_direct(
    fit: &FitResult,
    x_new: &Vector,
    level: f64,
) -> Result<PredictionRegion> {
    let xc = centered_profile(x_new, &fit.x_means)?;
    let k = fit.yty.inverse()?;
    let center = fit.forward.slope_star() * &xc + &fit.y_means;
    let omega = omega_direct(&fit.inverse, &fit.forward, k.as_matrix(), &xc)?;
    build_prediction(center, omega, fit.forward.sigma_star(), level)
}

/// [`prediction_region`] reusing an already assembled Θ̂.
pub fn prediction_region_with_theta(
    fit: &FitResult,
    theta: &ThetaCov,
    x_new: &Vector,
    level: f64,
) -> Result<PredictionRegion> {
    let xc = centered_profile(x_new, &fit.x_means)?;
    let center = fit.forward.slope_star() * &xc + &fit.y_means;
    let omega = theta.project(&xc)?;
    build_prediction(center, omega, fit.forward.sigma_star(), level)
}

/// Classical least-squares prediction region: shape `Σ̂* (1 + x̃ᵀ(XᵀX)⁻¹x̃)`.
pub fn lse_prediction_region(fit: &LseFit, x_new: &Vector, level: f64) -> Result<PredictionRegion> {
    let xc = centered_profile(x_new, &fit.x_means)?;
    let leverage = fit.xtx.inv_quad_form(&xc)?;
    let center = fit.forward.slope_star() * &xc + &fit.y_means;
    let omega = fit.forward.sigma_star().as_matrix() * leverage;
    build_prediction(center, omega, fit.forward.sigma_star(), level)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionMetrics {
    pub volume: f64,
    /// `volume^{1/L}`.
    pub normalized_volume: f64,
}

pub fn region_metrics(r: &PredictionRegion) -> RegionMetrics {
    let k = r.ellipsoid.dim() as f64;
    let log_v = r.ellipsoid.log_volume();
    RegionMetrics {
        volume: log_v.exp(),
        normalized_volume: (log_v / k).exp(),
    }
}

/// JSON form of a region.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionJson {
    pub center: Vec<f64>,
    pub shape: Vec<Vec<f64>>,
    pub radius2: f64,
    pub level: f64,
    pub volume: f64,
    pub normalized_volume: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub statistic: Option<f64>,
}

impl From<&PredictionRegion> for RegionJson {
    fn from(r: &PredictionRegion) -> Self {
        let m = region_metrics(r);
        RegionJson {
            center: vector_to_vec(r.center()),
            shape: matrix_to_rows(r.ellipsoid.shape().as_matrix()),
            radius2: r.ellipsoid.radius2(),
            level: r.level,
            volume: m.volume,
            normalized_volume: m.normalized_volume,
            statistic: None,
        }
    }
}

impl ConfidenceRegion {
    /// JSON form, with the statistic of `candidate` when one is supplied.
    pub fn to_json(&self, candidate: Option<&Matrix>) -> Result<RegionJson> {
        let k = self.ellipsoid.dim() as f64;
        let log_v = self.ellipsoid.log_volume();
        Ok(RegionJson {
            center: vector_to_vec(self.center()),
            shape: matrix_to_rows(self.theta.matrix.as_matrix()),
            radius2: self.radius2(),
            level: self.level,
            volume: log_v.exp(),
            normalized_volume: (log_v / k).exp(),
            statistic: candidate.map(|a| self.statistic(a)).transpose()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutation_matrix, kron, rel_frobenius, unvec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_params(l: usize, d: usize, rng: &mut ChaCha8Rng) -> InverseParams {
        let g = Matrix::from_fn(l, l, |_, _| rng.random_range(-1.0..1.0));
        let gamma = SpdMatrix::new(
            crate::linalg::symmetrize(&(&g * g.transpose())) + Matrix::identity(l, l) * 0.5,
            "g",
        )
        .unwrap();
        let slope = Matrix::from_fn(d, l, |_, _| rng.random_range(-1.5..1.5));
        let sigma = Vector::from_fn(d, |_, _| rng.random_range(0.3..2.0));
        InverseParams::new(gamma, slope, sigma).unwrap()
    }

    fn random_spd(l: usize, rng: &mut ChaCha8Rng) -> SpdMatrix {
        let g = Matrix::from_fn(l, l + 3, |_, _| rng.random_range(-1.0..1.0));
        SpdMatrix::from_symmetrized(&g * g.transpose() + Matrix::identity(l, l) * 0.1, "k").unwrap()
    }

    /// Brute-force oracle: the dense matrix M of `vec(H) ↦ vec(Dg·H)` built
    /// column by column from `dg_apply`, then `M (K ⊗ Σ) Mᵀ`.
    fn theta_by_linear_map(p: &InverseParams, k: &Matrix) -> Matrix {
        let (l, d) = (p.l(), p.d());
        let n = l * d;
        let mut m = Matrix::zeros(n, n);
        for c in 0..n {
            let mut e = Vector::zeros(n);
            e[c] = 1.0;
            let h = unvec(&e, d, l).unwrap();
            m.set_column(c, &vec(&dg_apply(p, &h).unwrap()));
        }
        let cov_h = kron(k, &Matrix::from_diagonal(p.sigma_diag()));
        &m * cov_h * m.transpose()
    }

    /// Second route through Kronecker products and the commutation permutation:
    /// `M = (B' ⊗ Σ*) T_{DL} − (A*ᵀ ⊗ A*)` with `B' = Σ⁻¹ − Σ⁻¹AA*`.
    fn theta_by_kron(p: &InverseParams, k: &Matrix) -> Matrix {
        let f = psi(p).unwrap();
        let (l, d) = (p.l(), p.d());
        let sinv = Matrix::from_diagonal(&p.sigma_diag().map(|s| 1.0 / s));
        let bprime = &sinv - &sinv * p.slope() * f.slope_star();
        let t = commutation_matrix(d, l);
        let first = t
            .right_mul(&kron(&bprime.transpose(), f.sigma_star().as_matrix()))
            .unwrap();
        let m = first - kron(&f.slope_star().transpose(), f.slope_star());
        assert_eq!(m.shape(), (l * d, l * d));
        &m * kron(k, &Matrix::from_diagonal(p.sigma_diag())) * m.transpose()
    }

    #[test]
    fn dg_zero_direction_and_null_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_params(2, 4, &mut rng);
        assert!(dg_apply(&p, &Matrix::zeros(4, 2))
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));

        let p0 = p.with_slope(Matrix::zeros(4, 2)).unwrap();
        let h = Matrix::from_fn(4, 2, |i, j| (i as f64) - 0.7 * j as f64);
        let sinv_h_t = {
            let mut m = h.clone();
            for (mut r, s) in m.row_iter_mut().zip(p0.sigma_diag().iter()) {
                r /= *s;
            }
            m.transpose()
        };
        let expected = p0.gamma().as_matrix() * sinv_h_t;
        assert!(rel_frobenius(&dg_apply(&p0, &h).unwrap(), &expected) < 1e-12);
    }

    #[test]
    fn dg_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_params(3, 5, &mut rng);
        let h1 = Matrix::from_fn(5, 3, |_, _| rng.random_range(-1.0..1.0));
        let h2 = Matrix::from_fn(5, 3, |_, _| rng.random_range(-1.0..1.0));
        let lhs = dg_apply(&p, &(&h1 * 2.5 + &h2)).unwrap();
        let rhs = dg_apply(&p, &h1).unwrap() * 2.5 + dg_apply(&p, &h2).unwrap();
        assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn dg_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eps = 1e-6;
        for _ in 0..50 {
            let l = rng.random_range(1..=3);
            let d = rng.random_range(1..=6);
            let p = random_params(l, d, &mut rng);
            let h = Matrix::from_fn(d, l, |_, _| rng.random_range(-1.0..1.0));
            let plus = psi(&p.with_slope(p.slope() + &h * eps).unwrap()).unwrap();
            let minus = psi(&p.with_slope(p.slope() - &h * eps).unwrap()).unwrap();
            let fd = (plus.slope_star() - minus.slope_star()) / (2.0 * eps);
            let exact = dg_apply(&p, &h).unwrap();
            assert!(
                rel_frobenius(&exact, &fd) < 1e-4,
                "rel err {}",
                rel_frobenius(&exact, &fd)
            );
        }
    }

    #[test]
    fn closed_form_matches_both_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for (l, d) in [(1, 1), (1, 4), (2, 3), (3, 2), (2, 5), (4, 6)] {
            let p = random_params(l, d, &mut rng);
            let k = random_spd(l, &mut rng);
            let f = psi(&p).unwrap();
            let closed = theta_closed_form(&p, &f, k.as_matrix()).unwrap();
            let brute = theta_by_linear_map(&p, k.as_matrix());
            let via_kron = theta_by_kron(&p, k.as_matrix());
            assert!(
                rel_frobenius(&closed, &brute) < 1e-10,
                "({l},{d}) {}",
                rel_frobenius(&closed, &brute)
            );
            assert!(rel_frobenius(&via_kron, &brute) < 1e-10);
        }
    }

    #[test]
    fn null_slope_keeps_first_term_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = random_params(2, 3, &mut rng)
            .with_slope(Matrix::zeros(3, 2))
            .unwrap();
        let yty = random_spd(2, &mut rng);
        let th = theta(&p, &yty).unwrap();
        let k = yty.inverse().unwrap();
        let g = p.gamma().as_matrix();
        let sinv = Matrix::from_diagonal(&p.sigma_diag().map(|s| 1.0 / s));
        let expected = kron(&sinv, &(g * k.as_matrix() * g));
        assert!(rel_frobenius(th.matrix().as_matrix(), &expected) < 1e-12);
    }

    #[test]
    fn theta_is_symmetric_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let l = rng.random_range(1..=3);
            let d = rng.random_range(1..=5);
            let p = random_params(l, d, &mut rng);
            let yty = random_spd(l, &mut rng);
            let f = psi(&p).unwrap();
            let k = yty.inverse().unwrap();
            let raw = theta_closed_form(&p, &f, k.as_matrix()).unwrap();
            let min_eig = crate::linalg::symmetrize(&raw)
                .symmetric_eigenvalues()
                .min();
            assert!(min_eig > -1e-12 * raw.amax());
            let th = theta(&p, &yty).unwrap();
            assert_eq!(
                th.matrix().as_matrix(),
                &th.matrix().as_matrix().transpose()
            );
            assert_eq!(
                (th.l(), th.d(), th.scaling()),
                (l, d, Scaling::FiniteSample)
            );
        }
    }

    #[test]
    fn projection_matches_kron_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (l, d) = (3, 4);
        let p = random_params(l, d, &mut rng);
        let th = theta(&p, &random_spd(l, &mut rng)).unwrap();
        let x = Vector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
        let xt_kron_i = kron(
            &Matrix::from_row_slice(1, d, x.as_slice()),
            &Matrix::identity(l, l),
        );
        let expected = &xt_kron_i * th.matrix().as_matrix() * xt_kron_i.transpose();
        assert!(rel_frobenius(&th.project(&x).unwrap(), &expected) < 1e-12);
        assert!(th.project(&Vector::zeros(d + 1)).is_err());
    }

    #[test]
    fn direct_omega_matches_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..30 {
            let l = rng.random_range(1..=4);
            let d = rng.random_range(1..=7);
            let p = random_params(l, d, &mut rng);
            let f = psi(&p).unwrap();
            let yty = random_spd(l, &mut rng);
            let k = yty.inverse().unwrap();
            let x = Vector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
            let via_theta = theta_with(&p, &f, &yty).unwrap().project(&x).unwrap();
            let direct = omega_direct(&p, &f, k.as_matrix(), &x).unwrap();
            assert!(rel_frobenius(&direct, &via_theta) < 1e-10);
        }
    }

    fn finite_difference_nuisance(p: &InverseParams, dof: f64) -> Matrix {
        let (l, d) = (p.l(), p.d());
        let eps = 1e-6;
        let slope_at = |gamma: Matrix, sigma: Vector| {
            let q = InverseParams::new(
                SpdMatrix::new(gamma, "g").unwrap(),
                p.slope().clone(),
                sigma,
            )
            .unwrap();
            vec(psi(&q).unwrap().slope_star())
        };
        let g = p.gamma().as_matrix().clone();
        let s = p.sigma_diag().clone();
        // Jacobian over the L² entries of Γ (symmetric perturbations counted per entry) and D entries of Σ.
        let mut jg = Matrix::zeros(l * d, l * l);
        for b in 0..l {
            for a in 0..l {
                let mut e = Matrix::zeros(l, l);
                e[(a, b)] += 0.5 * eps;
                e[(b, a)] += 0.5 * eps;
                let diff = slope_at(&g + &e, s.clone()) - slope_at(&g - &e, s.clone());
                jg.set_column(a + l * b, &(diff / (2.0 * eps)));
            }
        }
        let mut cov_g = Matrix::zeros(l * l, l * l);
        for a in 0..l {
            for b in 0..l {
                for c in 0..l {
                    for e in 0..l {
                        cov_g[(a + l * b, c + l * e)] =
                            g[(a, c)] * g[(b, e)] + g[(a, e)] * g[(b, c)];
                    }
                }
            }
        }
        let mut js = Matrix::zeros(l * d, d);
        for m in 0..d {
            let (mut up, mut dn) = (s.clone(), s.clone());
            up[m] += eps;
            dn[m] -= eps;
            js.set_column(
                m,
                &((slope_at(g.clone(), up) - slope_at(g.clone(), dn)) / (2.0 * eps)),
            );
        }
        let cov_s = Matrix::from_diagonal(&s.map(|v| 2.0 * v * v));
        (&jg * cov_g * jg.transpose() + &js * cov_s * js.transpose()) / dof
    }

    #[test]
    fn nuisance_matches_numerical_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let l = rng.random_range(1..=3);
            let d = rng.random_range(1..=5);
            let p = random_params(l, d, &mut rng);
            let f = psi(&p).unwrap();
            let closed = nuisance_covariance(&p, &f, 7.0).unwrap();
            let numeric = finite_difference_nuisance(&p, 7.0);
            assert!(
                rel_frobenius(&closed, &numeric) < 1e-5,
                "{}",
                rel_frobenius(&closed, &numeric)
            );
            let x = Vector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
            let xt_kron_i = kron(
                &Matrix::from_row_slice(1, d, x.as_slice()),
                &Matrix::identity(l, l),
            );
            let projected = &xt_kron_i * &closed * xt_kron_i.transpose();
            assert!(rel_frobenius(&nuisance_omega(&p, &f, 7.0, &x).unwrap(), &projected) < 1e-10);
        }
    }

    #[test]
    fn nuisance_term_vanishes_without_signal() {
        let p = InverseParams::new(
            SpdMatrix::identity(2),
            Matrix::zeros(3, 2),
            Vector::from_element(3, 1.0),
        )
        .unwrap();
        let f = psi(&p).unwrap();
        assert_eq!(nuisance_covariance(&p, &f, 10.0).unwrap().amax(), 0.0);
        assert!(nuisance_covariance(&p, &f, 0.0).is_err());
    }
}

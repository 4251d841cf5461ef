//! Least-squares fitting of the inverse model, forward parameters through Ψ,
//! and the ordinary least-squares forward baseline.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::json::{matrix_to_rows, rows_to_spd, vector_to_vec};
use crate::linalg::{Matrix, SpdMatrix, Vector};
use crate::model::{psi, ForwardParams, ForwardParamsJson, InverseParams, InverseParamsJson};
use crate::{Error, Result};

/// Paired observations: `x` is `N × D`, `y` is `N × L`, rows are observations.
///
/// `x_means`/`y_means` hold the column means removed by [`center`] (zeros for
/// uncentered data) so that new profiles can be centered with training means.
#[derive(Clone, Debug)]
pub struct Dataset {
    x: Matrix,
    y: Matrix,
    x_means: Vector,
    y_means: Vector,
    centered: bool,
}

impl Dataset {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::dims(
                "dataset rows (x vs y)",
                format!("{} rows in x", x.nrows()),
                format!("{} rows in y", y.nrows()),
            ));
        }
        if x.nrows() < 2 {
            return Err(Error::InsufficientSamples {
                n: x.nrows(),
                needed: 1,
            });
        }
        crate::linalg::ensure_finite(&x, "x")?;
        crate::linalg::ensure_finite(&y, "y")?;
        let (d, l) = (x.ncols(), y.ncols());
        Ok(Self {
            x,
            y,
            x_means: Vector::zeros(d),
            y_means: Vector::zeros(l),
            centered: false,
        })
    }

    /// Loads `x.csv` and `y.csv` (see [`read_csv_matrix`]).
    pub fn from_csv(x_path: impl AsRef<Path>, y_path: impl AsRef<Path>) -> Result<Self> {
        let x = read_csv_matrix(x_path)?;
        let y = read_csv_matrix(y_path)?;
        Self::new(x, y)
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn x_means(&self) -> &Vector {
        &self.x_means
    }

    pub fn y_means(&self) -> &Vector {
        &self.y_means
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn l(&self) -> usize {
        self.y.ncols()
    }

    /// Response columns with (numerically) zero spread.
    pub fn degenerate_responses(&self) -> Vec<usize> {
        self.y
            .column_iter()
            .enumerate()
            .filter(|(_, c)| {
                let m = c.mean();
                c.iter().all(|v| (v - m).abs() <= 1e-12 * m.abs().max(1.0))
            })
            .map(|(j, _)| j)
            .collect()
    }
}

/// Subtracts column means from both blocks. Means accumulate, so centering
/// twice keeps the original training means.
pub fn center(d: &Dataset) -> Dataset {
    let (x, xm) = center_columns(&d.x);
    let (y, ym) = center_columns(&d.y);
    let out = Dataset {
        x,
        y,
        x_means: &d.x_means + xm,
        y_means: &d.y_means + ym,
        centered: true,
    };
    for j in out.degenerate_responses() {
        log::warn!("response column {j} is constant; it is zero after centering");
    }
    out
}

fn center_columns(m: &Matrix) -> (Matrix, Vector) {
    let means = Vector::from_iterator(m.ncols(), m.column_iter().map(|c| c.mean()));
    let mut out = m.clone();
    for (mut col, mu) in out.column_iter_mut().zip(means.iter()) {
        col.add_scalar_mut(-mu);
    }
    (out, means)
}

/// Smallest Cholesky pivot of YᵀY, relative to the largest, below which the
/// responses are treated as collinear.
const COLLINEARITY_RATIO: f64 = 1e-7;

fn fit_inverse_with_gram(d: &Dataset) -> Result<(InverseParams, SpdMatrix)> {
    let (n, l) = (d.n(), d.l());
    if n <= l {
        return Err(Error::InsufficientSamples { n, needed: l });
    }
    let yty = SpdMatrix::from_symmetrized(d.y.tr_mul(&d.y), "YᵀY")
        .map_err(|_| Error::CollinearResponses)?;
    let pivots = yty.cholesky_factor().diagonal();
    if pivots.min() <= COLLINEARITY_RATIO * pivots.max() {
        return Err(Error::CollinearResponses);
    }
    let denom = (n - 1) as f64;
    let gamma = SpdMatrix::new(yty.as_matrix() / denom, "gamma_hat")
        .map_err(|_| Error::CollinearResponses)?;

    // Â = XᵀY (YᵀY)⁻¹, computed as the transpose of (YᵀY)⁻¹ YᵀX.
    let slope = yty.solve(&d.y.tr_mul(&d.x))?.transpose();
    let residual = &d.x - &d.y * slope.transpose();
    let sigma_diag = Vector::from_iterator(
        d.d(),
        residual.column_iter().map(|c| c.norm_squared() / denom),
    );
    Ok((InverseParams::new(gamma, slope, sigma_diag)?, yty))
}

/// Least-squares inverse-model estimates:
/// `Γ̂ = YᵀY/(N−1)`, `Â = XᵀY(YᵀY)⁻¹` (D × L), and
/// `Σ̂_jj = Σ_i (X_ij − [ÂY_i]_j)² / (N−1)` floored at 1e-12.
pub fn fit_inverse(d: &Dataset) -> Result<InverseParams> {
    fit_inverse_with_gram(d).map(|(p, _)| p)
}

/// A fitted inverse model with its forward image and what inference needs.
#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub inverse: InverseParams,
    pub forward: ForwardParams,
    pub n: usize,
    pub yty: SpdMatrix,
    pub x_means: Vector,
    pub y_means: Vector,
}

impl FitResult {
    pub fn l(&self) -> usize {
        self.inverse.l()
    }

    pub fn d(&self) -> usize {
        self.inverse.d()
    }

    /// Loads a model JSON and checks that the stored forward parameters are
    /// the image of the stored inverse ones.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let fit: FitResult = serde_json::from_str(text)?;
        let rederived = psi(&fit.inverse)?;
        let gap = crate::linalg::rel_frobenius(rederived.slope_star(), fit.forward.slope_star())
            .max(crate::linalg::rel_frobenius(
                rederived.sigma_star().as_matrix(),
                fit.forward.sigma_star().as_matrix(),
            ));
        if gap > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "stored forward parameters disagree with psi(inverse) (relative gap {gap:.3e})"
            )));
        }
        Ok(fit)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Fits the inverse model and maps it forward with Ψ. Only `L × L` and
/// diagonal matrices are inverted, so this works for `N < D`.
pub fn fit_forward(d: &Dataset) -> Result<FitResult> {
    let (inverse, yty) = fit_inverse_with_gram(d)?;
    let forward = psi(&inverse)?;
    Ok(FitResult {
        inverse,
        forward,
        n: d.n(),
        yty,
        x_means: d.x_means.clone(),
        y_means: d.y_means.clone(),
    })
}

/// Ordinary least-squares forward fit, kept with `XᵀX` for prediction.
#[derive(Clone, Debug)]
pub struct LseFit {
    pub forward: ForwardParams,
    pub xtx: SpdMatrix,
    pub n: usize,
    pub x_means: Vector,
    pub y_means: Vector,
}

/// `Â* = YᵀX(XᵀX)⁻¹`, `Σ̂* = RᵀR/(N−D)`, `Γ̂* = XᵀX/(N−1)`. Requires `N > D`.
pub fn fit_lse(d: &Dataset) -> Result<LseFit> {
    let (n, dim) = (d.n(), d.d());
    if n <= dim {
        return Err(Error::UnsupportedDesign { n, d: dim });
    }
    let xtx =
        SpdMatrix::from_symmetrized(d.x.tr_mul(&d.x), "XᵀX").map_err(|_| Error::Singular {
            name: "XᵀX".into(),
            reason: "predictors are collinear".into(),
        })?;
    let slope_star = xtx.solve(&d.x.tr_mul(&d.y))?.transpose();
    let residual = &d.y - &d.x * slope_star.transpose();
    let sigma_star = SpdMatrix::from_symmetrized(
        residual.tr_mul(&residual) / (n - dim) as f64,
        "sigma_star_lse",
    )?;
    let gamma_star =
        SpdMatrix::from_symmetrized(xtx.as_matrix() / (n - 1) as f64, "gamma_star_lse")?;
    Ok(LseFit {
        forward: ForwardParams::new(gamma_star, slope_star, sigma_star)?,
        xtx,
        n,
        x_means: d.x_means.clone(),
        y_means: d.y_means.clone(),
    })
}

/// Reads a comma-separated numeric matrix, rows = observations. A first row
/// containing any non-numeric field is treated as a header and skipped.
pub fn read_csv_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(Error::Parse(format!(
                    "{}: line {}: {e}",
                    path.display(),
                    i + 1
                )));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse(format!("{}: no numeric rows", path.display())));
    }
    let ncols = rows[0].len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::Parse(format!(
            "{}: row {} has {} fields, expected {ncols}",
            path.display(),
            i + 1,
            r.len()
        )));
    }
    let m = Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
    crate::linalg::ensure_finite(&m, &path.display().to_string())?;
    Ok(m)
}

/// Writes a matrix as headerless CSV with round-trip float formatting.
pub fn write_csv_matrix(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct FitResultJson {
    #[serde(flatten)]
    inverse: InverseParamsJson,
    #[serde(flatten)]
    forward: ForwardParamsJson,
    n: usize,
    yty: Vec<Vec<f64>>,
    x_means: Vec<f64>,
    y_means: Vec<f64>,
}

impl Serialize for FitResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FitResultJson {
            inverse: (&self.inverse).into(),
            forward: (&self.forward).into(),
            n: self.n,
            yty: matrix_to_rows(self.yty.as_matrix()),
            x_means: vector_to_vec(&self.x_means),
            y_means: vector_to_vec(&self.y_means),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FitResult {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = FitResultJson::deserialize(d)?;
        let inverse = InverseParams::try_from(j.inverse).map_err(D::Error::custom)?;
        let forward = ForwardParams::try_from(j.forward).map_err(D::Error::custom)?;
        let yty = rows_to_spd(&j.yty, "yty").map_err(D::Error::custom)?;
        if j.x_means.len() != inverse.d()
            || j.y_means.len() != inverse.l()
            || yty.dim() != inverse.l()
        {
            return Err(D::Error::custom("model JSON: inconsistent dimensions"));
        }
        Ok(FitResult {
            inverse,
            forward,
            n: j.n,
            yty,
            x_means: Vector::from_vec(j.x_means),
            y_means: Vector::from_vec(j.y_means),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hand_least_squares_univariate() {
        let y = Matrix::from_column_slice(3, 1, &[1.0, 0.0, -1.0]);
        let x = Matrix::from_column_slice(3, 1, &[2.0, 0.0, -2.0]);
        let p = fit_inverse(&Dataset::new(x, y).unwrap()).unwrap();
        assert_relative_eq!(p.slope()[(0, 0)], 2.0, max_relative = 1e-14);
        assert_eq!(p.sigma_diag()[0], crate::model::SIGMA_FLOOR);
        assert_relative_eq!(p.gamma().as_matrix()[(0, 0)], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn noiseless_recovers_slope() {
        let a = Matrix::from_row_slice(4, 2, &[1.0, 0.5, -2.0, 0.0, 0.3, 0.3, 0.0, 1.5]);
        let y = Matrix::from_fn(6, 2, |i, j| ((i * 5 + j * 3) % 7) as f64 - 3.0);
        let x = &y * a.transpose();
        let p = fit_inverse(&Dataset::new(x, y).unwrap()).unwrap();
        assert!((p.slope() - &a).amax() < 1e-12);
        assert!(p.sigma_diag().iter().all(|&s| s <= 1e-12));
    }

    #[test]
    fn centering_properties() {
        let x = Matrix::from_fn(7, 3, |i, j| (i * i) as f64 * 0.3 + j as f64 * 10.0 - 1.0);
        let y = Matrix::from_fn(7, 2, |i, j| if j == 1 { 4.0 } else { i as f64 });
        let c = center(&Dataset::new(x.clone(), y).unwrap());
        for col in c.x().column_iter().chain(c.y().column_iter()) {
            assert!(col.mean().abs() <= 1e-12);
        }
        assert_eq!(c.degenerate_responses(), vec![1]);
        assert!(c.y().column(1).iter().all(|&v| v == 0.0));
        let twice = center(&c);
        assert!((twice.x() - c.x()).amax() <= 1e-12);
        assert!((twice.x_means() - c.x_means()).amax() <= 1e-12);
        assert_relative_eq!(c.x_means()[2], x.column(2).mean(), max_relative = 1e-14);
    }

    #[test]
    fn error_paths() {
        let y = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let x = Matrix::from_row_slice(2, 1, &[1.0, 2.0]);
        assert!(matches!(
            fit_inverse(&Dataset::new(x, y).unwrap()),
            Err(Error::InsufficientSamples { .. })
        ));

        let y = Matrix::from_fn(5, 2, |i, _| i as f64);
        let x = Matrix::from_fn(5, 3, |i, j| (i + j) as f64);
        assert!(matches!(
            fit_inverse(&Dataset::new(x, y).unwrap()),
            Err(Error::CollinearResponses)
        ));

        let err = Dataset::new(Matrix::zeros(4, 2), Matrix::zeros(3, 1)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('4') && msg.contains('3'), "{msg}");

        let x = Matrix::from_fn(5, 6, |i, j| (i * j) as f64);
        let y = Matrix::from_fn(5, 1, |i, _| i as f64);
        assert!(matches!(
            fit_lse(&Dataset::new(x, y).unwrap()),
            Err(Error::UnsupportedDesign { n: 5, d: 6 })
        ));
    }

    #[test]
    fn lse_simple_regression_slope() {
        let x = Matrix::from_column_slice(5, 1, &[-2.0, -1.0, 0.0, 1.0, 2.0]);
        let y = Matrix::from_column_slice(5, 1, &[-3.9, -2.1, 0.2, 1.8, 4.0]);
        let fit = fit_lse(&Dataset::new(x.clone(), y.clone()).unwrap()).unwrap();
        let sxy: f64 = x.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        assert_relative_eq!(
            fit.forward.slope_star()[(0, 0)],
            sxy / sxx,
            max_relative = 1e-13
        );
    }

    #[test]
    fn forward_is_psi_of_inverse() {
        let y = Matrix::from_fn(9, 2, |i, j| {
            ((i * 7 + j * 3) % 5) as f64 - 2.0 + 0.1 * i as f64
        });
        let x = Matrix::from_fn(9, 4, |i, j| ((i * 3 + j * 11) % 13) as f64 * 0.2 - 1.0);
        let fit = fit_forward(&center(&Dataset::new(x, y).unwrap())).unwrap();
        assert_eq!(psi(&fit.inverse).unwrap(), fit.forward);
        let text = serde_json::to_string(&fit).unwrap();
        for key in [
            "gamma",
            "slope",
            "sigma_diag",
            "gamma_star",
            "slope_star",
            "sigma_star",
            "n",
            "yty",
            "x_means",
            "y_means",
        ] {
            assert!(text.contains(&format!("\"{key}\"")), "missing {key}");
        }
        assert_eq!(FitResult::from_json_str(&text).unwrap(), fit);
    }
}

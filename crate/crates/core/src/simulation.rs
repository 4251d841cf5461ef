//! Seeded simulation designs, SNR calibration, the coverage/volume harness and
//! the replication oracles for the slope law and Θ.
//!
//! Randomness comes from ChaCha8 keyed by the experiment seed
//! (`ChaCha8Rng::seed_from_u64(seed)`); every logical substream selects its own
//! ChaCha stream id. Replication `r` uses stream `r`, parameter generation uses
//! [`PARAM_STREAM`]. Results therefore do not depend on thread count or
//! scheduling order.

use std::path::Path;
use std::time::Instant;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::estimation::{center, fit_forward, fit_lse, Dataset};
use crate::inference::{
    confidence_region, lse_prediction_region, prediction_region_direct, region_metrics, theta_with,
};
use crate::linalg::{kron, rel_frobenius, standard_normal_matrix, vec, Matrix, SpdMatrix, Vector};
use crate::model::{psi, snr, ForwardParams, InverseParams};
use crate::{Error, Result};

pub const DEFAULT_TARGET_SNR: f64 = 7.5;
pub const SNR_TOLERANCE: f64 = 0.01;
pub const MAX_PARAM_ATTEMPTS: usize = 10;
const BISECTION_STEPS: usize = 40;

/// Stream id reserved for parameter generation.
pub const PARAM_STREAM: u64 = u64::MAX;

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "INVREG_THREADS";

/// ChaCha8 generator keyed by `seed`, positioned on stream `stream`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    #[serde(alias = "case1", alias = "1")]
    Case1,
    #[serde(alias = "case2", alias = "2")]
    Case2,
    #[serde(alias = "case3", alias = "3")]
    Case3,
}

impl Case {
    pub fn label(self) -> &'static str {
        match self {
            Case::Case1 => "Case1",
            Case::Case2 => "Case2",
            Case::Case3 => "Case3",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseSpec {
    pub case: Case,
    pub l: usize,
    pub d: usize,
    pub target_snr: f64,
    pub seed: u64,
}

impl CaseSpec {
    pub fn new(case: Case, l: usize, d: usize, seed: u64) -> Self {
        Self {
            case,
            l,
            d,
            target_snr: DEFAULT_TARGET_SNR,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 || self.d == 0 {
            return Err(Error::InvalidConfig(format!(
                "L and D must be at least 1 (got L = {}, D = {})",
                self.l, self.d
            )));
        }
        if !(self.target_snr.is_finite() && self.target_snr > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "target_snr must be positive, got {}",
                self.target_snr
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "IR", alias = "ir")]
    Ir,
    #[serde(rename = "LSE", alias = "lse")]
    Lse,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Ir => "IR",
            Method::Lse => "LSE",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub spec: CaseSpec,
    pub n: usize,
    pub replications: usize,
    pub level: f64,
    pub methods: Vec<Method>,
}

fn default_level() -> f64 {
    0.95
}

fn default_snr() -> f64 {
    DEFAULT_TARGET_SNR
}

fn default_methods() -> Vec<Method> {
    vec![Method::Ir]
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentConfigJson {
    case: Case,
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "D")]
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    replications: usize,
    #[serde(default = "default_level")]
    level: f64,
    #[serde(default = "default_methods")]
    methods: Vec<Method>,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_snr")]
    target_snr: f64,
}

impl ExperimentConfig {
    pub fn new(spec: CaseSpec, n: usize, replications: usize, methods: Vec<Method>) -> Self {
        Self {
            spec,
            n,
            replications,
            level: default_level(),
            methods,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.replications == 0 {
            return Err(Error::InvalidConfig(
                "replications must be at least 1".into(),
            ));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "level must lie in (0, 1), got {}",
                self.level
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods requested".into()));
        }
        let mut sorted = self.methods.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.methods.len() {
            return Err(Error::InvalidConfig("duplicate method".into()));
        }
        if self.n <= self.spec.l.max(1) {
            return Err(Error::InvalidConfig(format!(
                "N = {} must exceed L = {}",
                self.n, self.spec.l
            )));
        }
        if self.methods.contains(&Method::Lse) && self.n <= self.spec.d {
            return Err(Error::InvalidConfig(format!(
                "LSE requires N > D (got N = {}, D = {})",
                self.n, self.spec.d
            )));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let j: ExperimentConfigJson =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let cfg = Self {
            spec: CaseSpec {
                case: j.case,
                l: j.l,
                d: j.d,
                target_snr: j.target_snr,
                seed: j.seed,
            },
            n: j.n,
            replications: j.replications,
            level: j.level,
            methods: j.methods,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let j = ExperimentConfigJson {
            case: self.spec.case,
            l: self.spec.l,
            d: self.spec.d,
            n: self.n,
            replications: self.replications,
            level: self.level,
            methods: self.methods.clone(),
            seed: self.spec.seed,
            target_snr: self.spec.target_snr,
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }
}

fn uniform_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

/// `D × L` slope with exactly `⌊0.9·D·L⌋` zeros and the rest Uniform(−2, 2).
fn sparse_slope<R: Rng + ?Sized>(d: usize, l: usize, rng: &mut R) -> Matrix {
    let total = d * l;
    let zeros = 9 * total / 10;
    let mut idx: Vec<usize> = (0..total).collect();
    idx.shuffle(rng);
    let mut a = Matrix::zeros(d, l);
    for &k in &idx[zeros..] {
        a[(k % d, k / d)] = rng.random_range(-2.0..2.0);
    }
    a
}

/// `Γ = ΛΛᵀ + 0.5·I` with `Λ` of size `L × ⌈L/2⌉`, standard normal entries.
fn factor_gamma<R: Rng + ?Sized>(l: usize, rng: &mut R) -> Result<SpdMatrix> {
    let k = l.div_ceil(2);
    let lambda = standard_normal_matrix(l, k, rng);
    let g = &lambda * lambda.transpose() + Matrix::identity(l, l) * 0.5;
    SpdMatrix::from_symmetrized(g, "factor-model gamma")
}

fn snr_at(gamma: &SpdMatrix, slope: &Matrix, sigma: &Vector, c: f64) -> Result<f64> {
    let p = InverseParams::new(gamma.clone(), slope * c, sigma.clone())?;
    snr(&psi(&p)?)
}

/// Scales `slope` so the forward SNR hits `target`: bracket by doubling, then
/// bisect.
fn calibrate_scale(gamma: &SpdMatrix, slope: &Matrix, sigma: &Vector, target: f64) -> Result<f64> {
    let base = snr_at(gamma, slope, sigma, 1.0)?;
    if !(base.is_finite() && base > 0.0) {
        return Err(Error::Calibration {
            attempts: 1,
            reason: format!("SNR at unit scale is {base}"),
        });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut steps = 0;
    while snr_at(gamma, slope, sigma, hi)? < target {
        lo = hi;
        hi *= 2.0;
        steps += 1;
        if steps > 200 {
            return Err(Error::Calibration {
                attempts: 1,
                reason: "SNR target not bracketed".into(),
            });
        }
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if snr_at(gamma, slope, sigma, mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    let got = snr_at(gamma, slope, sigma, c)?;
    if (got - target).abs() > SNR_TOLERANCE {
        return Err(Error::Calibration {
            attempts: 1,
            reason: format!("reached SNR {got}, target {target}"),
        });
    }
    Ok(c)
}

/// Draws inverse parameters for `spec` and rescales the slope to the target
/// SNR. Draws that cannot be calibrated are replaced, up to
/// [`MAX_PARAM_ATTEMPTS`] times.
pub fn gen_params<R: Rng + ?Sized>(spec: &CaseSpec, rng: &mut R) -> Result<InverseParams> {
    spec.validate()?;
    let (l, d) = (spec.l, spec.d);
    let sigma = Vector::from_element(d, 1.0);
    let mut last = String::new();
    for attempt in 1..=MAX_PARAM_ATTEMPTS {
        let (gamma, slope) = match spec.case {
            Case::Case1 => (SpdMatrix::identity(l), sparse_slope(d, l, rng)),
            Case::Case2 => {
                let slope = sparse_slope(d, l, rng);
                (factor_gamma(l, rng)?, slope)
            }
            Case::Case3 => {
                let slope = uniform_matrix(d, l, -0.5, 0.5, rng);
                (factor_gamma(l, rng)?, slope)
            }
        };
        match calibrate_scale(&gamma, &slope, &sigma, spec.target_snr) {
            Ok(c) => {
                debug!(
                    "{} L={l} D={d}: slope scale {c} after {attempt} draw(s)",
                    spec.case.label()
                );
                return InverseParams::new(gamma, slope * c, sigma);
            }
            Err(e) => last = e.to_string(),
        }
    }
    Err(Error::Calibration {
        attempts: MAX_PARAM_ATTEMPTS,
        reason: last,
    })
}

/// [`gen_params`] on the reserved parameter stream of `spec.seed`.
pub fn gen_params_seeded(spec: &CaseSpec) -> Result<InverseParams> {
    gen_params(spec, &mut substream(spec.seed, PARAM_STREAM))
}

fn gamma_factor(p: &InverseParams) -> Matrix {
    p.gamma().cholesky_factor()
}

fn sample_responses<R: Rng + ?Sized>(p: &InverseParams, n: usize, rng: &mut R) -> Matrix {
    standard_normal_matrix(n, p.l(), rng) * gamma_factor(p).transpose()
}

fn sample_predictors<R: Rng + ?Sized>(p: &InverseParams, y: &Matrix, rng: &mut R) -> Matrix {
    let mut x = y * p.slope().transpose();
    let noise = standard_normal_matrix(y.nrows(), p.d(), rng);
    for (j, s) in p.sigma_diag().iter().enumerate() {
        let sd = s.sqrt();
        x.column_mut(j).axpy(sd, &noise.column(j), 1.0);
    }
    x
}

/// Generic random inverse parameters for oracle sweeps: `Γ = GGᵀ + 0.5·I`,
/// slope entries Uniform(−1.5, 1.5), `Σ_jj` Uniform(0.3, 2).
pub fn random_inverse_params<R: Rng + ?Sized>(l: usize, d: usize, rng: &mut R) -> InverseParams {
    let g = standard_normal_matrix(l, l, rng);
    let gamma =
        SpdMatrix::from_symmetrized(&g * g.transpose() + Matrix::identity(l, l) * 0.5, "gamma")
            .expect("GGᵀ + 0.5·I is positive definite");
    let slope = uniform_matrix(d, l, -1.5, 1.5, rng);
    let sigma = Vector::from_fn(d, |_, _| rng.random_range(0.3..2.0));
    InverseParams::new(gamma, slope, sigma).expect("positive diagonal noise")
}

/// `n` draws of `Y_i ~ N_L(0, Γ)`, `X_i = A Y_i + e_i`, `e_i ~ N_D(0, Σ)`.
pub fn simulate_dataset<R: Rng + ?Sized>(
    p: &InverseParams,
    n: usize,
    rng: &mut R,
) -> Result<Dataset> {
    let y = sample_responses(p, n, rng);
    let x = sample_predictors(p, &y, rng);
    Dataset::new(x, y)
}

/// Outcome of one method on one replication; `None` fields mean the method
/// failed on that draw.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodOutcome {
    pub method: Method,
    pub covered: Option<bool>,
    pub volume: f64,
    pub normalized_volume: f64,
    pub cpu_seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicationOutcome {
    pub rep: usize,
    pub outcomes: Vec<MethodOutcome>,
}

/// An experiment with its true parameters drawn once.
#[derive(Clone, Debug)]
pub struct Simulation {
    config: ExperimentConfig,
    params: InverseParams,
    forward: ForwardParams,
}

impl Simulation {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let params = gen_params_seeded(&config.spec)?;
        let forward = psi(&params)?;
        info!(
            "{} L={} D={} N={}: SNR {:.4}",
            config.spec.case.label(),
            config.spec.l,
            config.spec.d,
            config.n,
            snr(&forward)?
        );
        Ok(Self {
            config,
            params,
            forward,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn params(&self) -> &InverseParams {
        &self.params
    }

    pub fn forward(&self) -> &ForwardParams {
        &self.forward
    }

    /// One learning set and one test pair from the substream of `rep`; each
    /// method is fitted and its prediction region checked against the pair.
    pub fn run_replication(&self, rep: usize) -> ReplicationOutcome {
        let mut rng = substream(self.config.spec.seed, rep as u64);
        let outcomes = match simulate_dataset(&self.params, self.config.n, &mut rng) {
            Ok(data) => {
                let y_test = sample_responses(&self.params, 1, &mut rng);
                let x_test = sample_predictors(&self.params, &y_test, &mut rng);
                let x_new = x_test.row(0).transpose();
                let y_new = y_test.row(0).transpose();
                let centered = center(&data);
                self.config
                    .methods
                    .iter()
                    .map(|&m| self.evaluate(m, &centered, &x_new, &y_new, rep))
                    .collect()
            }
            Err(e) => {
                debug!("replication {rep}: data generation failed: {e}");
                self.config.methods.iter().map(|&m| failed(m)).collect()
            }
        };
        ReplicationOutcome { rep, outcomes }
    }

    fn evaluate(
        &self,
        method: Method,
        data: &Dataset,
        x_new: &Vector,
        y_new: &Vector,
        rep: usize,
    ) -> MethodOutcome {
        let level = self.config.level;
        let start = Instant::now();
        let region = match method {
            Method::Ir => {
                fit_forward(data).and_then(|fit| prediction_region_direct(&fit, x_new, level))
            }
            Method::Lse => fit_lse(data).and_then(|fit| lse_prediction_region(&fit, x_new, level)),
        };
        let cpu_seconds = start.elapsed().as_secs_f64();
        match region.and_then(|r| Ok((r.contains(y_new)?, region_metrics(&r)))) {
            Ok((covered, m)) => MethodOutcome {
                method,
                covered: Some(covered),
                volume: m.volume,
                normalized_volume: m.normalized_volume,
                cpu_seconds,
            },
            Err(e) => {
                debug!("replication {rep}: {} failed: {e}", method.label());
                failed(method)
            }
        }
    }
}

fn failed(method: Method) -> MethodOutcome {
    MethodOutcome {
        method,
        covered: None,
        volume: f64::NAN,
        normalized_volume: f64::NAN,
        cpu_seconds: 0.0,
    }
}

/// Pool size from [`THREADS_ENV`], else the available parallelism.
pub fn configured_threads() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t);
    }
    b.build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub case: String,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub method: String,
    pub coverage: f64,
    pub coverage_se: f64,
    pub volume: f64,
    pub normalized_volume: f64,
    pub cpu_mean_s: f64,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn row(&self, method: Method) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method.label())
    }

    /// Copy with the CPU column zeroed, for byte-stable output.
    pub fn without_timing(mut self) -> Self {
        for r in &mut self.rows {
            r.cpu_mean_s = 0.0;
        }
        self
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }
}

/// Aggregates outcomes in replication order, one row per method (IR first).
pub fn aggregate(config: &ExperimentConfig, reps: &[ReplicationOutcome]) -> ExperimentReport {
    let mut methods = config.methods.clone();
    methods.sort();
    let rows = methods
        .into_iter()
        .map(|m| {
            let (mut ok, mut hits, mut vol, mut nvol, mut cpu) = (0usize, 0usize, 0.0, 0.0, 0.0);
            for o in reps
                .iter()
                .flat_map(|r| r.outcomes.iter())
                .filter(|o| o.method == m)
            {
                if let Some(c) = o.covered {
                    ok += 1;
                    hits += c as usize;
                    vol += o.volume;
                    nvol += o.normalized_volume;
                    cpu += o.cpu_seconds;
                }
            }
            let k = ok as f64;
            let coverage = if ok > 0 { hits as f64 / k } else { f64::NAN };
            ReportRow {
                case: config.spec.case.label().into(),
                l: config.spec.l,
                d: config.spec.d,
                n: config.n,
                method: m.label().into(),
                coverage,
                coverage_se: (coverage * (1.0 - coverage) / k).sqrt(),
                volume: vol / k,
                normalized_volume: nvol / k,
                cpu_mean_s: cpu / k,
                failures: reps.len() - ok,
            }
        })
        .collect();
    ExperimentReport {
        config: config.clone(),
        rows,
    }
}

/// Runs every replication on a pool sized by [`THREADS_ENV`].
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with_threads(config, configured_threads())
}

pub fn run_experiment_with_threads(
    config: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<ExperimentReport> {
    let sim = Simulation::new(config.clone())?;
    let reps: Vec<ReplicationOutcome> = pool(threads)?.install(|| {
        (0..config.replications)
            .into_par_iter()
            .map(|r| sim.run_replication(r))
            .collect()
    });
    Ok(aggregate(config, &reps))
}

fn empirical_covariance(samples: &[Vector]) -> Matrix {
    let n = samples.len() as f64;
    let dim = samples[0].len();
    let mean = samples.iter().fold(Vector::zeros(dim), |acc, s| acc + s) / n;
    let mut cov = Matrix::zeros(dim, dim);
    for s in samples {
        let c = s - &mean;
        cov.ger(1.0, &c, &c, 1.0);
    }
    cov / (n - 1.0)
}

/// Replication oracle for the law of `Â`: fixes one `Y`, redraws `X`
/// `replications` times and compares the empirical `Cov(vec(Â))` with
/// `(YᵀY)⁻¹ ⊗ Σ`. Returns the relative Frobenius error.
pub fn mc_slope_law<R: Rng + ?Sized>(
    p: &InverseParams,
    n: usize,
    replications: usize,
    rng: &mut R,
) -> Result<f64> {
    check_reps(replications)?;
    let y = sample_responses(p, n, rng);
    let yty = SpdMatrix::from_symmetrized(y.tr_mul(&y), "YᵀY")?;
    let mut draws = Vec::with_capacity(replications);
    for _ in 0..replications {
        let x = sample_predictors(p, &y, rng);
        let slope = yty.solve(&y.tr_mul(&x))?.transpose();
        draws.push(vec(&slope));
    }
    let expected = kron(
        yty.inverse()?.as_matrix(),
        &Matrix::from_diagonal(p.sigma_diag()),
    );
    Ok(rel_frobenius(&empirical_covariance(&draws), &expected))
}

#[derive(Clone, Debug)]
pub struct ThetaOracle {
    pub rel_frobenius_error: f64,
    pub empirical: Matrix,
    pub theoretical: Matrix,
}

/// Replication oracle for Θ: fixes one `Y`, redraws `X`, refits `Â*` each
/// time (uncentered, as the population means are zero) and compares the
/// empirical `Cov(vec(Â*))` with `theta(p, YᵀY)`.
pub fn mc_validate_theta<R: Rng + ?Sized>(
    p: &InverseParams,
    n: usize,
    replications: usize,
    rng: &mut R,
) -> Result<ThetaOracle> {
    check_reps(replications)?;
    let y = sample_responses(p, n, rng);
    let yty = SpdMatrix::from_symmetrized(y.tr_mul(&y), "YᵀY")?;
    let mut draws = Vec::with_capacity(replications);
    for _ in 0..replications {
        let x = sample_predictors(p, &y, rng);
        let fit = fit_forward(&Dataset::new(x, y.clone())?)?;
        draws.push(vec(fit.forward.slope_star()));
    }
    let f = psi(p)?;
    let theoretical = theta_with(p, &f, &yty)?.matrix().as_matrix().clone();
    let empirical = empirical_covariance(&draws);
    Ok(ThetaOracle {
        rel_frobenius_error: rel_frobenius(&empirical, &theoretical),
        empirical,
        theoretical,
    })
}

/// Fraction of `replications` fresh datasets whose `level` confidence region
/// contains the true `A*`. Replication `r` uses stream `r` of `seed`.
pub fn mc_confidence_coverage(
    p: &InverseParams,
    n: usize,
    replications: usize,
    level: f64,
    seed: u64,
) -> Result<f64> {
    check_reps(replications)?;
    let truth = psi(p)?.slope_star().clone();
    let hits: Vec<bool> = (0..replications)
        .into_par_iter()
        .map(|r| -> Result<bool> {
            let mut rng = substream(seed, r as u64);
            let fit = fit_forward(&center(&simulate_dataset(p, n, &mut rng)?))?;
            confidence_region(&fit, level)?.contains(&truth)
        })
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / replications as f64)
}

fn check_reps(replications: usize) -> Result<()> {
    if replications < 2 {
        return Err(Error::InvalidParameter(
            "a covariance oracle needs at least 2 replications".into(),
        ));
    }
    Ok(())
}

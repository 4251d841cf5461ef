use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use invreg::estimation::{center, fit_forward, write_csv_matrix, Dataset, FitResult};
use invreg::inference::RegionJson;
use invreg::linalg::{rel_frobenius, standard_normal_matrix, Matrix};
use invreg::simulation::{gen_params_seeded, simulate_dataset, substream, Case, CaseSpec};
use tempfile::TempDir;

fn invreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_invreg"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_data(dir: &TempDir, x: &Matrix, y: &Matrix) -> (PathBuf, PathBuf) {
    let (xp, yp) = (dir.path().join("x.csv"), dir.path().join("y.csv"));
    write_csv_matrix(&xp, x).unwrap();
    write_csv_matrix(&yp, y).unwrap();
    (xp, yp)
}

fn case1_data(l: usize, d: usize, n: usize, seed: u64) -> Dataset {
    let p = gen_params_seeded(&CaseSpec::new(Case::Case1, l, d, seed)).unwrap();
    simulate_dataset(&p, n, &mut substream(seed, 0)).unwrap()
}

#[test]
fn fit_recovers_noiseless_slope() {
    let dir = TempDir::new().unwrap();
    let y = standard_normal_matrix(30, 2, &mut substream(1, 0));
    let a = Matrix::from_row_slice(3, 2, &[1.0, -2.0, 0.5, 0.0, 3.0, 1.5]);
    let (xp, yp) = write_data(&dir, &(&y * a.transpose()), &y);
    let model = dir.path().join("model.json");
    let out = invreg(&["fit", "--x", s(&xp), "--y", s(&yp), "--out", s(&model)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("N = 30") && stdout.contains("D = 3") && stdout.contains("L = 2"));
    assert!(stdout.contains("SNR = "));
    let fit = FitResult::from_json_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert!((fit.inverse.slope() - &a).amax() < 1e-8);
}

#[test]
fn fit_handles_more_predictors_than_samples() {
    let dir = TempDir::new().unwrap();
    let data = case1_data(2, 100, 50, 3);
    let (xp, yp) = write_data(&dir, data.x(), data.y());
    let model = dir.path().join("model.json");
    let out = invreg(&[
        "fit",
        "--x",
        s(&xp),
        "--y",
        s(&yp),
        "--out",
        s(&model),
        "--no-center",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn fit_reports_mismatched_rows() {
    let dir = TempDir::new().unwrap();
    let (xp, yp) = write_data(
        &dir,
        &Matrix::from_element(5, 2, 1.0),
        &Matrix::from_element(4, 1, 1.0),
    );
    let out = invreg(&[
        "fit",
        "--x",
        s(&xp),
        "--y",
        s(&yp),
        "--out",
        s(&dir.path().join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains('5') && err.contains('4'), "{err}");
}

#[test]
fn fit_reports_collinear_responses() {
    let dir = TempDir::new().unwrap();
    let col = standard_normal_matrix(20, 1, &mut substream(2, 0));
    let y = Matrix::from_fn(20, 2, |i, _| col[(i, 0)]);
    let (xp, yp) = write_data(
        &dir,
        &standard_normal_matrix(20, 3, &mut substream(2, 1)),
        &y,
    );
    let out = invreg(&[
        "fit",
        "--x",
        s(&xp),
        "--y",
        s(&yp),
        "--out",
        s(&dir.path().join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().contains("collinear"));
}

#[test]
fn fit_rejects_garbage_csv() {
    let dir = TempDir::new().unwrap();
    let xp = dir.path().join("x.csv");
    std::fs::write(&xp, "a,b\n1,2\n3,oops\n").unwrap();
    let out = invreg(&[
        "fit",
        "--x",
        s(&xp),
        "--y",
        s(&xp),
        "--out",
        s(&dir.path().join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

fn fitted_model(dir: &TempDir) -> (PathBuf, FitResult) {
    let data = case1_data(2, 10, 200, 5);
    let (xp, yp) = write_data(dir, data.x(), data.y());
    let model = dir.path().join("model.json");
    assert!(
        invreg(&["fit", "--x", s(&xp), "--y", s(&yp), "--out", s(&model)])
            .status
            .success()
    );
    (model, fit_forward(&center(&data)).unwrap())
}

fn predict(
    dir: &TempDir,
    model: &Path,
    profiles: &Matrix,
    level: &str,
) -> (Output, Vec<RegionJson>) {
    let xp = dir.path().join("profiles.csv");
    write_csv_matrix(&xp, profiles).unwrap();
    let out_path = dir.path().join(format!("regions-{level}.json"));
    let out = invreg(&[
        "predict",
        "--model",
        s(model),
        "--x-new",
        s(&xp),
        "--level",
        level,
        "--out",
        s(&out_path),
    ]);
    let regions = if out.status.success() {
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap()
    } else {
        Vec::new()
    };
    (out, regions)
}

#[test]
fn model_json_round_trip_is_lossless() {
    let dir = TempDir::new().unwrap();
    let (model, fit) = fitted_model(&dir);
    let loaded = FitResult::from_json_str(&std::fs::read_to_string(model).unwrap()).unwrap();
    assert!(rel_frobenius(loaded.forward.slope_star(), fit.forward.slope_star()) <= 1e-12);
    assert!(
        rel_frobenius(
            loaded.inverse.gamma().as_matrix(),
            fit.inverse.gamma().as_matrix()
        ) <= 1e-12
    );
    assert!((loaded.x_means - fit.x_means).amax() <= 1e-12);
}

#[test]
fn predict_at_training_mean_gives_residual_shape() {
    let dir = TempDir::new().unwrap();
    let (model, fit) = fitted_model(&dir);
    let mean = Matrix::from_row_slice(1, 10, fit.x_means.as_slice());
    let (out, regions) = predict(&dir, &model, &mean, "0.95");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(regions.len(), 1);
    let shape = Matrix::from_fn(2, 2, |i, j| regions[0].shape[i][j]);
    assert!(rel_frobenius(&shape, fit.forward.sigma_star().as_matrix()) < 1e-12);
    for (c, m) in regions[0].center.iter().zip(fit.y_means.iter()) {
        assert!((c - m).abs() < 1e-12);
    }
}

#[test]
fn higher_level_gives_larger_regions() {
    let dir = TempDir::new().unwrap();
    let (model, _) = fitted_model(&dir);
    let profiles = standard_normal_matrix(4, 10, &mut substream(6, 0));
    let (_, low) = predict(&dir, &model, &profiles, "0.95");
    let (_, high) = predict(&dir, &model, &profiles, "0.99");
    assert_eq!(low.len(), 4);
    for (a, b) in low.iter().zip(high.iter()) {
        assert!(b.volume > a.volume);
        assert!(b.normalized_volume > a.normalized_volume);
    }
}

#[test]
fn predict_rejects_wrong_profile_width() {
    let dir = TempDir::new().unwrap();
    let (model, _) = fitted_model(&dir);
    let (out, _) = predict(&dir, &model, &Matrix::zeros(2, 9), "0.95");
    assert_eq!(out.status.code(), Some(2));
}

fn write_config(dir: &TempDir, body: &str) -> PathBuf {
    let p = dir.path().join("experiment.json");
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn simulate_single_replication_is_stable() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        r#"{"case": "Case1", "L": 2, "D": 20, "N": 40, "replications": 1, "level": 0.95, "methods": ["IR", "LSE"], "seed": 42, "target_snr": 7.5}"#,
    );
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = invreg(&[
            "simulate",
            "--config",
            s(&cfg),
            "--out",
            s(&out),
            "--reproducible",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out).unwrap()
    };
    let first = run("a.csv");
    assert_eq!(first, run("b.csv"));
    let mut lines = first.lines();
    assert_eq!(
        lines.next().unwrap(),
        "case,L,D,N,method,coverage,coverage_se,volume,normalized_volume,cpu_mean_s,failures"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("Case1,2,20,40,IR,"));
    assert!(rows[1].starts_with("Case1,2,20,40,LSE,"));
    assert!(rows.iter().all(|r| r.ends_with(",0.0,0")));
}

#[test]
fn simulate_rejects_lse_without_enough_samples() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        r#"{"case": "Case1", "L": 1, "D": 100, "N": 50, "replications": 5, "methods": ["LSE"]}"#,
    );
    let out = invreg(&[
        "simulate",
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("r.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("N > D"));
}

#[test]
fn validate_suites_and_exit_codes() {
    let out = invreg(&["validate", "--suite", "involution", "--seed", "3"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .all(|l| l.starts_with("PASS")));
    let out = invreg(&["validate", "--suite", "uni-cross"]);
    assert!(out.status.success());
    assert_eq!(
        invreg(&["validate", "--suite", "nonsense"]).status.code(),
        Some(2)
    );
    assert_eq!(invreg(&["fit", "--bogus"]).status.code(), Some(2));
}

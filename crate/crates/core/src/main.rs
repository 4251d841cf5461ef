use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use invreg::estimation::{center, fit_forward, read_csv_matrix, Dataset, FitResult};
use invreg::inference::{prediction_region_with_theta, theta_with, RegionJson};
use invreg::model::snr;
use invreg::simulation::{run_experiment, ExperimentConfig};
use invreg::validate::{run_suite, Suite};
use invreg::Error;

#[derive(Parser)]
#[command(
    name = "invreg",
    version,
    about = "Inverse regression prediction and confidence regions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the inverse model on CSV data and write the fitted model as JSON.
    Fit {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fit on the raw columns instead of centering them first.
        #[arg(long)]
        no_center: bool,
    },
    /// Prediction regions for each row of a profile CSV.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        x_new: PathBuf,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a simulation experiment and write the report CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Zero the timing column so reruns are byte-identical.
        #[arg(long)]
        reproducible: bool,
    },
    /// Run an oracle suite: involution, theta-oracle, uni-cross or coverage.
    Validate {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Oracle,
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn fit(x: PathBuf, y: PathBuf, out: PathBuf, no_center: bool) -> Result<(), Failure> {
    let data = Dataset::from_csv(x, y)?;
    let data = if no_center { data } else { center(&data) };
    let fit = fit_forward(&data)?;
    std::fs::write(out, fit.to_json_string()?).map_err(Error::from)?;
    println!("N = {}", fit.n);
    println!("D = {}", fit.d());
    println!("L = {}", fit.l());
    println!("SNR = {}", snr(&fit.forward)?);
    Ok(())
}

fn predict(model: PathBuf, x_new: PathBuf, level: f64, out: PathBuf) -> Result<(), Failure> {
    let fit = FitResult::from_json_str(&std::fs::read_to_string(model).map_err(Error::from)?)?;
    let profiles = read_csv_matrix(x_new)?;
    if profiles.ncols() != fit.d() {
        return Err(Error::DimensionMismatch {
            context: "profile columns".into(),
            expected: fit.d().to_string(),
            got: profiles.ncols().to_string(),
        }
        .into());
    }
    let theta = theta_with(&fit.inverse, &fit.forward, &fit.yty)?;
    let regions = profiles
        .row_iter()
        .map(|row| {
            prediction_region_with_theta(&fit, &theta, &row.transpose(), level)
                .map(|r| RegionJson::from(&r))
        })
        .collect::<invreg::Result<Vec<_>>>()?;
    std::fs::write(
        out,
        serde_json::to_string_pretty(&regions).map_err(Error::from)?,
    )
    .map_err(Error::from)?;
    println!("{} region(s) written", regions.len());
    Ok(())
}

fn simulate(config: PathBuf, out: PathBuf, reproducible: bool) -> Result<(), Failure> {
    let cfg = ExperimentConfig::from_json_file(config)?;
    let mut report = run_experiment(&cfg)?;
    if reproducible {
        report = report.without_timing();
    }
    report.write_csv(out)?;
    for r in &report.rows {
        println!(
            "{} L={} D={} N={} {}: coverage {:.4} (se {:.4}), failures {}",
            r.case, r.l, r.d, r.n, r.method, r.coverage, r.coverage_se, r.failures
        );
    }
    Ok(())
}

fn validate(suite: String, seed: u64) -> Result<(), Failure> {
    let suite: Suite = suite.parse()?;
    let checks = run_suite(suite, seed)?;
    for c in &checks {
        println!("{c}");
    }
    if checks.iter().all(|c| c.passed()) {
        Ok(())
    } else {
        Err(Failure::Oracle)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit {
            x,
            y,
            out,
            no_center,
        } => fit(x, y, out, no_center),
        Command::Predict {
            model,
            x_new,
            level,
            out,
        } => predict(model, x_new, level, out),
        Command::Simulate {
            config,
            out,
            reproducible,
        } => simulate(config, out, reproducible),
        Command::Validate { suite, seed } => validate(suite, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Oracle) => ExitCode::from(1),
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

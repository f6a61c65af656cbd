//! Command implementations behind the `tscorrect` binary.

pub mod config;
pub mod pipeline;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;
use tscorrect::datasets::{load_csv, save_csv, CsvSchema};
use tscorrect::metrics::evaluate;
use tscorrect::theory::{run_checks, TheoryReport};

pub use config::RunConfig;
use pipeline::{prepare, run_seed, summarize, Prepared, SeedReport, Summary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Runtime(tscorrect::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("theory verification failed: {0}")]
    TheoryFailed(String),
}

impl From<tscorrect::Error> for CliError {
    fn from(e: tscorrect::Error) -> Self {
        match e {
            tscorrect::Error::InvalidConfig(msg) => CliError::Config(msg),
            other => CliError::Runtime(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Io { .. } => 3,
            CliError::TheoryFailed(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Runtime(e) => e.kind(),
            CliError::Io { .. } => "IoError",
            CliError::TheoryFailed(_) => "TheoryVerificationFailed",
        }
    }

    /// One-line JSON object for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
        .to_string()
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(tscorrect::Error::from)?;
    text.push('\n');
    write_file(path, &text)
}

/// Creates the output directory and records the resolved configuration.
fn start_output(cfg: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.output_dir).map_err(|source| CliError::Io {
        path: cfg.output_dir.clone(),
        source,
    })?;
    write_json(&cfg.output_dir.join("config.echo.json"), cfg)
}

fn out(cfg: &RunConfig, name: String) -> PathBuf {
    cfg.output_dir.join(name)
}

fn per_seed<T: Send>(
    cfg: &RunConfig,
    f: impl Fn(u64) -> Result<T, CliError> + Sync,
) -> Result<Vec<T>, CliError> {
    cfg.seeds.par_iter().map(|&seed| f(seed)).collect()
}

fn prepared(cfg: &RunConfig) -> Result<Prepared, CliError> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    start_output(cfg)?;
    Ok(prep)
}

/// Writes the (optionally normalized) dataset to `series.csv`.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    cfg.validate()?;
    let series = pipeline::load_dataset(cfg)?;
    start_output(cfg)?;
    let path = cfg.output_dir.join("series.csv");
    save_csv(&series, &path)?;
    Ok(path)
}

pub fn cmd_fit_density(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let prep = prepared(cfg)?;
    let path = cfg.output_dir.join("density.json");
    prep.density.save(&path)?;
    Ok(path)
}

/// Writes `raw_<seed>.csv` for every seed.
pub fn cmd_generate(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let prep = prepared(cfg)?;
    let raws = per_seed(cfg, |seed| pipeline::generate(cfg, &prep, seed))?;
    let mut paths = Vec::new();
    for (seed, raw) in cfg.seeds.iter().zip(&raws) {
        let path = out(cfg, format!("raw_{seed}.csv"));
        save_csv(raw, &path)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Writes `raw_<seed>.csv` and `corrected_<seed>.csv`; returns the
/// per-seed correction diagnostics.
pub fn cmd_correct(cfg: &RunConfig) -> Result<Vec<(u64, pipeline::CorrectionSummary)>, CliError> {
    let prep = prepared(cfg)?;
    let results = per_seed(cfg, |seed| {
        Ok((pipeline::generate(cfg, &prep, seed)?, pipeline::correct(cfg, &prep, seed)?))
    })?;
    let mut diag = Vec::new();
    for (&seed, (raw, run)) in cfg.seeds.iter().zip(&results) {
        save_csv(raw, out(cfg, format!("raw_{seed}.csv")))?;
        save_csv(&run.corrected, out(cfg, format!("corrected_{seed}.csv")))?;
        diag.push((seed, pipeline::CorrectionSummary::from(run)));
    }
    Ok(diag)
}

fn write_seed_outputs(cfg: &RunConfig, o: &pipeline::SeedOutcome) -> Result<SeedReport, CliError> {
    let seed = o.seed;
    save_csv(&o.raw, out(cfg, format!("raw_{seed}.csv")))?;
    save_csv(&o.run.corrected, out(cfg, format!("corrected_{seed}.csv")))?;
    let report = o.report();
    write_json(&out(cfg, format!("report_{seed}.json")), &report)?;
    write_file(&out(cfg, format!("acf_{seed}.csv")), &o.acf_csv())?;
    write_file(&out(cfg, format!("pca_{seed}.csv")), &o.pca_csv())?;
    Ok(report)
}

/// Generates, corrects and evaluates each seed, writing per-seed reports
/// and plot sidecars.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Vec<SeedReport>, CliError> {
    let prep = prepared(cfg)?;
    let outcomes = per_seed(cfg, |seed| run_seed(cfg, &prep, seed))?;
    outcomes.iter().map(|o| write_seed_outputs(cfg, o)).collect()
}

/// Scores an externally generated CSV against the real target segment.
/// Its columns must carry the dataset's dimension names.
pub fn cmd_evaluate_file(cfg: &RunConfig, gen_path: &Path) -> Result<PathBuf, CliError> {
    let prep = prepared(cfg)?;
    let schema = CsvSchema {
        timestamp_column: None,
        value_columns: prep.target.dim_names().to_vec(),
    };
    let gen = load_csv(gen_path, &schema)?;
    if gen.len() != prep.target.len() {
        return Err(CliError::Config(format!(
            "{} has {} rows; the target segment has {}",
            gen_path.display(),
            gen.len(),
            prep.target.len()
        )));
    }
    let seed = cfg.seeds[0];
    let ev = evaluate(&prep.target, &gen, &cfg.metrics_config(seed))?;
    let stem = gen_path.file_stem().and_then(|s| s.to_str()).unwrap_or("gen");
    let path = out(cfg, format!("report_{stem}.json"));
    write_json(&path, &ev.report)?;
    write_file(&out(cfg, format!("acf_{stem}.csv")), &ev.acf_csv())?;
    write_file(&out(cfg, format!("pca_{stem}.csv")), &ev.pca_csv())?;
    Ok(path)
}

/// Full pipeline over all seeds plus `summary.json` (mean ± std per metric,
/// raw vs corrected).
pub fn cmd_compare(cfg: &RunConfig) -> Result<Summary, CliError> {
    let reports = cmd_evaluate(cfg)?;
    let summary = summarize(&reports);
    write_json(&cfg.output_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn cmd_verify_theory(seed: u64, out_dir: Option<&Path>) -> Result<TheoryReport, CliError> {
    let report = run_checks(seed)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        write_json(&dir.join("theory_report.json"), &report)?;
    }
    Ok(report)
}

/// The error to exit with when any theory check failed.
pub fn theory_failure(report: &TheoryReport) -> Option<CliError> {
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    (!failed.is_empty()).then(|| CliError::TheoryFailed(failed.join(", ")))
}

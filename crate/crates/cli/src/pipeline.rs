use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tscorrect::corrector::proposal_stream;
use tscorrect::datasets::{load_csv, simulate_lorenz};
use tscorrect::generators::{
    fit_var, rollout, spawn_external, BiasedSource, BootstrapSource, ProposalSource,
};
use tscorrect::metrics::{evaluate, Evaluation, MetricsReport};
use tscorrect::series::first_differences;
use tscorrect::{correct_series, CorrectionRun, DiffDensity, Normalizer, RandomStream, TimeSeries};

use crate::config::{DatasetSpec, Drift, RunConfig, SourceSpec};
use crate::CliError;

/// Loads the configured dataset, z-scored when `normalize` is set.
pub fn load_dataset(cfg: &RunConfig) -> Result<TimeSeries, CliError> {
    let series = match &cfg.dataset {
        DatasetSpec::Lorenz { params, noise_seed } => {
            let mut rng = RandomStream::new(*noise_seed);
            simulate_lorenz(params, Some(&mut rng))?
        }
        DatasetSpec::Csv { path, schema } => load_csv(path, schema)?,
    };
    if cfg.normalize {
        Ok(Normalizer::fit(&series)?.apply(&series)?)
    } else {
        Ok(series)
    }
}

/// Inputs shared by every seed of a run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub series: TimeSeries,
    /// The first `windowing.past` rows, row-major.
    pub warm_start: Vec<f64>,
    /// Rows after the warm start; generated series are aligned with it.
    pub target: TimeSeries,
    pub density: DiffDensity,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let series = load_dataset(cfg)?;
    prepare_series(cfg, series)
}

pub fn prepare_series(cfg: &RunConfig, series: TimeSeries) -> Result<Prepared, CliError> {
    let p = cfg.windowing.past;
    if series.len() < p + 2 {
        return Err(tscorrect::Error::SeriesTooShort {
            needed: p + 2,
            actual: series.len(),
        }
        .into());
    }
    let density = DiffDensity::fit(&series, &cfg.density)?;
    let warm_start = series.values()[..p * series.dims()].to_vec();
    let target = series.slice(p, series.len())?;
    Ok(Prepared {
        series,
        warm_start,
        target,
        density,
    })
}

fn column_std(cols: impl Iterator<Item = Vec<f64>>) -> Vec<f64> {
    cols.map(|c| {
        let n = c.len() as f64;
        let m = c.iter().sum::<f64>() / n;
        (c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt()
    })
    .collect()
}

fn resolve_drift(drift: &Drift, series: &TimeSeries) -> Vec<f64> {
    match drift {
        Drift::Absolute(v) => v.clone(),
        Drift::DiffStd(k) => {
            let diffs = first_differences(series);
            let d = series.dims();
            column_std((0..d).map(|j| diffs.iter().map(|v| v.0[j]).collect()))
                .into_iter()
                .map(|s| k * s)
                .collect()
        }
        Drift::SeriesStd(k) => column_std((0..series.dims()).map(|j| series.column(j)))
            .into_iter()
            .map(|s| k * s)
            .collect(),
    }
}

/// Instantiates a source fit to `series`. External processes are spawned
/// here, one per call.
pub fn build_source(
    spec: &SourceSpec,
    series: &TimeSeries,
    context_len: usize,
) -> Result<Box<dyn ProposalSource>, CliError> {
    Ok(match spec {
        SourceSpec::Var { order } => Box::new(fit_var(series, order.unwrap_or(context_len))?),
        SourceSpec::Bootstrap => Box::new(BootstrapSource::new(series)?),
        SourceSpec::Biased {
            inner,
            drift,
            noise_scale,
        } => {
            let inner = build_source(inner, series, context_len)?;
            Box::new(BiasedSource::new(inner, resolve_drift(drift, series), *noise_scale)?)
        }
        SourceSpec::External { config } => {
            Box::new(spawn_external(config, series.dims(), context_len)?)
        }
    })
}

fn check_context(source: &dyn ProposalSource, past: usize) -> Result<(), CliError> {
    if source.context_len() > past {
        return Err(CliError::Config(format!(
            "source needs {} context rows but windowing.past is {past}",
            source.context_len()
        )));
    }
    Ok(())
}

/// Uncorrected rollout from the warm start, drawing from the same proposal
/// stream the corrector uses for `seed`.
pub fn generate(cfg: &RunConfig, prep: &Prepared, seed: u64) -> Result<TimeSeries, CliError> {
    let mut source = build_source(&cfg.source, &prep.series, cfg.windowing.past)?;
    check_context(source.as_ref(), cfg.windowing.past)?;
    let values = rollout(
        source.as_mut(),
        &prep.warm_start,
        prep.target.len(),
        &mut proposal_stream(seed),
    )?;
    Ok(prep.target.with_values(values)?)
}

pub fn correct(cfg: &RunConfig, prep: &Prepared, seed: u64) -> Result<CorrectionRun, CliError> {
    let mut source = build_source(&cfg.source, &prep.series, cfg.windowing.past)?;
    check_context(source.as_ref(), cfg.windowing.past)?;
    Ok(correct_series(
        &prep.target,
        &prep.warm_start,
        source.as_mut(),
        &prep.density,
        &cfg.correction_config(seed),
    )?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionSummary {
    pub acceptance_rate: f64,
    pub proposals: usize,
    pub accepted: usize,
    pub forced_accepts: usize,
    pub mean_retries: f64,
}

impl From<&CorrectionRun> for CorrectionSummary {
    fn from(r: &CorrectionRun) -> Self {
        let n = r.retries_per_step.len().max(1) as f64;
        Self {
            acceptance_rate: r.acceptance_rate,
            proposals: r.proposals,
            accepted: r.accepted,
            forced_accepts: r.forced_accepts,
            mean_retries: r.retries_per_step.iter().sum::<usize>() as f64 / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub raw: MetricsReport,
    pub corrected: MetricsReport,
    pub correction: CorrectionSummary,
}

pub struct SeedOutcome {
    pub seed: u64,
    pub raw: TimeSeries,
    pub run: CorrectionRun,
    pub raw_eval: Evaluation,
    pub corrected_eval: Evaluation,
}

impl SeedOutcome {
    pub fn report(&self) -> SeedReport {
        SeedReport {
            seed: self.seed,
            raw: self.raw_eval.report.clone(),
            corrected: self.corrected_eval.report.clone(),
            correction: CorrectionSummary::from(&self.run),
        }
    }

    /// Columns `dim,lag,real,raw,corrected`.
    pub fn acf_csv(&self) -> String {
        let mut out = String::from("dim,lag,real,raw,corrected\n");
        for (r, c) in self.raw_eval.acf_curves.iter().zip(&self.corrected_eval.acf_curves) {
            for k in 0..r.real.len() {
                out.push_str(&format!("{},{},{},{},{}\n", r.dim, k + 1, r.real[k], r.gen[k], c.gen[k]));
            }
        }
        out
    }

    /// Columns `set,window,pc1,pc2`; both evaluations share the basis fit on
    /// the real windows.
    pub fn pca_csv(&self) -> String {
        let mut out = String::from("set,window,pc1,pc2\n");
        let sets = [
            ("real", &self.raw_eval.pca.real),
            ("raw", &self.raw_eval.pca.gen),
            ("corrected", &self.corrected_eval.pca.gen),
        ];
        for (name, pts) in sets {
            for (i, p) in pts.iter().enumerate() {
                out.push_str(&format!("{name},{i},{},{}\n", p[0], p[1]));
            }
        }
        out
    }
}

/// Generates, corrects and evaluates one seed.
pub fn run_seed(cfg: &RunConfig, prep: &Prepared, seed: u64) -> Result<SeedOutcome, CliError> {
    let raw = generate(cfg, prep, seed)?;
    let run = correct(cfg, prep, seed)?;
    let mcfg = cfg.metrics_config(seed);
    let raw_eval = evaluate(&prep.target, &raw, &mcfg)?;
    let corrected_eval = evaluate(&prep.target, &run.corrected, &mcfg)?;
    Ok(SeedOutcome {
        seed,
        raw,
        run,
        raw_eval,
        corrected_eval,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; zero for a single seed.
    pub std: f64,
    pub median: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std,
            median: median(xs),
        }
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub raw: Stat,
    pub corrected: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seeds: Vec<u64>,
    pub metrics: BTreeMap<String, Comparison>,
    pub acceptance_rate: Stat,
    pub forced_accepts: Stat,
}

pub const METRIC_NAMES: [&str; 6] = [
    "acf_error",
    "skew_error",
    "kurt_error",
    "r2",
    "discriminative",
    "predictive",
];

pub fn metric_value(r: &MetricsReport, name: &str) -> f64 {
    match name {
        "acf_error" => r.acf_error,
        "skew_error" => r.skew_error,
        "kurt_error" => r.kurt_error,
        "r2" => r.r2,
        "discriminative" => r.discriminative,
        "predictive" => r.predictive,
        other => panic!("unknown metric {other}"),
    }
}

pub fn summarize(reports: &[SeedReport]) -> Summary {
    let metrics = METRIC_NAMES
        .iter()
        .map(|&name| {
            let raw: Vec<f64> = reports.iter().map(|r| metric_value(&r.raw, name)).collect();
            let cor: Vec<f64> = reports.iter().map(|r| metric_value(&r.corrected, name)).collect();
            (
                name.to_string(),
                Comparison {
                    raw: Stat::of(&raw),
                    corrected: Stat::of(&cor),
                },
            )
        })
        .collect();
    let rates: Vec<f64> = reports.iter().map(|r| r.correction.acceptance_rate).collect();
    let forced: Vec<f64> = reports.iter().map(|r| r.correction.forced_accepts as f64).collect();
    Summary {
        seeds: reports.iter().map(|r| r.seed).collect(),
        metrics,
        acceptance_rate: Stat::of(&rates),
        forced_accepts: Stat::of(&forced),
    }
}

/// Plain-text table with one row per metric.
pub fn summary_table(s: &Summary) -> String {
    let mut out = format!("{:<16}{:>24}{:>24}\n", "metric", "raw", "corrected");
    for (name, c) in &s.metrics {
        out.push_str(&format!(
            "{:<16}{:>24}{:>24}\n",
            name,
            format!("{:.4} ± {:.4}", c.raw.mean, c.raw.std),
            format!("{:.4} ± {:.4}", c.corrected.mean, c.corrected.std),
        ));
    }
    out.push_str(&format!(
        "acceptance rate {:.4} ± {:.4}, forced accepts {:.1}\n",
        s.acceptance_rate.mean, s.acceptance_rate.std, s.forced_accepts.mean
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> RunConfig {
        let mut cfg = RunConfig::default();
        if let DatasetSpec::Lorenz { params, .. } = &mut cfg.dataset {
            params.steps = 400;
        }
        cfg.source = SourceSpec::Biased {
            inner: Box::new(SourceSpec::Var { order: Some(1) }),
            drift: Drift::DiffStd(0.1),
            noise_scale: 1.5,
        };
        cfg
    }

    #[test]
    fn stats() {
        let s = Stat::of(&[1.0, 2.0, 3.0, 10.0]);
        assert_eq!(s.mean, 4.0);
        assert_eq!(s.median, 2.5);
        assert!((s.std - (50.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(Stat::of(&[5.0]).std, 0.0);
    }

    #[test]
    fn drift_resolution() {
        let s = TimeSeries::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(resolve_drift(&Drift::Absolute(vec![1.0, 2.0]), &s), vec![1.0, 2.0]);
        // diffs: (1, 0), (2, 4) -> population std (0.5, 2)
        assert_eq!(resolve_drift(&Drift::DiffStd(2.0), &s), vec![1.0, 4.0]);
    }

    #[test]
    fn raw_and_corrected_align_with_target() {
        let cfg = small_config();
        let prep = prepare(&cfg).unwrap();
        assert_eq!(prep.target.len(), 400 - 16);
        let out = run_seed(&cfg, &prep, 3).unwrap();
        assert_eq!(out.raw.len(), prep.target.len());
        assert_eq!(out.run.corrected.len(), prep.target.len());
        assert_eq!(out.raw.dim_names(), prep.target.dim_names());
        let report = out.report();
        assert_eq!(report.raw.config.seed, 3);
        assert!(out.acf_csv().starts_with("dim,lag,real,raw,corrected\nx,1,"));
        let pca_rows = out.pca_csv().lines().count();
        assert_eq!(pca_rows, 1 + 3 * out.raw_eval.pca.real.len());
    }

    #[test]
    fn var_order_beyond_window_is_rejected() {
        let mut cfg = small_config();
        cfg.source = SourceSpec::Var { order: Some(20) };
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }
}

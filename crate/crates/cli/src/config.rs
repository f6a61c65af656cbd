use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tscorrect::datasets::{CsvSchema, LorenzConfig, DEFAULT_FUTURE, DEFAULT_PAST};
use tscorrect::generators::ExternalSourceConfig;
use tscorrect::metrics::{DiscriminativeConfig, MetricsConfig, PredictiveConfig};
use tscorrect::{CorrectionConfig, DensityConfig};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DatasetSpec {
    Lorenz {
        #[serde(flatten)]
        params: LorenzConfig,
        /// Seed of the observation-noise stream.
        #[serde(default)]
        noise_seed: u64,
    },
    Csv {
        path: PathBuf,
        #[serde(flatten)]
        schema: CsvSchema,
    },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Lorenz {
            params: LorenzConfig::default(),
            noise_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Windowing {
    /// Conditioning window; also the warm-start length.
    pub past: usize,
    pub future: usize,
    /// Stride between evaluation windows.
    pub stride: usize,
}

impl Default for Windowing {
    fn default() -> Self {
        Self {
            past: DEFAULT_PAST,
            future: DEFAULT_FUTURE,
            stride: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Drift {
    /// Per-dimension offset added to every proposal.
    Absolute(Vec<f64>),
    /// Multiple of the per-dimension std of the real first differences.
    DiffStd(f64),
    /// Multiple of the per-dimension std of the real series.
    SeriesStd(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SourceSpec {
    /// VAR model fit to the real series; order defaults to the window length.
    Var {
        #[serde(default)]
        order: Option<usize>,
    },
    Bootstrap,
    Biased {
        inner: Box<SourceSpec>,
        drift: Drift,
        #[serde(default = "one")]
        noise_scale: f64,
    },
    External {
        #[serde(flatten)]
        config: ExternalSourceConfig,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec::Var { order: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSettings {
    pub lags: usize,
    pub discriminative: DiscriminativeConfig,
    pub predictive: PredictiveConfig,
}

impl Default for MetricsSettings {
    fn default() -> Self {
        let m = MetricsConfig::default();
        Self {
            lags: m.lags,
            discriminative: m.discriminative,
            predictive: m.predictive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    /// Z-score every dimension before anything else.
    pub normalize: bool,
    pub windowing: Windowing,
    pub density: DensityConfig,
    pub source: SourceSpec,
    /// `seed` is replaced by each entry of `seeds`.
    pub correction: CorrectionConfig,
    pub metrics: MetricsSettings,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::default(),
            normalize: true,
            windowing: Windowing::default(),
            density: DensityConfig::default(),
            source: SourceSpec::default(),
            correction: CorrectionConfig::default(),
            metrics: MetricsSettings::default(),
            seeds: vec![0],
            output_dir: PathBuf::from("out"),
        }
    }
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        // Relative dataset paths are resolved against the config file.
        if let DatasetSpec::Csv { path: data, .. } = &mut cfg.dataset {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(config_error("seeds must not be empty"));
        }
        let w = &self.windowing;
        if w.past == 0 || w.future == 0 || w.stride == 0 {
            return Err(config_error("windowing past, future and stride must be positive"));
        }
        match &self.dataset {
            DatasetSpec::Lorenz { params, .. } => params.validate()?,
            DatasetSpec::Csv { path, schema } => {
                if !path.is_file() {
                    return Err(config_error(format!("dataset file {} not found", path.display())));
                }
                if schema.value_columns.is_empty() {
                    return Err(config_error("csv schema lists no value columns"));
                }
            }
        }
        validate_source(&self.source, w.past)?;
        self.correction.validate()?;
        self.metrics_config(0).validate()?;
        if self.density.bins_per_dim == 0 {
            return Err(config_error("density bins_per_dim must be positive"));
        }
        Ok(())
    }

    pub fn metrics_config(&self, seed: u64) -> MetricsConfig {
        MetricsConfig {
            lags: self.metrics.lags,
            window_past: self.windowing.past,
            window_future: self.windowing.future,
            window_stride: self.windowing.stride,
            discriminative: self.metrics.discriminative.clone(),
            predictive: self.metrics.predictive.clone(),
            seed,
        }
    }

    pub fn correction_config(&self, seed: u64) -> CorrectionConfig {
        CorrectionConfig {
            seed,
            ..self.correction.clone()
        }
    }
}

fn validate_source(s: &SourceSpec, past: usize) -> Result<(), CliError> {
    match s {
        SourceSpec::Var { order: Some(0) } => Err(config_error("var order must be positive")),
        SourceSpec::Var { order: Some(o) } if *o > past => Err(config_error(format!(
            "var order {o} exceeds the conditioning window ({past})"
        ))),
        SourceSpec::Var { .. } | SourceSpec::Bootstrap => Ok(()),
        SourceSpec::Biased {
            inner,
            drift,
            noise_scale,
        } => {
            if !(noise_scale.is_finite() && *noise_scale >= 1.0) {
                return Err(config_error("noise_scale must be finite and at least 1"));
            }
            let finite = match drift {
                Drift::Absolute(v) => v.iter().all(|x| x.is_finite()),
                Drift::DiffStd(k) | Drift::SeriesStd(k) => k.is_finite(),
            };
            if !finite {
                return Err(config_error("drift must be finite"));
            }
            validate_source(inner, past)
        }
        SourceSpec::External { config } => Ok(config.validate()?),
    }
}

//! Fidelity metrics comparing a real series with a generated one.
//!
//! [`evaluate`] bundles the six scalar scores together with plot data
//! (ACF curves and a PCA projection of windows).

pub mod discriminative;
pub mod pca;
pub mod predictive;
pub mod stats;

use serde::{Deserialize, Serialize};

pub use discriminative::{discriminative_score, gradient_descent, DiscriminativeConfig};
pub use pca::{pca_projection, PcaProjection};
pub use predictive::{predictive_score, PredictiveConfig};
pub use stats::{
    acf, acf_error, acf_error_per_dim, effective_lags, kurtosis, kurtosis_error,
    kurtosis_error_per_dim, r2_per_dim, r2_score, skewness, skewness_error,
    skewness_error_per_dim,
};

use crate::datasets::{make_windows, DEFAULT_FUTURE, DEFAULT_PAST};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Requested ACF lags; capped at a quarter of the series length.
    pub lags: usize,
    pub window_past: usize,
    pub window_future: usize,
    pub window_stride: usize,
    pub discriminative: DiscriminativeConfig,
    pub predictive: PredictiveConfig,
    pub seed: u64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            lags: 32,
            window_past: DEFAULT_PAST,
            window_future: DEFAULT_FUTURE,
            window_stride: 4,
            discriminative: DiscriminativeConfig::default(),
            predictive: PredictiveConfig::default(),
            seed: 0,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lags == 0 {
            return Err(Error::InvalidConfig("lags must be positive".into()));
        }
        if self.window_past + self.window_future == 0 || self.window_stride == 0 {
            return Err(Error::InvalidConfig("window length and stride must be positive".into()));
        }
        if self.discriminative.epochs == 0 || !(self.discriminative.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("classifier needs positive epochs and learning rate".into()));
        }
        if !(self.predictive.ridge >= 0.0) {
            return Err(Error::InvalidConfig("ridge must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerDimMetrics {
    pub acf_error: Vec<f64>,
    pub skew_error: Vec<f64>,
    pub kurt_error: Vec<f64>,
    pub r2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub acf_error: f64,
    pub skew_error: f64,
    pub kurt_error: f64,
    pub r2: f64,
    pub discriminative: f64,
    pub predictive: f64,
    /// Predictive score of a model trained on the real series itself.
    pub predictive_baseline: f64,
    pub per_dim: PerDimMetrics,
    /// Lags actually used after the length cap.
    pub lags_used: usize,
    pub config: MetricsConfig,
}

/// Autocorrelation curves of one dimension, lags `1..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfCurve {
    pub dim: String,
    pub real: Vec<f64>,
    pub gen: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub acf_curves: Vec<AcfCurve>,
    pub pca: PcaProjection,
}

impl Evaluation {
    /// CSV with columns `dim,lag,real,gen`.
    pub fn acf_csv(&self) -> String {
        let mut out = String::from("dim,lag,real,gen\n");
        for c in &self.acf_curves {
            for (k, (r, g)) in c.real.iter().zip(&c.gen).enumerate() {
                out.push_str(&format!("{},{},{},{}\n", c.dim, k + 1, r, g));
            }
        }
        out
    }

    /// CSV with columns `set,window,pc1,pc2`.
    pub fn pca_csv(&self) -> String {
        let mut out = String::from("set,window,pc1,pc2\n");
        for (set, pts) in [("real", &self.pca.real), ("gen", &self.pca.gen)] {
            for (i, p) in pts.iter().enumerate() {
                out.push_str(&format!("{set},{i},{},{}\n", p[0], p[1]));
            }
        }
        out
    }
}

fn mean(xs: &[f64]) -> f64 {
    stats::mean(xs)
}

/// Computes all metrics for an index-aligned pair of series.
pub fn evaluate(real: &TimeSeries, gen: &TimeSeries, cfg: &MetricsConfig) -> Result<Evaluation> {
    cfg.validate()?;
    if real.dims() != gen.dims() {
        return Err(Error::DimensionMismatch {
            expected: real.dims(),
            actual: gen.dims(),
        });
    }
    let lags = effective_lags(cfg.lags, real.len().min(gen.len()));

    let mut acf_curves = Vec::with_capacity(real.dims());
    let mut acf_err = Vec::with_capacity(real.dims());
    for (j, name) in real.dim_names().iter().enumerate() {
        let r = acf(&real.column(j), lags)?;
        let g = acf(&gen.column(j), lags)?;
        acf_err.push(stats::acf_gap(&r, &g));
        acf_curves.push(AcfCurve {
            dim: name.clone(),
            real: r,
            gen: g,
        });
    }
    let skew = skewness_error_per_dim(real, gen)?;
    let kurt = kurtosis_error_per_dim(real, gen)?;
    let r2 = r2_per_dim(real, gen)?;

    let real_w = make_windows(real, cfg.window_past, cfg.window_future, cfg.window_stride)?;
    let gen_w = make_windows(gen, cfg.window_past, cfg.window_future, cfg.window_stride)?;
    let ds = discriminative_score(&real_w, &gen_w, &cfg.discriminative, cfg.seed)?;
    let ps = predictive_score(real, gen, &cfg.predictive)?;
    let baseline = predictive_score(real, real, &cfg.predictive)?;
    let pca = pca_projection(&real_w, &gen_w)?;

    Ok(Evaluation {
        report: MetricsReport {
            acf_error: mean(&acf_err),
            skew_error: mean(&skew),
            kurt_error: mean(&kurt),
            r2: mean(&r2),
            discriminative: ds,
            predictive: ps,
            predictive_baseline: baseline,
            per_dim: PerDimMetrics {
                acf_error: acf_err,
                skew_error: skew,
                kurt_error: kurt,
                r2,
            },
            lags_used: lags,
            config: cfg.clone(),
        },
        acf_curves,
        pca,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;
    use proptest::prelude::*;

    fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = RandomStream::new(seed);
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                x = phi * x + rng.standard_normal();
                x
            })
            .collect()
    }

    fn two_dim(seed: u64, n: usize) -> TimeSeries {
        let a = ar1(0.9, n, seed);
        let b = ar1(0.3, n, seed + 100);
        let rows: Vec<Vec<f64>> = a.iter().zip(&b).map(|(x, y)| vec![*x, *y]).collect();
        TimeSeries::from_rows(&rows).unwrap()
    }

    #[test]
    fn ar1_acf_matches_analytic() {
        let r = acf(&ar1(0.5, 100_000, 1), 5).unwrap();
        for (k, v) in r.iter().enumerate() {
            let expect = 0.5f64.powi(k as i32 + 1);
            assert!((v - expect).abs() < 0.02, "lag {}: {v} vs {expect}", k + 1);
        }
    }

    #[test]
    fn iid_acf_near_zero() {
        let r = acf(&ar1(0.0, 100_000, 2), 32).unwrap();
        assert!(r.iter().all(|v| v.abs() < 0.02), "{r:?}");
    }

    #[test]
    fn exponential_skewness() {
        let mut rng = RandomStream::new(3);
        let exp: Vec<f64> = (0..1_000_000).map(|_| -(1.0 - rng.uniform()).ln()).collect();
        let sym: Vec<f64> = (0..1_000_000).map(|_| rng.standard_normal()).collect();
        let e = skewness_error(
            &TimeSeries::from_column(&exp).unwrap(),
            &TimeSeries::from_column(&sym).unwrap(),
        )
        .unwrap();
        assert!((e - 2.0).abs() < 0.05, "{e}");
    }

    #[test]
    fn gaussian_kurtosis_is_three() {
        let mut rng = RandomStream::new(4);
        let xs: Vec<f64> = (0..1_000_000).map(|_| rng.standard_normal()).collect();
        let k = kurtosis(&xs).unwrap();
        assert!((k - 3.0).abs() < 0.05, "{k}");
    }

    #[test]
    fn moments_scale_invariant() {
        let mut rng = RandomStream::new(5);
        let xs: Vec<f64> = (0..100_000).map(|_| rng.standard_normal()).collect();
        let scaled: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let a = TimeSeries::from_column(&xs).unwrap();
        let b = TimeSeries::from_column(&scaled).unwrap();
        assert!(skewness_error(&a, &b).unwrap() < 1e-12);
        assert!(kurtosis_error(&a, &b).unwrap() < 1e-12);
    }

    #[test]
    fn evaluate_identity() {
        let s = two_dim(7, 1500);
        let ev = evaluate(&s, &s, &MetricsConfig::default()).unwrap();
        let r = &ev.report;
        assert_eq!(r.acf_error, 0.0);
        assert_eq!(r.skew_error, 0.0);
        assert_eq!(r.kurt_error, 0.0);
        assert_eq!(r.r2, 1.0);
        assert!(r.discriminative <= 0.1, "{}", r.discriminative);
        assert_eq!(r.predictive, r.predictive_baseline);
        assert_eq!(ev.pca.real, ev.pca.gen);
        assert_eq!(r.lags_used, 32);
        assert_eq!(ev.acf_curves.len(), 2);
    }

    #[test]
    fn evaluate_report_invariants() {
        let real = two_dim(8, 1200);
        let gen = two_dim(9, 1200);
        let ev = evaluate(&real, &gen, &MetricsConfig::default()).unwrap();
        let r = &ev.report;
        assert!(r.acf_error >= 0.0 && r.skew_error >= 0.0 && r.kurt_error >= 0.0);
        assert!(r.r2 <= 1.0);
        assert!((0.0..=0.5).contains(&r.discriminative));
        assert!(r.predictive >= 0.0);
        let json = serde_json::to_string(r).unwrap();
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(&back, r);
        assert!(ev.acf_csv().starts_with("dim,lag,real,gen\nx0,1,"));
        assert_eq!(ev.pca_csv().lines().count(), 1 + ev.pca.real.len() + ev.pca.gen.len());
    }

    #[test]
    fn evaluate_rejects_bad_config() {
        let s = two_dim(1, 300);
        let cfg = MetricsConfig {
            lags: 0,
            ..MetricsConfig::default()
        };
        assert!(matches!(evaluate(&s, &s, &cfg), Err(Error::InvalidConfig(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn symmetric_errors(seed_a in 0u64..1000, seed_b in 0u64..1000) {
            let a = two_dim(seed_a, 200);
            let b = two_dim(seed_b + 1000, 200);
            prop_assert_eq!(acf_error(&a, &b, 10).unwrap(), acf_error(&b, &a, 10).unwrap());
            prop_assert_eq!(skewness_error(&a, &b).unwrap(), skewness_error(&b, &a).unwrap());
            prop_assert_eq!(kurtosis_error(&a, &b).unwrap(), kurtosis_error(&b, &a).unwrap());
        }

        #[test]
        fn moment_errors_affine_invariant(
            seed in 0u64..1000,
            scale in 0.1f64..10.0,
            shift in -50.0f64..50.0,
        ) {
            let a = two_dim(seed, 300);
            let b = two_dim(seed + 7, 300);
            let map = |s: &TimeSeries| s.with_values(s.values().iter().map(|v| scale * v + shift).collect()).unwrap();
            let (a2, b2) = (map(&a), map(&b));
            prop_assert!((skewness_error(&a, &b).unwrap() - skewness_error(&a2, &b2).unwrap()).abs() < 1e-8);
            prop_assert!((kurtosis_error(&a, &b).unwrap() - kurtosis_error(&a2, &b2).unwrap()).abs() < 1e-8);
        }

        #[test]
        fn r2_shift_invariant(seed in 0u64..1000, shift in -100.0f64..100.0) {
            let a = two_dim(seed, 200);
            let b = two_dim(seed + 3, 200);
            let map = |s: &TimeSeries| s.with_values(s.values().iter().map(|v| v + shift).collect()).unwrap();
            prop_assert!((r2_score(&a, &b).unwrap() - r2_score(&map(&a), &map(&b)).unwrap()).abs() < 1e-9);
        }
    }
}

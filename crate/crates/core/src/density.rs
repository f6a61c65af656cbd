//! Target density over first-order differences.
//!
//! The joint density of a d-dimensional difference vector is modeled as the
//! product of per-dimension marginals, estimated either with equal-width
//! histograms or with Gaussian kernels. Evaluations below `epsilon_floor`
//! (including queries outside the histogram support) return the floor so that
//! acceptance ratios stay finite.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{first_differences, DiffVector, TimeSeries};

pub const FORMAT_VERSION: u32 = 1;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// Kernel contributions beyond this many bandwidths are below 1e-14 of the
/// peak and are skipped.
const KERNEL_CUTOFF: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    HistogramProduct,
    #[default]
    GaussianKde,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum BandwidthRule {
    /// h_i = 1.06 · σ_i · n^(-1/5), population σ.
    #[default]
    Silverman,
    /// Silverman's rule multiplied by a constant factor.
    ScaledSilverman(f64),
    /// Explicit per-dimension bandwidths.
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityConfig {
    pub kind: DensityKind,
    pub bins_per_dim: usize,
    pub bandwidth_rule: BandwidthRule,
    pub epsilon_floor: f64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            kind: DensityKind::GaussianKde,
            bins_per_dim: 16,
            bandwidth_rule: BandwidthRule::Silverman,
            epsilon_floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DensityModel {
    HistogramProduct {
        /// `bins + 1` ascending edges per dimension.
        edges: Vec<Vec<f64>>,
        counts: Vec<Vec<u64>>,
    },
    GaussianKde {
        /// Per-dimension samples, sorted ascending.
        samples: Vec<Vec<f64>>,
        bandwidths: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffDensity {
    pub version: u32,
    pub model: DensityModel,
    pub total_count: usize,
    pub epsilon_floor: f64,
}

impl DiffDensity {
    /// Fits the density to the first differences of `s`.
    pub fn fit(s: &TimeSeries, cfg: &DensityConfig) -> Result<Self> {
        if s.len() < 3 {
            return Err(Error::SeriesTooShort {
                needed: 3,
                actual: s.len(),
            });
        }
        Self::fit_diffs(&first_differences(s), cfg)
    }

    /// Fits directly to a set of difference vectors (at least two).
    pub fn fit_diffs(diffs: &[DiffVector], cfg: &DensityConfig) -> Result<Self> {
        if diffs.len() < 2 {
            return Err(Error::SeriesTooShort {
                needed: 3,
                actual: diffs.len() + 1,
            });
        }
        if !(cfg.epsilon_floor > 0.0) {
            return Err(Error::InvalidConfig("epsilon_floor must be positive".into()));
        }
        let dims = diffs[0].len();
        if let Some(bad) = diffs.iter().find(|d| d.len() != dims) {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: bad.len(),
            });
        }
        let columns: Vec<Vec<f64>> = (0..dims)
            .map(|j| diffs.iter().map(|d| d.0[j]).collect())
            .collect();
        for (j, col) in columns.iter().enumerate() {
            let (lo, hi) = min_max(col);
            if !(hi > lo) {
                return Err(Error::ZeroRange { dim: j });
            }
        }
        let n = diffs.len();
        let model = match cfg.kind {
            DensityKind::HistogramProduct => {
                if cfg.bins_per_dim == 0 {
                    return Err(Error::InvalidConfig("bins_per_dim must be positive".into()));
                }
                let (edges, counts) = columns
                    .iter()
                    .map(|col| histogram(col, cfg.bins_per_dim))
                    .unzip();
                DensityModel::HistogramProduct { edges, counts }
            }
            DensityKind::GaussianKde => {
                let bandwidths: Vec<f64> = match &cfg.bandwidth_rule {
                    BandwidthRule::Silverman => columns.iter().map(|c| silverman(c)).collect(),
                    BandwidthRule::ScaledSilverman(f) => {
                        columns.iter().map(|c| f * silverman(c)).collect()
                    }
                    BandwidthRule::Fixed(h) => {
                        if h.len() != dims {
                            return Err(Error::DimensionMismatch {
                                expected: dims,
                                actual: h.len(),
                            });
                        }
                        h.clone()
                    }
                };
                if bandwidths.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
                    return Err(Error::InvalidConfig("bandwidths must be positive".into()));
                }
                let samples = columns
                    .into_iter()
                    .map(|mut c| {
                        c.sort_by(f64::total_cmp);
                        c
                    })
                    .collect();
                DensityModel::GaussianKde {
                    samples,
                    bandwidths,
                }
            }
        };
        Ok(Self {
            version: FORMAT_VERSION,
            model,
            total_count: n,
            epsilon_floor: cfg.epsilon_floor,
        })
    }

    pub fn dims(&self) -> usize {
        match &self.model {
            DensityModel::HistogramProduct { edges, .. } => edges.len(),
            DensityModel::GaussianKde { bandwidths, .. } => bandwidths.len(),
        }
    }

    /// π(θ), floored at `epsilon_floor`.
    pub fn density(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: theta.len(),
            });
        }
        let n = self.total_count as f64;
        let raw: f64 = match &self.model {
            DensityModel::HistogramProduct { edges, counts } => theta
                .iter()
                .zip(edges.iter().zip(counts))
                .map(|(&x, (e, c))| match bin_of(e, x) {
                    Some(b) => c[b] as f64 / (n * (e[b + 1] - e[b])),
                    None => 0.0,
                })
                .product(),
            DensityModel::GaussianKde {
                samples,
                bandwidths,
            } => theta
                .iter()
                .zip(samples.iter().zip(bandwidths))
                .map(|(&x, (s, &h))| kde_1d(s, h, x))
                .product(),
        };
        Ok(if raw.is_finite() {
            raw.max(self.epsilon_floor)
        } else {
            self.epsilon_floor
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: DiffDensity = serde_json::from_str(text)?;
        if d.version != FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported density format version {}",
                d.version
            )));
        }
        Ok(d)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn silverman(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    1.06 * var.sqrt() * n.powf(-0.2)
}

fn histogram(xs: &[f64], bins: usize) -> (Vec<f64>, Vec<u64>) {
    let (lo, hi) = min_max(xs);
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    edges[bins] = hi;
    let mut counts = vec![0u64; bins];
    for &x in xs {
        if let Some(b) = bin_of(&edges, x) {
            counts[b] += 1;
        }
    }
    (edges, counts)
}

/// Bins are half-open except the last, which includes its upper edge.
fn bin_of(edges: &[f64], x: f64) -> Option<usize> {
    let bins = edges.len() - 1;
    if !(x >= edges[0] && x <= edges[bins]) {
        return None;
    }
    let b = edges.partition_point(|&e| e <= x);
    Some(b.saturating_sub(1).min(bins - 1))
}

fn kde_1d(sorted: &[f64], h: f64, x: f64) -> f64 {
    let lo = sorted.partition_point(|&s| s < x - KERNEL_CUTOFF * h);
    let hi = sorted.partition_point(|&s| s <= x + KERNEL_CUTOFF * h);
    let sum: f64 = sorted[lo..hi]
        .iter()
        .map(|&s| {
            let z = (x - s) / h;
            (-0.5 * z * z).exp()
        })
        .sum();
    sum * INV_SQRT_2PI / (h * sorted.len() as f64)
}

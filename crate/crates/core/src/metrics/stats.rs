//! Per-dimension statistics: autocorrelation, standardized moments, R².

use crate::error::{Error, Result};
use crate::series::TimeSeries;

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population central moment of order `k`.
fn central_moment(xs: &[f64], m: f64, k: i32) -> f64 {
    xs.iter().map(|x| (x - m).powi(k)).sum::<f64>() / xs.len() as f64
}

/// Biased sample autocorrelation at lags `1..=max_lag`.
pub fn acf(xs: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag == 0 || xs.len() <= max_lag {
        return Err(Error::TooFewPoints {
            needed: max_lag.max(1),
            actual: xs.len(),
        });
    }
    let m = mean(xs);
    let centered: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let denom: f64 = centered.iter().map(|c| c * c).sum();
    if !(denom > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok((1..=max_lag)
        .map(|k| {
            centered
                .iter()
                .zip(&centered[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / denom
        })
        .collect())
}

/// `E[(x-μ)^3] / σ^3`, population convention.
pub fn skewness(xs: &[f64]) -> Result<f64> {
    let m = mean(xs);
    let var = central_moment(xs, m, 2);
    if !(var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok(central_moment(xs, m, 3) / var.powf(1.5))
}

/// Raw (non-excess) kurtosis `E[(x-μ)^4] / σ^4`; Gaussian data gives 3.
pub fn kurtosis(xs: &[f64]) -> Result<f64> {
    let m = mean(xs);
    let var = central_moment(xs, m, 2);
    if !(var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok(central_moment(xs, m, 4) / (var * var))
}

/// Number of lags actually used: `requested`, capped at `⌊T/4⌋`, at least 1.
pub fn effective_lags(requested: usize, len: usize) -> usize {
    requested.min(len / 4).max(1)
}

fn check_dims(real: &TimeSeries, gen: &TimeSeries) -> Result<()> {
    if real.dims() != gen.dims() {
        return Err(Error::DimensionMismatch {
            expected: real.dims(),
            actual: gen.dims(),
        });
    }
    Ok(())
}

fn check_aligned(real: &TimeSeries, gen: &TimeSeries) -> Result<()> {
    check_dims(real, gen)?;
    if real.len() != gen.len() {
        return Err(Error::InvalidSeries(format!(
            "series lengths differ: {} vs {}",
            real.len(),
            gen.len()
        )));
    }
    Ok(())
}

/// Mean absolute gap between two autocorrelation curves of equal length.
pub fn acf_gap(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Per-dimension `(1/K) Σ_k |ACF_real(k) - ACF_gen(k)|`.
pub fn acf_error_per_dim(real: &TimeSeries, gen: &TimeSeries, lags: usize) -> Result<Vec<f64>> {
    check_dims(real, gen)?;
    (0..real.dims())
        .map(|j| Ok(acf_gap(&acf(&real.column(j), lags)?, &acf(&gen.column(j), lags)?)))
        .collect()
}

/// ACF error averaged over dimensions.
pub fn acf_error(real: &TimeSeries, gen: &TimeSeries, lags: usize) -> Result<f64> {
    Ok(mean(&acf_error_per_dim(real, gen, lags)?))
}

fn moment_error_per_dim(
    real: &TimeSeries,
    gen: &TimeSeries,
    stat: fn(&[f64]) -> Result<f64>,
) -> Result<Vec<f64>> {
    check_dims(real, gen)?;
    (0..real.dims())
        .map(|j| Ok((stat(&real.column(j))? - stat(&gen.column(j))?).abs()))
        .collect()
}

pub fn skewness_error_per_dim(real: &TimeSeries, gen: &TimeSeries) -> Result<Vec<f64>> {
    moment_error_per_dim(real, gen, skewness)
}

pub fn kurtosis_error_per_dim(real: &TimeSeries, gen: &TimeSeries) -> Result<Vec<f64>> {
    moment_error_per_dim(real, gen, kurtosis)
}

pub fn skewness_error(real: &TimeSeries, gen: &TimeSeries) -> Result<f64> {
    Ok(mean(&skewness_error_per_dim(real, gen)?))
}

pub fn kurtosis_error(real: &TimeSeries, gen: &TimeSeries) -> Result<f64> {
    Ok(mean(&kurtosis_error_per_dim(real, gen)?))
}

/// Per-dimension `1 - SS_res / SS_tot` with `real` as the target and `gen`
/// as the index-aligned prediction.
pub fn r2_per_dim(real: &TimeSeries, gen: &TimeSeries) -> Result<Vec<f64>> {
    check_aligned(real, gen)?;
    (0..real.dims())
        .map(|j| {
            let y = real.column(j);
            let yhat = gen.column(j);
            let m = mean(&y);
            let ss_tot: f64 = y.iter().map(|v| (v - m).powi(2)).sum();
            if !(ss_tot > 0.0) {
                return Err(Error::ZeroVariance);
            }
            let ss_res: f64 = y.iter().zip(&yhat).map(|(a, b)| (a - b).powi(2)).sum();
            Ok(1.0 - ss_res / ss_tot)
        })
        .collect()
}

pub fn r2_score(real: &TimeSeries, gen: &TimeSeries) -> Result<f64> {
    Ok(mean(&r2_per_dim(real, gen)?))
}

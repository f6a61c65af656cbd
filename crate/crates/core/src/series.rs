//! Time-series payload types, differencing and standardization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A T×d matrix of finite observations, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    dims: usize,
    dim_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamps: Option<Vec<String>>,
}

impl TimeSeries {
    /// Builds a series from rows, naming dimensions `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dims = rows.first().map(Vec::len).unwrap_or(0);
        let names = default_names(dims);
        let mut values = Vec::with_capacity(rows.len() * dims);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dims {
                return Err(Error::InvalidSeries(format!(
                    "row {i} has {} columns, expected {dims}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(values, dims, names, None)
    }

    /// Builds a 1-d series.
    pub fn from_column(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec(), 1, default_names(1), None)
    }

    pub fn new(
        values: Vec<f64>,
        dims: usize,
        dim_names: Vec<String>,
        timestamps: Option<Vec<String>>,
    ) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidSeries("series needs at least one dimension".into()));
        }
        if values.len() % dims != 0 {
            return Err(Error::InvalidSeries(format!(
                "{} values do not fill rows of width {dims}",
                values.len()
            )));
        }
        let len = values.len() / dims;
        if len < 2 {
            return Err(Error::SeriesTooShort {
                needed: 2,
                actual: len,
            });
        }
        if dim_names.len() != dims {
            return Err(Error::InvalidSeries(format!(
                "{} names for {dims} dimensions",
                dim_names.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                row: pos / dims,
                column: dim_names[pos % dims].clone(),
            });
        }
        if let Some(ts) = &timestamps {
            if ts.len() != len {
                return Err(Error::InvalidSeries(format!(
                    "{} timestamps for {len} rows",
                    ts.len()
                )));
            }
            if !strictly_increasing(ts) {
                return Err(Error::InvalidSeries("timestamps are not strictly increasing".into()));
            }
        }
        Ok(Self {
            values,
            dims,
            dim_names,
            timestamps,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn dim_names(&self) -> &[String] {
        &self.dim_names
    }

    pub fn timestamps(&self) -> Option<&[String]> {
        self.timestamps.as_deref()
    }

    /// Row-major backing storage.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.dims..(t + 1) * self.dims]
    }

    pub fn rows(&self) -> impl DoubleEndedIterator<Item = &[f64]> + ExactSizeIterator + '_ {
        self.values.chunks_exact(self.dims)
    }

    /// Copy of dimension `j` as a column vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Rows `start..end` as a new series (timestamps sliced alongside).
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if end > self.len() || start > end {
            return Err(Error::InvalidSeries(format!(
                "slice {start}..{end} out of bounds for length {}",
                self.len()
            )));
        }
        Self::new(
            self.values[start * self.dims..end * self.dims].to_vec(),
            self.dims,
            self.dim_names.clone(),
            self.timestamps.as_ref().map(|ts| ts[start..end].to_vec()),
        )
    }

    /// Same shape and names, new values. Timestamps are dropped.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(values, self.dims, self.dim_names.clone(), None)
    }

    pub fn reversed(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for row in self.rows().rev() {
            values.extend_from_slice(row);
        }
        Self {
            values,
            dims: self.dims,
            dim_names: self.dim_names.clone(),
            timestamps: None,
        }
    }
}

pub(crate) fn default_names(dims: usize) -> Vec<String> {
    (0..dims).map(|i| format!("x{i}")).collect()
}

fn strictly_increasing(ts: &[String]) -> bool {
    let numeric: Option<Vec<f64>> = ts.iter().map(|s| s.trim().parse::<f64>().ok()).collect();
    match numeric {
        Some(nums) => nums.windows(2).all(|w| w[0] < w[1]),
        None => ts.windows(2).all(|w| w[0] < w[1]),
    }
}

/// Per-step change `x_t - x_{t-1}` of a d-dimensional series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiffVector(pub Vec<f64>);

impl DiffVector {
    pub fn between(next: &[f64], prev: &[f64]) -> Self {
        DiffVector(next.iter().zip(prev).map(|(a, b)| a - b).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// First-order differences; element k is `s[k+1] - s[k]`.
pub fn first_differences(s: &TimeSeries) -> Vec<DiffVector> {
    (1..s.len())
        .map(|t| DiffVector::between(s.row(t), s.row(t - 1)))
        .collect()
}

/// Inverse of [`first_differences`]: integrates `diffs` starting from `x0`.
pub fn cumulative_sum(diffs: &[DiffVector], x0: &[f64]) -> Result<TimeSeries> {
    let dims = x0.len();
    let mut values = Vec::with_capacity((diffs.len() + 1) * dims);
    values.extend_from_slice(x0);
    let mut cur = x0.to_vec();
    for d in diffs {
        if d.len() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: d.len(),
            });
        }
        for (c, delta) in cur.iter_mut().zip(&d.0) {
            *c += delta;
        }
        values.extend_from_slice(&cur);
    }
    TimeSeries::new(values, dims, default_names(dims), None)
}

/// Per-dimension z-scoring with population moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn fit(s: &TimeSeries) -> Result<Self> {
        let n = s.len() as f64;
        let d = s.dims();
        let mut mean = vec![0.0; d];
        for row in s.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in s.rows() {
            for j in 0..d {
                let c = row[j] - mean[j];
                var[j] += c * c;
            }
        }
        let mut std = Vec::with_capacity(d);
        for (j, v) in var.into_iter().enumerate() {
            let sd = (v / n).sqrt();
            // Relative threshold: a column of 1e6 + rounding noise is still constant.
            if !(sd > 1e-12 * mean[j].abs().max(1.0)) {
                return Err(Error::DegenerateDimension { dim: j });
            }
            std.push(sd);
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, s: &TimeSeries) -> Result<TimeSeries> {
        self.check(s)?;
        let d = s.dims();
        let values = s
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - self.mean[i % d]) / self.std[i % d])
            .collect();
        TimeSeries::new(values, d, s.dim_names().to_vec(), s.timestamps().map(<[_]>::to_vec))
    }

    pub fn invert(&self, s: &TimeSeries) -> Result<TimeSeries> {
        self.check(s)?;
        let d = s.dims();
        let values = s
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.std[i % d] + self.mean[i % d])
            .collect();
        TimeSeries::new(values, d, s.dim_names().to_vec(), s.timestamps().map(<[_]>::to_vec))
    }

    fn check(&self, s: &TimeSeries) -> Result<()> {
        if s.dims() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                actual: s.dims(),
            });
        }
        Ok(())
    }
}

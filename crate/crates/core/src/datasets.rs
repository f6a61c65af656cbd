//! Evaluation corpora: a Lorenz-63 simulator, CSV ingestion and
//! sliding-window extraction.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::series::TimeSeries;

/// Default conditioning window length.
pub const DEFAULT_PAST: usize = 16;
/// Default generation horizon.
pub const DEFAULT_FUTURE: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LorenzConfig {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
    pub dt: f64,
    pub steps: usize,
    pub transient: usize,
    pub x0: [f64; 3],
    /// Standard deviation of additive Gaussian observation noise. Zero
    /// (the default) keeps the trajectory noiseless.
    pub observation_noise: f64,
}

impl Default for LorenzConfig {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
            dt: 0.01,
            steps: 2000,
            transient: 1000,
            x0: [1.0, 1.0, 1.0],
            observation_noise: 0.0,
        }
    }
}

impl LorenzConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 0.05) {
            return Err(Error::InvalidConfig(format!("lorenz dt {} not in (0, 0.05]", self.dt)));
        }
        if self.steps < 2 {
            return Err(Error::InvalidConfig("lorenz steps must be at least 2".into()));
        }
        let params = [self.sigma, self.rho, self.beta, self.observation_noise];
        if params.iter().chain(&self.x0).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("lorenz parameters must be finite".into()));
        }
        if self.observation_noise < 0.0 {
            return Err(Error::InvalidConfig("observation_noise must be nonnegative".into()));
        }
        Ok(())
    }

    fn derivative(&self, s: [f64; 3]) -> [f64; 3] {
        let [x, y, z] = s;
        [
            self.sigma * (y - x),
            x * (self.rho - z) - y,
            x * y - self.beta * z,
        ]
    }

    /// One classical fourth-order Runge-Kutta step of size `dt`.
    pub fn rk4_step(&self, s: [f64; 3], dt: f64) -> [f64; 3] {
        let add = |a: [f64; 3], b: [f64; 3], h: f64| [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2]];
        let k1 = self.derivative(s);
        let k2 = self.derivative(add(s, k1, dt / 2.0));
        let k3 = self.derivative(add(s, k2, dt / 2.0));
        let k4 = self.derivative(add(s, k3, dt));
        let mut out = s;
        for i in 0..3 {
            out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }
}

/// Integrates the Lorenz system with fixed-step RK4, discarding the first
/// `transient` steps. The rng is only consulted when observation noise is on.
pub fn simulate_lorenz(cfg: &LorenzConfig, rng: Option<&mut RandomStream>) -> Result<TimeSeries> {
    cfg.validate()?;
    let mut state = cfg.x0;
    let mut values = Vec::with_capacity(cfg.steps * 3);
    for step in 0..cfg.transient + cfg.steps {
        state = cfg.rk4_step(state, cfg.dt);
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step });
        }
        if step >= cfg.transient {
            values.extend_from_slice(&state);
        }
    }
    if cfg.observation_noise > 0.0 {
        let rng = rng.ok_or_else(|| {
            Error::InvalidConfig("observation noise requires a random stream".into())
        })?;
        for v in &mut values {
            *v += cfg.observation_noise * rng.standard_normal();
        }
    }
    TimeSeries::new(values, 3, vec!["x".into(), "y".into(), "z".into()], None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    #[serde(default)]
    pub timestamp_column: Option<String>,
    pub value_columns: Vec<String>,
}

/// Reads a comma-delimited file with a header row. Columns follow the order
/// given in `schema`; row order is preserved. Rows in errors are 0-based data
/// rows (the header is not counted).
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv<R: std::io::Read>(reader: R, schema: &CsvSchema) -> Result<TimeSeries> {
    if schema.value_columns.is_empty() {
        return Err(Error::InvalidConfig("schema names no value columns".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let value_idx = schema
        .value_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;
    let ts_idx = schema.timestamp_column.as_deref().map(find).transpose()?;

    let mut values = Vec::new();
    let mut stamps = ts_idx.map(|_| Vec::new());
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        for (&idx, name) in value_idx.iter().zip(&schema.value_columns) {
            let cell = record.get(idx).unwrap_or("").trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: name.clone(),
                message: format!("cannot parse '{cell}' as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    row,
                    column: name.clone(),
                });
            }
            values.push(v);
        }
        if let (Some(i), Some(ts)) = (ts_idx, stamps.as_mut()) {
            ts.push(record.get(i).unwrap_or("").trim().to_string());
        }
    }
    TimeSeries::new(values, schema.value_columns.len(), schema.value_columns.clone(), stamps)
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map(|p| p.record() as usize).unwrap_or(0);
    Error::Parse {
        row: row.saturating_sub(1),
        column: String::new(),
        message: e.to_string(),
    }
}

/// Writes a series with a header row; a `timestamp` column leads when present.
pub fn write_csv<W: std::io::Write>(series: &TimeSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::InvalidConfig(format!("csv write failed: {e}"));
    let mut header: Vec<&str> = Vec::new();
    if series.timestamps().is_some() {
        header.push("timestamp");
    }
    header.extend(series.dim_names().iter().map(String::as_str));
    w.write_record(&header).map_err(to_err)?;
    for (t, row) in series.rows().enumerate() {
        let mut rec: Vec<String> = Vec::with_capacity(row.len() + 1);
        if let Some(ts) = series.timestamps() {
            rec.push(ts[t].clone());
        }
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn save_csv(series: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(series, std::io::BufWriter::new(file))
}

/// A contiguous (past, future) split of the source series.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPair {
    pub past: Vec<f64>,
    pub future: Vec<f64>,
    pub dims: usize,
    /// Row of the source series where `past` starts.
    pub origin_index: usize,
}

impl WindowPair {
    pub fn past_len(&self) -> usize {
        self.past.len() / self.dims
    }

    pub fn future_len(&self) -> usize {
        self.future.len() / self.dims
    }

    /// Past followed by future, row-major.
    pub fn concatenated(&self) -> Vec<f64> {
        let mut out = self.past.clone();
        out.extend_from_slice(&self.future);
        out
    }
}

/// Sliding windows of `p` past and `q` future rows. Yields
/// `(T - p - q) / stride + 1` windows.
pub fn make_windows(s: &TimeSeries, p: usize, q: usize, stride: usize) -> Result<Vec<WindowPair>> {
    if p == 0 || q == 0 || stride == 0 {
        return Err(Error::InvalidConfig("p, q and stride must be positive".into()));
    }
    let t = s.len();
    if t < p + q {
        return Err(Error::SeriesTooShort {
            needed: p + q,
            actual: t,
        });
    }
    let d = s.dims();
    let vals = s.values();
    Ok((0..=(t - p - q))
        .step_by(stride)
        .map(|start| WindowPair {
            past: vals[start * d..(start + p) * d].to_vec(),
            future: vals[(start + p) * d..(start + p + q) * d].to_vec(),
            dims: d,
            origin_index: start,
        })
        .collect())
}

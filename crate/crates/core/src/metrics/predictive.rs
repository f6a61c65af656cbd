//! Train-on-synthetic, test-on-real one-step prediction error.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictiveConfig {
    pub lag: usize,
    pub ridge: f64,
}

impl Default for PredictiveConfig {
    fn default() -> Self {
        Self {
            lag: 16,
            ridge: 1e-3,
        }
    }
}

/// Lagged design: row for target `t` is `[x_{t-1}, …, x_{t-lag}, 1]`.
pub(crate) fn lagged_design(s: &TimeSeries, lag: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if lag == 0 {
        return Err(Error::InvalidConfig("predictor lag must be positive".into()));
    }
    if s.len() <= lag {
        return Err(Error::SeriesTooShort {
            needed: lag + 1,
            actual: s.len(),
        });
    }
    let d = s.dims();
    let n = s.len() - lag;
    let k = lag * d + 1;
    let x = DMatrix::from_fn(n, k, |r, c| {
        if c == k - 1 {
            1.0
        } else {
            s.row(r + lag - (c / d + 1))[c % d]
        }
    });
    let y = DMatrix::from_fn(n, d, |r, c| s.row(r + lag)[c]);
    Ok((x, y))
}

/// Closed-form ridge solution `(XᵀX + λI)⁻¹ XᵀY`.
pub fn fit_ridge(s: &TimeSeries, cfg: &PredictiveConfig) -> Result<DMatrix<f64>> {
    let (x, y) = lagged_design(s, cfg.lag)?;
    let k = x.ncols();
    let gram = x.transpose() * &x + DMatrix::identity(k, k) * cfg.ridge;
    let rhs = x.transpose() * y;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::SingularDesign("ridge system not positive definite".into()))?;
    Ok(chol.solve(&rhs))
}

/// Mean squared one-step error `E||x_{t+1} - x̂_{t+1}||²` on `s`.
pub fn one_step_mse(coef: &DMatrix<f64>, s: &TimeSeries, lag: usize) -> Result<f64> {
    let (x, y) = lagged_design(s, lag)?;
    if x.ncols() != coef.nrows() {
        return Err(Error::DimensionMismatch {
            expected: coef.nrows(),
            actual: x.ncols(),
        });
    }
    let resid = y - x * coef;
    Ok(resid.iter().map(|r| r * r).sum::<f64>() / resid.nrows() as f64)
}

/// Fits the predictor on `gen` and scores it on `real`.
pub fn predictive_score(real: &TimeSeries, gen: &TimeSeries, cfg: &PredictiveConfig) -> Result<f64> {
    if real.dims() != gen.dims() {
        return Err(Error::DimensionMismatch {
            expected: real.dims(),
            actual: gen.dims(),
        });
    }
    let coef = fit_ridge(gen, cfg)?;
    one_step_mse(&coef, real, cfg.lag)
}

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Context, Proposal, ProposalSource};
use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::series::TimeSeries;

const FALLBACK_RIDGE: f64 = 1e-8;

/// Vector autoregression with Gaussian innovations:
/// `x_t = c + Σ_l A_l x_{t-l} + e_t`, `e_t ~ N(0, diag(residual_var))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarModel {
    pub order: usize,
    pub dims: usize,
    /// `order` row-major d×d matrices; entry `[l][i*d + j]` maps lag-(l+1)
    /// dimension j onto output dimension i.
    pub coefficients: Vec<Vec<f64>>,
    pub intercept: Vec<f64>,
    pub residual_var: Vec<f64>,
    /// Ridge that was needed to solve the least-squares problem (0 if none).
    pub ridge: f64,
}

/// Least-squares fit of a VAR(`order`) model.
///
/// Requires `T >= 10 · order · d`. A rank-deficient design is retried once
/// with a small ridge penalty on the lag coefficients before giving up.
pub fn fit_var(s: &TimeSeries, order: usize) -> Result<VarModel> {
    if order == 0 {
        return Err(Error::InvalidConfig("VAR order must be at least 1".into()));
    }
    let d = s.dims();
    let t = s.len();
    if t < 10 * order * d || t <= order {
        return Err(Error::InsufficientData(format!(
            "VAR({order}) on {d} dimensions needs at least {} rows, have {t}",
            10 * order * d
        )));
    }
    for j in 0..d {
        let col = s.column(j);
        if col.iter().all(|&v| v == col[0]) {
            return Err(Error::SingularDesign(format!("dimension {j} is constant")));
        }
    }

    let n = t - order;
    let k = order * d + 1;
    let x = DMatrix::from_fn(n, k, |r, c| {
        let row = r + order;
        if c == k - 1 {
            1.0
        } else {
            let lag = c / d + 1;
            s.row(row - lag)[c % d]
        }
    });
    let y = DMatrix::from_fn(n, d, |r, c| s.row(r + order)[c]);

    let (beta, ridge) = match least_squares(&x, &y, 0.0) {
        Some(b) => (b, 0.0),
        None => {
            log::warn!("VAR({order}) design is rank deficient; retrying with ridge {FALLBACK_RIDGE}");
            let b = least_squares(&x, &y, FALLBACK_RIDGE).ok_or_else(|| {
                Error::SingularDesign(format!("VAR({order}) design singular even with ridge"))
            })?;
            (b, FALLBACK_RIDGE)
        }
    };

    let resid = &y - &x * &beta;
    let residual_var = (0..d)
        .map(|j| {
            let col = resid.column(j);
            let m = col.mean();
            col.iter().map(|r| (r - m).powi(2)).sum::<f64>() / n as f64
        })
        .collect();
    let coefficients = (0..order)
        .map(|l| {
            let mut a = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    a[i * d + j] = beta[(l * d + j, i)];
                }
            }
            a
        })
        .collect();
    let intercept = (0..d).map(|i| beta[(k - 1, i)]).collect();
    Ok(VarModel {
        order,
        dims: d,
        coefficients,
        intercept,
        residual_var,
        ridge,
    })
}

/// Solves `min ||y - xb||² + ridge·||b_lags||²` by QR; the last column of `x`
/// (the intercept) is not penalized. Returns `None` when R is numerically
/// singular.
fn least_squares(x: &DMatrix<f64>, y: &DMatrix<f64>, ridge: f64) -> Option<DMatrix<f64>> {
    let (n, k) = x.shape();
    let penalized = if ridge > 0.0 { k - 1 } else { 0 };
    let mut a = DMatrix::zeros(n + penalized, k);
    a.rows_mut(0, n).copy_from(x);
    let mut b = DMatrix::zeros(n + penalized, y.ncols());
    b.rows_mut(0, n).copy_from(y);
    for i in 0..penalized {
        a[(n + i, i)] = ridge.sqrt();
    }
    let qr = a.qr();
    let r = qr.r();
    let diag_max = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diag_min = r.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(diag_min > 1e-12 * diag_max) {
        return None;
    }
    let qtb = qr.q().transpose() * b;
    r.solve_upper_triangular(&qtb)
}

impl VarModel {
    /// Deterministic one-step mean given at least `order` context rows.
    pub fn mean(&self, context: Context<'_>) -> Result<Vec<f64>> {
        context.check(self.dims, self.order)?;
        let d = self.dims;
        let mut out = self.intercept.clone();
        for (l, a) in self.coefficients.iter().enumerate() {
            let x = context.lagged(l + 1);
            for i in 0..d {
                out[i] += a[i * d..(i + 1) * d]
                    .iter()
                    .zip(x)
                    .map(|(c, v)| c * v)
                    .sum::<f64>();
            }
        }
        Ok(out)
    }

    pub fn residual_std(&self) -> Vec<f64> {
        self.residual_var.iter().map(|v| v.sqrt()).collect()
    }
}

impl ProposalSource for VarModel {
    fn dims(&self) -> usize {
        self.dims
    }

    fn context_len(&self) -> usize {
        self.order
    }

    fn propose_parts(&mut self, context: Context<'_>, rng: &mut RandomStream) -> Result<Proposal> {
        let mean = self.mean(context)?;
        let innovation = self
            .residual_var
            .iter()
            .map(|v| v.sqrt() * rng.standard_normal())
            .collect();
        Ok(Proposal {
            mean,
            innovation: Some(innovation),
        })
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": "var",
            "order": self.order,
            "residual_std": self.residual_std(),
            "ridge": self.ridge,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::conformance::check_source;

    fn ar1(phi: f64, n: usize, seed: u64) -> TimeSeries {
        let mut rng = RandomStream::new(seed);
        let mut x = 0.0;
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                x = phi * x + rng.standard_normal();
                x
            })
            .collect();
        TimeSeries::from_column(&xs).unwrap()
    }

    #[test]
    fn recovers_ar1_coefficient() {
        let m = fit_var(&ar1(0.5, 100_000, 1), 1).unwrap();
        assert!((m.coefficients[0][0] - 0.5).abs() < 0.01);
        assert!((m.residual_var[0] - 1.0).abs() < 0.02);
        assert_eq!(m.ridge, 0.0);
    }

    #[test]
    fn residual_mean_is_zero() {
        let s = ar1(0.8, 2000, 4);
        let m = fit_var(&s, 3).unwrap();
        let mut total = 0.0;
        for t in 3..s.len() {
            let ctx = Context::new(&s.values()[..t], 1).unwrap();
            total += s.row(t)[0] - m.mean(ctx).unwrap()[0];
        }
        assert!((total / (s.len() - 3) as f64).abs() < 1e-8);
    }

    #[test]
    fn closure_on_own_simulation() {
        // Simulate from a known bivariate VAR(1) and refit.
        let truth = VarModel {
            order: 1,
            dims: 2,
            coefficients: vec![vec![0.5, 0.2, -0.1, 0.3]],
            intercept: vec![0.1, -0.2],
            residual_var: vec![1.0, 0.25],
            ridge: 0.0,
        };
        let mut src = truth.clone();
        let mut rng = RandomStream::new(8);
        let vals = crate::generators::rollout(&mut src, &[0.0, 0.0], 50_000, &mut rng).unwrap();
        let s = TimeSeries::from_rows(&vals.chunks(2).map(<[f64]>::to_vec).collect::<Vec<_>>())
            .unwrap();
        let fit = fit_var(&s, 1).unwrap();
        for (a, b) in fit.coefficients[0].iter().zip(&truth.coefficients[0]) {
            assert!((a - b).abs() < 0.02, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_series_is_singular() {
        let s = TimeSeries::from_column(&[3.0; 100]).unwrap();
        assert!(matches!(fit_var(&s, 1), Err(Error::SingularDesign(_))));
    }

    #[test]
    fn order_zero_and_short_data_rejected() {
        let s = ar1(0.5, 100, 2);
        assert!(matches!(fit_var(&s, 0), Err(Error::InvalidConfig(_))));
        assert!(matches!(fit_var(&s, 11), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn collinear_design_falls_back_to_ridge() {
        // Second dimension is an exact copy of the first.
        let base = ar1(0.7, 400, 3);
        let rows: Vec<Vec<f64>> = base.rows().map(|r| vec![r[0], r[0]]).collect();
        let m = fit_var(&TimeSeries::from_rows(&rows).unwrap(), 1).unwrap();
        assert_eq!(m.ridge, FALLBACK_RIDGE);
    }

    #[test]
    fn noiseless_model_returns_mean() {
        let mut m = VarModel {
            order: 2,
            dims: 1,
            coefficients: vec![vec![0.5], vec![0.25]],
            intercept: vec![1.0],
            residual_var: vec![0.0],
            ridge: 0.0,
        };
        let ctx = [4.0, 2.0];
        let v = m
            .propose(Context::new(&ctx, 1).unwrap(), &mut RandomStream::new(0))
            .unwrap();
        assert_eq!(v, vec![1.0 + 0.5 * 2.0 + 0.25 * 4.0]);
    }

    #[test]
    fn context_errors() {
        let mut m = fit_var(&ar1(0.5, 500, 6), 2).unwrap();
        let mut rng = RandomStream::new(0);
        assert!(matches!(
            m.propose(Context::new(&[1.0], 1).unwrap(), &mut rng),
            Err(Error::ContextTooShort { .. })
        ));
        assert!(matches!(
            m.propose(Context::new(&[1.0, 2.0, 3.0, 4.0], 2).unwrap(), &mut rng),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn conforms() {
        let mut m = fit_var(&ar1(0.5, 500, 6), 2).unwrap();
        check_source(&mut m, &[0.1, -0.3, 0.7]);
    }
}

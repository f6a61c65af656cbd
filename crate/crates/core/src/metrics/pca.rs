use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::datasets::WindowPair;
use crate::error::{Error, Result};

/// Two-component projection of flattened windows. Components are fit on the
/// real windows only; each component is signed so its largest-magnitude
/// loading is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    pub real: Vec<[f64; 2]>,
    pub gen: Vec<[f64; 2]>,
    /// Fraction of total real-window variance along each component.
    pub explained_variance_ratio: [f64; 2],
    pub explained_variance: [f64; 2],
}

pub fn pca_projection(real: &[WindowPair], gen: &[WindowPair]) -> Result<PcaProjection> {
    if real.len() < 2 {
        return Err(Error::TooFewWindows {
            needed: 2,
            actual: real.len(),
        });
    }
    let rows: Vec<Vec<f64>> = real.iter().map(WindowPair::concatenated).collect();
    let width = rows[0].len();
    if let Some(w) = rows
        .iter()
        .map(Vec::len)
        .chain(gen.iter().map(|w| w.past.len() + w.future.len()))
        .find(|&w| w != width)
    {
        return Err(Error::DimensionMismatch {
            expected: width,
            actual: w,
        });
    }
    let n = rows.len() as f64;
    let mut mean = vec![0.0; width];
    for r in &rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let centered = DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j] - mean[j]);
    let cov = centered.transpose() * &centered / n;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..width).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();

    let mut components = Vec::with_capacity(2);
    let mut variances = [0.0; 2];
    for (slot, &idx) in order.iter().take(2).enumerate() {
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        variances[slot] = eig.eigenvalues[idx].max(0.0);
    }
    // A single-feature input has only one component.
    while components.len() < 2 {
        components.push(vec![0.0; width]);
    }
    let project = |w: &[f64]| -> [f64; 2] {
        let mut out = [0.0; 2];
        for (k, c) in components.iter().enumerate() {
            out[k] = w.iter().zip(&mean).zip(c).map(|((x, m), c)| (x - m) * c).sum();
        }
        out
    };
    let ratio = |v: f64| if total > 0.0 { v / total } else { 0.0 };
    Ok(PcaProjection {
        real: rows.iter().map(|r| project(r)).collect(),
        gen: gen.iter().map(|w| project(&w.concatenated())).collect(),
        explained_variance_ratio: [ratio(variances[0]), ratio(variances[1])],
        explained_variance: variances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::make_windows;
    use crate::rng::RandomStream;
    use crate::series::TimeSeries;

    fn series(seed: u64) -> TimeSeries {
        let mut rng = RandomStream::new(seed);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|t| vec![(t as f64 * 0.2).sin() + 0.1 * rng.standard_normal(), rng.standard_normal()])
            .collect();
        TimeSeries::from_rows(&rows).unwrap()
    }

    #[test]
    fn variance_ordering_and_identity() {
        let w = make_windows(&series(1), 4, 4, 2).unwrap();
        let p = pca_projection(&w, &w).unwrap();
        assert!(p.explained_variance[0] >= p.explained_variance[1]);
        assert_eq!(p.real, p.gen);
        let var = |k: usize| p.real.iter().map(|c| c[k] * c[k]).sum::<f64>() / p.real.len() as f64;
        assert!(var(0) >= var(1));
        assert!((var(0) - p.explained_variance[0]).abs() < 1e-9);
    }

    #[test]
    fn rank_one_data() {
        // Every window is a scalar multiple of one pattern.
        let rows: Vec<Vec<f64>> = (0..200).map(|t| vec![(t as f64 * 0.37).sin()]).collect();
        let s = TimeSeries::from_rows(&rows).unwrap();
        let w: Vec<WindowPair> = make_windows(&s, 1, 1, 1)
            .unwrap()
            .into_iter()
            .map(|mut w| {
                let a = w.past[0];
                w.future[0] = 2.0 * a;
                w
            })
            .collect();
        let p = pca_projection(&w, &w).unwrap();
        assert!(p.explained_variance_ratio[1] < 1e-12);
        assert!((p.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sign_convention_is_deterministic() {
        let w = make_windows(&series(2), 3, 3, 1).unwrap();
        let a = pca_projection(&w, &w).unwrap();
        let b = pca_projection(&w, &w).unwrap();
        assert_eq!(a, b);
    }
}

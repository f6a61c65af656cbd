//! Post-hoc real-vs-synthetic classifier: logistic regression on handcrafted
//! window features, trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::stats::mean;
use crate::datasets::WindowPair;
use crate::error::{Error, Result};
use crate::rng::RandomStream;

pub const MIN_WINDOWS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminativeConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    /// Fraction of each class used for training.
    pub train_fraction: f64,
}

impl Default for DiscriminativeConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            learning_rate: 0.5,
            l2: 1e-3,
            train_fraction: 0.8,
        }
    }
}

/// Minimizes a differentiable objective by fixed-step gradient descent.
/// `grad` writes the gradient at `params` into its second argument.
pub fn gradient_descent(
    mut params: Vec<f64>,
    learning_rate: f64,
    iterations: usize,
    mut grad: impl FnMut(&[f64], &mut [f64]),
) -> Vec<f64> {
    let mut g = vec![0.0; params.len()];
    for _ in 0..iterations {
        grad(&params, &mut g);
        for (p, gi) in params.iter_mut().zip(&g) {
            *p -= learning_rate * gi;
        }
    }
    params
}

/// Flattened window values followed by per-dimension mean, std and lag-1
/// autocorrelation.
pub fn window_features(w: &WindowPair) -> Vec<f64> {
    let values = w.concatenated();
    let d = w.dims;
    let rows = values.len() / d;
    let mut feats = values.clone();
    for j in 0..d {
        let col: Vec<f64> = (0..rows).map(|r| values[r * d + j]).collect();
        let m = mean(&col);
        let var = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / rows as f64;
        let lag1 = if var > 0.0 && rows > 1 {
            col.windows(2).map(|p| (p[0] - m) * (p[1] - m)).sum::<f64>() / (rows as f64 * var)
        } else {
            0.0
        };
        feats.extend_from_slice(&[m, var.sqrt(), lag1]);
    }
    feats
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `|held-out accuracy - 0.5|` of a logistic classifier separating real
/// (label 1) from generated (label 0) windows.
pub fn discriminative_score(
    real: &[WindowPair],
    gen: &[WindowPair],
    cfg: &DiscriminativeConfig,
    seed: u64,
) -> Result<f64> {
    let fewest = real.len().min(gen.len());
    if fewest < MIN_WINDOWS {
        return Err(Error::TooFewWindows {
            needed: MIN_WINDOWS,
            actual: fewest,
        });
    }
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(Error::InvalidConfig("train_fraction must be in (0, 1)".into()));
    }
    let mut rng = RandomStream::new(seed);
    let mut train: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut test: Vec<(Vec<f64>, f64)> = Vec::new();
    // Equal-sized sides share one permutation, so index-aligned windows land
    // on the same side of the split.
    let mut shared: Vec<usize> = (0..real.len()).collect();
    rng.shuffle(&mut shared);
    for (windows, label) in [(real, 1.0), (gen, 0.0)] {
        let idx = if windows.len() == shared.len() {
            shared.clone()
        } else {
            let mut own: Vec<usize> = (0..windows.len()).collect();
            rng.shuffle(&mut own);
            own
        };
        let n_train = ((windows.len() as f64) * cfg.train_fraction).round() as usize;
        let n_train = n_train.clamp(1, windows.len() - 1);
        for (k, &i) in idx.iter().enumerate() {
            let f = window_features(&windows[i]);
            if k < n_train {
                train.push((f, label));
            } else {
                test.push((f, label));
            }
        }
    }
    let width = train[0].0.len();
    if let Some((f, _)) = train.iter().chain(&test).find(|(f, _)| f.len() != width) {
        return Err(Error::DimensionMismatch {
            expected: width,
            actual: f.len(),
        });
    }

    // Standardize with training statistics.
    let mut mu = vec![0.0; width];
    let mut sd = vec![0.0; width];
    for (f, _) in &train {
        for (m, v) in mu.iter_mut().zip(f) {
            *m += v;
        }
    }
    mu.iter_mut().for_each(|m| *m /= train.len() as f64);
    for (f, _) in &train {
        for j in 0..width {
            sd[j] += (f[j] - mu[j]).powi(2);
        }
    }
    for s in &mut sd {
        *s = (*s / train.len() as f64).sqrt();
        if !(*s > 1e-12) {
            *s = 1.0;
        }
    }
    let standardize = |rows: &mut Vec<(Vec<f64>, f64)>| {
        for (f, _) in rows.iter_mut() {
            for j in 0..width {
                f[j] = (f[j] - mu[j]) / sd[j];
            }
        }
    };
    standardize(&mut train);
    standardize(&mut test);

    let n = train.len() as f64;
    let weights = gradient_descent(vec![0.0; width + 1], cfg.learning_rate, cfg.epochs, |w, g| {
        g.iter_mut().for_each(|v| *v = 0.0);
        for (f, y) in &train {
            let z = w[width] + f.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            let r = sigmoid(z) - y;
            for j in 0..width {
                g[j] += r * f[j];
            }
            g[width] += r;
        }
        for j in 0..width {
            g[j] = g[j] / n + cfg.l2 * w[j];
        }
        g[width] /= n;
    });

    let correct = test
        .iter()
        .filter(|(f, y)| {
            let z = weights[width] + f.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>();
            (z > 0.0) == (*y == 1.0)
        })
        .count();
    let acc = correct as f64 / test.len() as f64;
    Ok((acc - 0.5).abs())
}

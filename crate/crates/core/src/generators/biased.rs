use super::{Context, Proposal, ProposalSource};
use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Wraps a source with a constant per-step drift and inflated innovations,
/// giving a generator with a known, controllable distribution shift.
///
/// When the inner source does not expose its innovation only the drift is
/// applied.
pub struct BiasedSource {
    inner: Box<dyn ProposalSource>,
    drift: Vec<f64>,
    noise_scale: f64,
}

impl BiasedSource {
    pub fn new(inner: Box<dyn ProposalSource>, drift: Vec<f64>, noise_scale: f64) -> Result<Self> {
        if drift.len() != inner.dims() {
            return Err(Error::DimensionMismatch {
                expected: inner.dims(),
                actual: drift.len(),
            });
        }
        if !(noise_scale >= 1.0 && noise_scale.is_finite()) || drift.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "noise_scale must be finite and >= 1 (got {noise_scale}); drift must be finite"
            )));
        }
        Ok(Self {
            inner,
            drift,
            noise_scale,
        })
    }

    pub fn drift(&self) -> &[f64] {
        &self.drift
    }
}

impl ProposalSource for BiasedSource {
    fn dims(&self) -> usize {
        self.inner.dims()
    }

    fn context_len(&self) -> usize {
        self.inner.context_len()
    }

    fn propose_parts(&mut self, context: Context<'_>, rng: &mut RandomStream) -> Result<Proposal> {
        let p = self.inner.propose_parts(context, rng)?;
        let mean = p.mean.iter().zip(&self.drift).map(|(m, d)| m + d).collect();
        let innovation = p
            .innovation
            .map(|e| e.into_iter().map(|v| v * self.noise_scale).collect());
        Ok(Proposal { mean, innovation })
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": "biased",
            "drift": self.drift,
            "noise_scale": self.noise_scale,
            "inner": self.inner.describe(),
        })
    }
}

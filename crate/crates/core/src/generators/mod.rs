//! Conditional proposal sources: "sample the next value given the recent past".
//!
//! Every source implements [`ProposalSource`]. Built-in sources are plain
//! statistical models; [`ExternalSource`] forwards requests to a child
//! process speaking the line-delimited JSON protocol documented in
//! [`external`].

mod biased;
mod bootstrap;
pub mod external;
mod var;

pub use biased::BiasedSource;
pub use bootstrap::BootstrapSource;
pub use external::{spawn_external, ExternalSource, ExternalSourceConfig};
pub use var::{fit_var, VarModel};

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Read-only view of a `rows × dims` conditioning window, oldest row first.
#[derive(Debug, Clone, Copy)]
pub struct Context<'a> {
    data: &'a [f64],
    dims: usize,
}

impl<'a> Context<'a> {
    pub fn new(data: &'a [f64], dims: usize) -> Result<Self> {
        if dims == 0 || data.len() % dims != 0 {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: if dims == 0 { 0 } else { data.len() % dims },
            });
        }
        Ok(Self { data, dims })
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dims
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    /// Row `lag` steps back from the end; `lag = 1` is the most recent row.
    pub fn lagged(&self, lag: usize) -> &'a [f64] {
        self.row(self.rows() - lag)
    }

    pub fn last_row(&self) -> &'a [f64] {
        self.lagged(1)
    }

    pub fn as_slice(&self) -> &'a [f64] {
        self.data
    }

    /// The most recent `n` rows.
    pub fn tail(&self, n: usize) -> Context<'a> {
        let n = n.min(self.rows());
        Context {
            data: &self.data[(self.rows() - n) * self.dims..],
            dims: self.dims,
        }
    }

    /// Checks width and depth against what a source needs.
    pub fn check(&self, dims: usize, min_rows: usize) -> Result<()> {
        if self.dims != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: self.dims,
            });
        }
        if self.rows() < min_rows {
            return Err(Error::ContextTooShort {
                needed: min_rows,
                actual: self.rows(),
            });
        }
        Ok(())
    }
}

/// A proposal split into its deterministic part and its random innovation.
/// Sources that cannot separate the two report the full value as `mean`.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub mean: Vec<f64>,
    pub innovation: Option<Vec<f64>>,
}

impl Proposal {
    pub fn value(&self) -> Vec<f64> {
        match &self.innovation {
            Some(e) => self.mean.iter().zip(e).map(|(m, e)| m + e).collect(),
            None => self.mean.clone(),
        }
    }
}

pub trait ProposalSource: Send {
    fn dims(&self) -> usize;

    /// Number of most recent rows the source conditions on.
    fn context_len(&self) -> usize;

    /// Draws the next value. Implementations must not keep state that makes
    /// the output depend on anything besides `context` and `rng`.
    fn propose_parts(&mut self, context: Context<'_>, rng: &mut RandomStream) -> Result<Proposal>;

    fn propose(&mut self, context: Context<'_>, rng: &mut RandomStream) -> Result<Vec<f64>> {
        let value = self.propose_parts(context, rng)?.value();
        if value.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: value.len(),
            });
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::Protocol("source produced a non-finite proposal".into()));
        }
        Ok(value)
    }

    /// Metadata recorded alongside runs.
    fn describe(&self) -> serde_json::Value;
}

impl<S: ProposalSource + ?Sized> ProposalSource for Box<S> {
    fn dims(&self) -> usize {
        (**self).dims()
    }

    fn context_len(&self) -> usize {
        (**self).context_len()
    }

    fn propose_parts(&mut self, context: Context<'_>, rng: &mut RandomStream) -> Result<Proposal> {
        (**self).propose_parts(context, rng)
    }

    fn propose(&mut self, context: Context<'_>, rng: &mut RandomStream) -> Result<Vec<f64>> {
        (**self).propose(context, rng)
    }

    fn describe(&self) -> serde_json::Value {
        (**self).describe()
    }
}

/// Rolls a source out autoregressively for `steps` values, conditioning on
/// `warm_start` followed by its own output. The warm start is not part of
/// the returned rows.
pub fn rollout(
    source: &mut dyn ProposalSource,
    warm_start: &[f64],
    steps: usize,
    rng: &mut RandomStream,
) -> Result<Vec<f64>> {
    let d = source.dims();
    let need = source.context_len();
    let mut history = warm_start.to_vec();
    Context::new(&history, d)?.check(d, need)?;
    let mut out = Vec::with_capacity(steps * d);
    for step in 0..steps {
        let ctx = Context::new(&history, d)?.tail(need);
        let q = source.propose(ctx, rng).map_err(|e| e.at_step(step))?;
        history.extend_from_slice(&q);
        out.extend_from_slice(&q);
    }
    Ok(out)
}

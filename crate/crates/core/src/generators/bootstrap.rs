use super::{Context, Proposal, ProposalSource};
use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::series::{first_differences, DiffVector, TimeSeries};

/// Proposes the last context row plus a real difference vector drawn
/// uniformly with replacement.
#[derive(Debug, Clone)]
pub struct BootstrapSource {
    diffs: Vec<DiffVector>,
    dims: usize,
}

impl BootstrapSource {
    pub fn new(s: &TimeSeries) -> Result<Self> {
        Self::from_diffs(first_differences(s))
    }

    pub fn from_diffs(diffs: Vec<DiffVector>) -> Result<Self> {
        let dims = diffs
            .first()
            .map(DiffVector::len)
            .ok_or(Error::SeriesTooShort {
                needed: 2,
                actual: 1,
            })?;
        if let Some(bad) = diffs.iter().find(|d| d.len() != dims) {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: bad.len(),
            });
        }
        Ok(Self { diffs, dims })
    }

    pub fn diffs(&self) -> &[DiffVector] {
        &self.diffs
    }
}

impl ProposalSource for BootstrapSource {
    fn dims(&self) -> usize {
        self.dims
    }

    fn context_len(&self) -> usize {
        1
    }

    fn propose_parts(&mut self, context: Context<'_>, rng: &mut RandomStream) -> Result<Proposal> {
        context.check(self.dims, 1)?;
        let delta = &self.diffs[rng.index(self.diffs.len())];
        let mean = context
            .last_row()
            .iter()
            .zip(&delta.0)
            .map(|(x, dx)| x + dx)
            .collect();
        Ok(Proposal {
            mean,
            innovation: None,
        })
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "kind": "bootstrap", "pool": self.diffs.len() })
    }
}

//! Post-hoc correction of synthetic multivariate time series.
//!
//! A generator proposes the next row of a series from its recent history;
//! [`corrector::correct_series`] filters those proposals with a
//! Metropolis–Hastings style test against the empirical density of first
//! differences of a real series. The [`metrics`] module scores fidelity and
//! [`theory`] checks the underlying Markov chain results on finite chains.

pub mod corrector;
pub mod datasets;
pub mod density;
pub mod error;
pub mod generators;
pub mod metrics;
pub mod rng;
pub mod series;
pub mod theory;

pub use corrector::{correct_series, ConditioningMode, CorrectionConfig, CorrectionRun};
pub use density::{DensityConfig, DensityKind, DiffDensity};
pub use error::{Error, Result};
pub use generators::{Context, Proposal, ProposalSource};
pub use rng::RandomStream;
pub use series::{DiffVector, Normalizer, TimeSeries};

//! Monte Carlo estimators of event probabilities and functionals.
//!
//! Every estimator runs independent replicas, each drawing its own master seed
//! from `(seed, replica index)`, and pools them with count, sum and sum of squares.

pub mod critical;
pub mod event;
pub mod mecke;
pub mod phi;
pub mod pivotal;
pub mod two_arm;

pub use critical::{critical_search, CriticalMode, CriticalResult, CriticalSearch, SearchStep};
pub use event::{estimate_event, estimate_event_curve, event_sampler};
pub use mecke::{mecke_check, BallMeetsRegion, BoundaryCrossing, DegreeCount, MeckeFunctional, MeckeReport};
pub use phi::{correlation_length, estimate_phi, phi_count, CorrelationLength};
pub use pivotal::{delta_derivative, estimate_pivotal, talagrand_diagnostic, DeltaDerivative, TalagrandReport};
pub use two_arm::{bad_ball_mass, two_arm_decay, TwoArmPoint, TwoArmReport};

use crate::connectivity::EventError;
use crate::measures::MeasureError;
use crate::par;
use crate::rng::{self, tag};
use crate::sampling::{SamplingError, Truncation};
use crate::stats::{self, Accumulator};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("bracket invalid: {0}")]
    BracketInvalid(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateKind {
    /// Frequency of a 0/1 outcome; Wilson interval.
    Bernoulli,
    /// Mean of a real outcome; normal interval.
    Mean,
}

/// Pooled Monte Carlo result with a 95% interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub replicas: u64,
    pub seed: u64,
    /// Bound on the bias introduced by radius truncation.
    pub bias_note: f64,
    pub kind: EstimateKind,
    pub acc: Accumulator,
}

impl Estimate {
    pub fn from_accumulator(acc: Accumulator, kind: EstimateKind, seed: u64, bias_note: f64) -> Self {
        let value = acc.mean();
        let stderr = acc.stderr();
        let (ci_lo, ci_hi) = match kind {
            EstimateKind::Bernoulli => stats::wilson(acc.sum.round() as u64, acc.count, stats::Z95),
            EstimateKind::Mean => (value - stats::Z95 * stderr, value + stats::Z95 * stderr),
        };
        Self { value, stderr, ci_lo, ci_hi, replicas: acc.count, seed, bias_note, kind, acc }
    }

    pub fn bernoulli(outcomes: &[bool], seed: u64, bias_note: f64) -> Self {
        let acc: Accumulator = outcomes.iter().map(|&b| b as u8 as f64).collect();
        Self::from_accumulator(acc, EstimateKind::Bernoulli, seed, bias_note)
    }

    pub fn mean(values: &[f64], seed: u64, bias_note: f64) -> Self {
        let acc: Accumulator = values.iter().copied().collect();
        Self::from_accumulator(acc, EstimateKind::Mean, seed, bias_note)
    }

    /// Interval at another confidence level.
    pub fn interval(&self, confidence: f64) -> (f64, f64) {
        let z = stats::z_for(confidence);
        match self.kind {
            EstimateKind::Bernoulli => stats::wilson(self.acc.sum.round() as u64, self.acc.count, z),
            EstimateKind::Mean => (self.value - z * self.stderr, self.value + z * self.stderr),
        }
    }

    /// Pools two estimates of the same quantity.
    pub fn merge(&self, other: &Estimate) -> Estimate {
        let mut acc = self.acc;
        acc.merge(&other.acc);
        Estimate::from_accumulator(acc, self.kind, self.seed, self.bias_note.max(other.bias_note))
    }
}

/// Replica plan shared by all estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub replicas: u64,
    pub seed: u64,
    /// Index of the first replica; disjoint offsets give mergeable partitions.
    pub offset: u64,
    pub truncation: Truncation,
}

impl McSettings {
    pub fn new(replicas: u64, seed: u64) -> Self {
        Self { replicas, seed, offset: 0, truncation: Truncation::default() }
    }

    pub fn truncation(mut self, t: Truncation) -> Self {
        self.truncation = t;
        self
    }

    pub fn offset(mut self, offset: u64) -> Self {
        self.offset = offset;
        self
    }

    pub fn replicas(mut self, replicas: u64) -> Self {
        self.replicas = replicas;
        self
    }

    pub fn check(&self) -> Result<(), EstimatorError> {
        if self.replicas == 0 {
            return Err(EstimatorError::Precondition("replicas must be at least 1".into()));
        }
        Ok(())
    }

    /// Master seed of replica `i`.
    pub fn replica_seed(&self, i: u64) -> u64 {
        rng::derive(self.seed, tag::REPLICA, i)
    }

    /// Runs `f(replica_seed, replica_index)` over the plan, in index order.
    pub fn run<T: Send>(&self, f: impl Fn(u64, u64) -> T + Sync + Send) -> Vec<T> {
        par::map_indexed(self.offset, self.offset + self.replicas, |i| f(self.replica_seed(i), i))
    }
}

#[cfg(test)]
mod tests;

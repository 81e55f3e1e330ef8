//! Grimmett-Marstrand style exploration on `Z^2`.
//!
//! Sites of `Z^2` stand for boxes `Λ_x = 2Nx + Λ_N` of the continuum. The
//! exploration grows an accepted set `A` from the origin by testing one
//! frontier edge at a time; a site is accepted when a ball of radius at least
//! `n` in its box connects to the seed ball of the neighbour it was reached
//! from. Extra independent balls ("sprinkling") are added around each tested
//! site. [`run_abstract_exploration`] runs the same skeleton with Bernoulli
//! acceptance.

pub mod covering;
pub mod gm;
pub mod lattice;
pub mod sprinkling;

pub use covering::{covering_centers, covering_number, covering_seed_boost, overlap_multiplicity, CoveringReport};
pub use gm::{explore_with_process, run_exploration, run_exploration_on, ExplorationSetup};
pub use lattice::{percolation_frequency, run_abstract_exploration, site_mark, site_percolation_oracle};
pub use sprinkling::{sprinkling_gain, xi_for_hypothesis, SprinkleGeometry, SprinklingReport};

use crate::estimators::EstimatorError;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use thiserror::Error;

/// Site percolation threshold of `Z^2` (literature value, used as a default).
pub const P_C_SITE: f64 = 0.592746;

pub type Site = [i64; 2];

/// Edge directions in selection order: east, north, west, south.
pub const DIRECTIONS: [Site; 4] = [[1, 0], [0, 1], [-1, 0], [0, -1]];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplorationError {
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("conditioning event too rare: frequency {frequency:.2e} over {replicas} draws")]
    ConditioningTooRare { frequency: f64, replicas: u64 },
}

impl From<crate::sampling::SamplingError> for ExplorationError {
    fn from(e: crate::sampling::SamplingError) -> Self {
        ExplorationError::Estimator(e.into())
    }
}

/// Sprinkling intensity parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SprinkleParams {
    pub beta: f64,
    pub xi: f64,
    /// Threshold the target acceptance probability must exceed.
    pub p_site: f64,
}

impl SprinkleParams {
    pub fn new(beta: f64, xi: f64) -> Self {
        SprinkleParams { beta, xi, p_site: P_C_SITE }
    }

    /// No sprinkling at all.
    pub fn none() -> Self {
        SprinkleParams::new(0.0, 1.0)
    }

    /// Chooses `ξ` so that `ε^{1/c} = exp(-3λ/ξ)`.
    pub fn from_epsilon(lambda: f64, epsilon: f64, c: usize, beta: f64) -> Self {
        SprinkleParams::new(beta, 3.0 * lambda * c as f64 / -epsilon.ln())
    }

    /// Intensity of each sprinkled process.
    pub fn intensity(&self) -> f64 {
        self.beta * self.xi
    }

    /// `1 - e^{-β} - ε^{1/(3c)}`, the acceptance lower bound the exploration is compared with.
    pub fn acceptance_bound(&self, epsilon: f64, c: usize) -> f64 {
        1.0 - (-self.beta).exp() - epsilon.powf(1.0 / (3.0 * c as f64))
    }

    pub fn exceeds_threshold(&self, epsilon: f64, c: usize) -> bool {
        self.acceptance_bound(epsilon, c) > self.p_site
    }

    pub fn validate(&self) -> Result<(), ExplorationError> {
        let ok = self.beta >= 0.0 && self.beta.is_finite() && self.xi > 0.0 && self.xi.is_finite();
        if !ok || !(0.0..1.0).contains(&self.p_site) {
            return Err(ExplorationError::Precondition(format!(
                "sprinkling needs beta >= 0, xi > 0 and p_site in [0, 1); got {self:?}"
            )));
        }
        Ok(())
    }
}

impl Default for SprinkleParams {
    fn default() -> Self {
        SprinkleParams::none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// One line of the exploration trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: u64,
    pub x_t: Site,
    /// Accepted neighbour the edge starts from.
    pub from: Site,
    pub accepted: bool,
    pub seed_ball: Option<SeedBall>,
    /// Open frontier edges before this step.
    pub frontier_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplorationOutcome {
    pub reached_boundary: bool,
    pub accepted: usize,
    pub rejected: usize,
    pub half_sites: i64,
    pub trace: Vec<TraceStep>,
}

impl ExplorationOutcome {
    /// Writes the trace as JSON lines.
    pub fn write_trace<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for step in &self.trace {
            serde_json::to_writer(&mut w, step)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Sites tested during the run, in order.
    pub fn queried(&self) -> Vec<Site> {
        self.trace.iter().map(|s| s.x_t).collect()
    }
}

/// Accepted and rejected sets with the open frontier.
///
/// The frontier holds exactly the edges `(a, dir)` with `a` accepted and
/// `a + dir` unexplored, so the next edge is the smallest element.
#[derive(Clone, Debug)]
pub struct ExplorationState {
    pub accepted: BTreeSet<Site>,
    pub rejected: BTreeSet<Site>,
    pub seed_balls: BTreeMap<Site, SeedBall>,
    pub t: u64,
    pub half_sites: i64,
    frontier: BTreeSet<(Site, u8)>,
}

fn step(x: Site, dir: u8) -> Site {
    let d = DIRECTIONS[dir as usize];
    [x[0] + d[0], x[1] + d[1]]
}

impl ExplorationState {
    /// Starts from `A = {0}`, `B = ∅` with the given seed ball at the origin.
    pub fn new(half_sites: i64, origin_ball: SeedBall) -> Self {
        let mut s = ExplorationState {
            accepted: BTreeSet::new(),
            rejected: BTreeSet::new(),
            seed_balls: BTreeMap::new(),
            t: 0,
            half_sites,
            frontier: BTreeSet::new(),
        };
        s.accept([0, 0], origin_ball);
        s
    }

    pub fn explored(&self, x: &Site) -> bool {
        self.accepted.contains(x) || self.rejected.contains(x)
    }

    pub fn frontier_size(&self) -> usize {
        self.frontier.len()
    }

    pub fn on_boundary(&self, x: &Site) -> bool {
        x[0].abs().max(x[1].abs()) >= self.half_sites
    }

    /// The next `(from, to)` edge, or `None` when the frontier is empty.
    pub fn next_edge(&self) -> Option<(Site, Site)> {
        self.frontier.first().map(|&(a, dir)| (a, step(a, dir)))
    }

    fn close_edges_into(&mut self, x: Site) {
        for dir in 0..4u8 {
            let y = step(x, dir);
            if self.accepted.contains(&y) {
                self.frontier.remove(&(y, (dir + 2) % 4));
            }
        }
    }

    fn accept(&mut self, x: Site, ball: SeedBall) {
        self.close_edges_into(x);
        self.accepted.insert(x);
        self.seed_balls.insert(x, ball);
        for dir in 0..4u8 {
            if !self.explored(&step(x, dir)) {
                self.frontier.insert((x, dir));
            }
        }
    }

    fn reject(&mut self, x: Site) {
        self.close_edges_into(x);
        self.rejected.insert(x);
    }

    /// Runs the exploration, deciding each tested site with `decide(t, x_t, from, state)`.
    ///
    /// `decide` returns the seed ball of an accepted site, or `None` to reject.
    pub fn run(
        mut self,
        mut decide: impl FnMut(u64, Site, Site, &ExplorationState) -> Option<SeedBall>,
    ) -> ExplorationOutcome {
        let mut trace = Vec::new();
        let mut reached = false;
        while let Some((from, x)) = self.next_edge() {
            let frontier_size = self.frontier_size();
            let verdict = decide(self.t, x, from, &self);
            trace.push(TraceStep {
                t: self.t,
                x_t: x,
                from,
                accepted: verdict.is_some(),
                seed_ball: verdict.clone(),
                frontier_size,
            });
            self.t += 1;
            match verdict {
                Some(ball) => {
                    self.accept(x, ball);
                    if self.on_boundary(&x) {
                        reached = true;
                        break;
                    }
                }
                None => self.reject(x),
            }
        }
        ExplorationOutcome {
            reached_boundary: reached,
            accepted: self.accepted.len(),
            rejected: self.rejected.len(),
            half_sites: self.half_sites,
            trace,
        }
    }
}

/// Injective key of a site, used to index random streams.
pub fn site_key(x: Site) -> u64 {
    let zig = |v: i64| ((v << 1) ^ (v >> 63)) as u64;
    (zig(x[0]) << 32) | (zig(x[1]) & 0xffff_ffff)
}

#[cfg(test)]
mod tests;

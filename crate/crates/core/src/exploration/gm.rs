//! Exploration of boxes `Λ_x = 2Nx + Λ_N` driven by seed-event propagation.

use super::{site_key, ExplorationError, ExplorationOutcome, ExplorationState, SeedBall, Site, SprinkleParams};
use crate::connectivity::ClusterIndex;
use crate::geometry::Region;
use crate::measures::RadiusMeasure;
use crate::rng::{self, tag};
use crate::sampling::{CenterPolicy, Configuration, Sampler, SamplerSpec, Truncation, Window, WindowShape};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Scales and window of one exploration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplorationSetup {
    pub dim: usize,
    /// Minimal seed radius `n`.
    pub n: f64,
    /// Box half-side `N`.
    pub big_n: f64,
    /// Sites range over `[-M, M]^2`.
    pub half_sites: i64,
}

impl ExplorationSetup {
    pub fn new(dim: usize, n: f64, big_n: f64, half_sites: i64) -> Self {
        ExplorationSetup { dim, n, big_n, half_sites }
    }

    pub fn validate(&self) -> Result<(), ExplorationError> {
        if self.dim < 2 {
            return Err(ExplorationError::Precondition(format!("exploration needs d >= 2, got {}", self.dim)));
        }
        if !(self.n > 0.0 && self.big_n >= self.n) {
            return Err(ExplorationError::Precondition(format!("need N >= n > 0, got n={}, N={}", self.n, self.big_n)));
        }
        if self.half_sites < 4 {
            return Err(ExplorationError::Precondition(format!("need M >= 4, got {}", self.half_sites)));
        }
        Ok(())
    }

    /// Radius `4√d N` of the participation ball `B̃_x`.
    pub fn clip_radius(&self) -> f64 {
        4.0 * (self.dim as f64).sqrt() * self.big_n
    }

    /// Continuum centre `2Nx` of site `x`.
    pub fn center(&self, x: Site) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        c[0] = 2.0 * self.big_n * x[0] as f64;
        c[1] = 2.0 * self.big_n * x[1] as f64;
        c
    }

    pub fn cell(&self, x: Site) -> Region {
        Region::Cube { center: self.center(x), half: self.big_n }
    }

    pub fn clip(&self, x: Site) -> Region {
        Region::Ball { center: self.center(x), radius: self.clip_radius() }
    }

    /// Window containing every `B̃_x` with `x ∈ [-M, M]^2`.
    pub fn window(&self) -> Window {
        let c = self.clip_radius();
        Window::new(
            self.dim,
            WindowShape::Slab { half_thickness: c, half_side: 2.0 * self.big_n * self.half_sites as f64 + c },
        )
    }
}

/// Samples the base process on the exploration window and runs the exploration.
pub fn run_exploration(
    lambda: f64,
    mu: &RadiusMeasure,
    setup: &ExplorationSetup,
    sprinkle: &SprinkleParams,
    truncation: Truncation,
    seed: u64,
) -> Result<ExplorationOutcome, ExplorationError> {
    setup.validate()?;
    let spec = SamplerSpec::new(lambda, mu.clone(), setup.window())
        .centers(CenterPolicy::WindowOnly)
        .truncation(truncation);
    let base = Sampler::new(spec)?.sample(rng::derive(seed, tag::SAMPLE, 0));
    run_exploration_on(base, mu, setup, sprinkle, seed)
}

/// Runs the exploration on a given base configuration.
///
/// Each tested site `x` receives its own sprinkled process of intensity `βξ`
/// centred in `B̃_x`, keyed by `(seed, x)`, and the process is kept for all
/// later steps.
pub fn run_exploration_on(
    base: Configuration,
    mu: &RadiusMeasure,
    setup: &ExplorationSetup,
    sprinkle: &SprinkleParams,
    seed: u64,
) -> Result<ExplorationOutcome, ExplorationError> {
    explore_with_process(base, mu, setup, sprinkle, seed).map(|(out, _)| out)
}

/// As [`run_exploration_on`], also returning the base process together with
/// every sprinkle added during the run.
pub fn explore_with_process(
    base: Configuration,
    mu: &RadiusMeasure,
    setup: &ExplorationSetup,
    sprinkle: &SprinkleParams,
    seed: u64,
) -> Result<(ExplorationOutcome, Configuration), ExplorationError> {
    setup.validate()?;
    sprinkle.validate()?;
    if base.dim != setup.dim {
        return Err(ExplorationError::Precondition(format!("configuration has d={}, setup d={}", base.dim, setup.dim)));
    }
    let sprinkler = if sprinkle.intensity() > 0.0 {
        let truncation = if base.r_max.is_finite() {
            Truncation::Fixed { r_max: base.r_max, max_discarded: f64::INFINITY }
        } else {
            Truncation::default()
        };
        let spec = SamplerSpec::new(sprinkle.intensity(), mu.clone(), Window::ball(setup.dim, setup.clip_radius()))
            .centers(CenterPolicy::WindowOnly)
            .truncation(truncation);
        Some(Sampler::new(spec)?)
    } else {
        None
    };

    let mut eta = base;
    let origin = SeedBall { center: vec![0.0; setup.dim], radius: setup.n };
    let state = ExplorationState::new(setup.half_sites, origin);
    let out = state.run(|_, x, from, st| {
        if let Some(s) = &sprinkler {
            let extra = s.sample(rng::derive(seed, tag::EXPLORE, site_key(x)));
            let shift = setup.center(x);
            let mut z = vec![0.0; setup.dim];
            for (c, r) in extra.iter() {
                for k in 0..setup.dim {
                    z[k] = c[k] + shift[k];
                }
                eta.push(&z, r);
            }
        }
        let source = &st.seed_balls[&from];
        propagate(&eta, setup, x, source)
    });
    Ok((out, eta))
}

/// The chosen ball of `Λ_x` reached from `source` through balls centred in `B̃_x`.
///
/// Among all candidates the largest radius wins, ties going to the
/// lexicographically smallest centre.
fn propagate(eta: &Configuration, setup: &ExplorationSetup, x: Site, source: &SeedBall) -> Option<SeedBall> {
    let clip = setup.clip(x);
    let local = eta.filtered(|z, _| clip.contains(z));
    let idx = ClusterIndex::build(&local, |_, _| true);
    let reached = idx.labels_meeting(&Region::Ball { center: source.center.clone(), radius: source.radius });
    if reached.is_empty() {
        return None;
    }
    let cell = setup.cell(x);
    let mut best: Option<usize> = None;
    for i in 0..local.len() {
        let (z, r) = (local.center(i), local.radius(i));
        if r < setup.n || !cell.contains(z) {
            continue;
        }
        if reached.binary_search(&idx.label(i).expect("all participate")).is_err() {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => match r.total_cmp(&local.radius(b)) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => lex_less(z, local.center(b)),
            },
        };
        if better {
            best = Some(i);
        }
    }
    best.map(|i| SeedBall { center: local.center(i).to_vec(), radius: local.radius(i) })
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Less => return true,
            Ordering::Greater => return false,
            Ordering::Equal => {}
        }
    }
    false
}

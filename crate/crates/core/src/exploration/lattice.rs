//! Exploration with Bernoulli acceptance, and a plain site-percolation oracle.

use super::{site_key, ExplorationError, ExplorationOutcome, ExplorationState, SeedBall, Site};
use crate::connectivity::DisjointSets;
use crate::estimators::{Estimate, McSettings};
use crate::rng::{self, tag};

/// Uniform mark of site `x`. The same marks drive every `q`, so runs are coupled.
pub fn site_mark(seed: u64, x: Site) -> f64 {
    rng::unit(&mut rng::stream(seed, tag::ABSTRACT, site_key(x)))
}

/// Exploration where the site tested at step `t` is accepted when its mark is below `q(t, x)`.
pub fn run_abstract_exploration(
    q: impl Fn(u64, Site) -> f64,
    half_sites: i64,
    seed: u64,
) -> Result<ExplorationOutcome, ExplorationError> {
    if half_sites < 1 {
        return Err(ExplorationError::Precondition(format!("need M >= 1, got {half_sites}")));
    }
    let mut bad = None;
    let state = ExplorationState::new(half_sites, SeedBall { center: vec![0.0, 0.0], radius: 0.0 });
    let out = state.run(|t, x, _, _| {
        let p = q(t, x);
        if !(0.0..=1.0).contains(&p) {
            bad.get_or_insert(p);
            return None;
        }
        (site_mark(seed, x) < p).then(|| SeedBall { center: vec![x[0] as f64, x[1] as f64], radius: 0.0 })
    });
    match bad {
        Some(p) => Err(ExplorationError::Precondition(format!("acceptance probability {p} outside [0, 1]"))),
        None => Ok(out),
    }
}

/// Frequency with which the constant-`q` exploration reaches the boundary of `[-M, M]^2`.
pub fn percolation_frequency(q: f64, half_sites: i64, mc: &McSettings) -> Result<Estimate, ExplorationError> {
    mc.check()?;
    let hits: Result<Vec<bool>, _> = mc
        .run(|s, _| run_abstract_exploration(|_, _| q, half_sites, s).map(|o| o.reached_boundary))
        .into_iter()
        .collect();
    Ok(Estimate::bernoulli(&hits?, mc.seed, 0.0))
}

/// Whether the open cluster of the origin reaches the boundary of `[-M, M]^2`.
///
/// A site is open when its mark is below `q`; the origin is always open.
/// Computed by union-find over the whole box, independently of the frontier.
pub fn site_percolation_oracle(q: f64, half_sites: i64, seed: u64) -> bool {
    let m = half_sites;
    let side = (2 * m + 1) as usize;
    let id = |x: Site| ((x[0] + m) as usize) * side + (x[1] + m) as usize;
    let open = |x: Site| x == [0, 0] || site_mark(seed, x) < q;
    let mut dsu = DisjointSets::new(side * side);
    for a in -m..=m {
        for b in -m..=m {
            if !open([a, b]) {
                continue;
            }
            if a < m && open([a + 1, b]) {
                dsu.union(id([a, b]) as u32, id([a + 1, b]) as u32);
            }
            if b < m && open([a, b + 1]) {
                dsu.union(id([a, b]) as u32, id([a, b + 1]) as u32);
            }
        }
    }
    let root = dsu.find(id([0, 0]) as u32);
    (-m..=m).any(|k| {
        [[k, m], [k, -m], [m, k], [-m, k]]
            .into_iter()
            .any(|x| open(x) && dsu.find(id(x) as u32) == root)
    })
}

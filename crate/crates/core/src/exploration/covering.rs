//! Covering counts and the annulus-to-box seed comparison.

use super::ExplorationError;
use crate::connectivity::EventSpec;
use crate::estimators::{estimate_event, Estimate, McSettings};
use crate::geometry::Region;
use crate::measures::RadiusMeasure;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Angle around a centre on `∂B_ρ` within which a unit ball covers the whole
/// radial segment between `ρ` and `ρ + 1/2`. The outer end is the binding one.
fn cap_angle(rho: f64) -> f64 {
    let s = rho + 0.5;
    ((s * s + rho * rho - 1.0) / (2.0 * s * rho)).clamp(-1.0, 1.0).acos()
}

/// Number of `N`-balls centred on `∂B_{ρN}` used to cover `B_{(ρ+1/2)N} \ B_{ρN}`.
pub fn covering_number(dim: usize, rho: f64) -> Result<usize, ExplorationError> {
    covering_centers(dim, rho).map(|c| c.len())
}

/// Centres, at scale `N = 1`, of unit balls on `∂B_ρ` covering `B_{ρ+1/2} \ B_ρ`.
///
/// A point at radius `s` and direction `u` lies in the ball centred at `ρv`
/// exactly when the angle between `u` and `v` is at most the cap angle at `s`,
/// so the problem reduces to covering the unit sphere by caps. In the plane
/// `⌈π / w⌉` equally spaced caps are optimal. In three dimensions caps are
/// chosen greedily from a Fibonacci lattice so as to cover a finer Fibonacci
/// lattice with caps shrunk by its mesh.
pub fn covering_centers(dim: usize, rho: f64) -> Result<Vec<Vec<f64>>, ExplorationError> {
    if !(rho >= 1.0) {
        return Err(ExplorationError::Precondition(format!("covering needs rho >= 1, got {rho}")));
    }
    let w = cap_angle(rho);
    match dim {
        2 => {
            let m = (PI / w).ceil() as usize;
            Ok((0..m)
                .map(|k| {
                    let th = 2.0 * PI * k as f64 / m as f64;
                    vec![rho * th.cos(), rho * th.sin()]
                })
                .collect())
        }
        3 => Ok(greedy_sphere_cover(w, 2000, 10_000).into_iter().map(|u| u.iter().map(|a| rho * a).collect()).collect()),
        _ => Err(ExplorationError::Precondition(format!("covering implemented for d in {{2, 3}}, got {dim}"))),
    }
}

pub(crate) fn fibonacci_sphere(k: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..k)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / k as f64;
            let rad = (1.0 - y * y).sqrt();
            let th = golden * i as f64;
            [rad * th.cos(), y, rad * th.sin()]
        })
        .collect()
}

fn angle(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0).acos()
}

fn greedy_sphere_cover(w: f64, candidates: usize, tests: usize) -> Vec<[f64; 3]> {
    let cand = fibonacci_sphere(candidates);
    let pts = fibonacci_sphere(tests);
    // Twice the radius of a cap of area 4π/k; the tests check it exceeds the lattice mesh.
    let mesh = 2.0 * (4.0 / tests as f64).sqrt();
    let reach = w - mesh;
    assert!(reach > 0.0, "cap angle {w} too small for the test lattice");
    let covers: Vec<Vec<u32>> = cand
        .iter()
        .map(|c| (0..pts.len() as u32).filter(|&j| angle(c, &pts[j as usize]) <= reach).collect())
        .collect();
    let mut covered = vec![false; pts.len()];
    let mut left = pts.len();
    let mut chosen = Vec::new();
    while left > 0 {
        let (best, gain) = covers
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.iter().filter(|&&j| !covered[j as usize]).count()))
            .max_by_key(|&(i, g)| (g, std::cmp::Reverse(i)))
            .expect("candidates");
        assert!(gain > 0, "greedy cover stalled");
        for &j in &covers[best] {
            if !covered[j as usize] {
                covered[j as usize] = true;
                left -= 1;
            }
        }
        chosen.push(cand[best]);
    }
    chosen
}

/// Largest number of balls `B̃_x = 2Nx + B_{4√d N}`, `x ∈ Z^2`, sharing a point.
///
/// In lattice units the balls have radius `2√d`. Offsets are scanned on a
/// grid of step `1/256` in the unit cell and each count uses the radius
/// enlarged by half a grid diagonal, so the value bounds the true maximum.
pub fn overlap_multiplicity(dim: usize) -> usize {
    let steps = 256;
    let h = 1.0 / steps as f64;
    let reach = 2.0 * (dim as f64).sqrt() + h * std::f64::consts::FRAC_1_SQRT_2;
    let k = reach.ceil() as i64 + 1;
    let mut best = 0;
    for a in 0..=steps {
        for b in 0..=steps {
            let u = [a as f64 * h, b as f64 * h];
            let mut count = 0;
            for x in -k..=k + 1 {
                for y in -k..=k + 1 {
                    let (dx, dy) = (x as f64 - u[0], y as f64 - u[1]);
                    if dx * dx + dy * dy <= reach * reach {
                        count += 1;
                    }
                }
            }
            best = best.max(count);
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub dim: usize,
    pub n: f64,
    pub big_n: f64,
    pub rho: f64,
    pub z: Vec<f64>,
    /// Seed event over the annulus `B_{(ρ+1/2)N} \ B_{ρN}`.
    pub annulus: Estimate,
    /// Seed event over the box `z + Λ_N` through balls centred in `B_{3√d N}`.
    pub boxed: Estimate,
    pub covering: usize,
    /// `1 - (1 - annulus)^{1/c}`.
    pub implied_box_bound: f64,
}

impl CoveringReport {
    pub fn holds(&self, sigmas: f64) -> bool {
        self.boxed.value + sigmas * self.boxed.stderr >= self.implied_box_bound
    }
}

/// Seed events for `B_n` to reach the annulus and a box at distance `‖z‖`.
///
/// `z` defaults to `ρN e_1`.
#[allow(clippy::too_many_arguments)]
pub fn covering_seed_boost(
    dim: usize,
    n: f64,
    big_n: f64,
    rho: f64,
    z: Option<Vec<f64>>,
    lambda: f64,
    mu: &RadiusMeasure,
    mc: &McSettings,
) -> Result<CoveringReport, ExplorationError> {
    let sd = (dim as f64).sqrt();
    if !(1.0..=sd + 2.0).contains(&rho) {
        return Err(ExplorationError::Precondition(format!("rho must lie in [1, {}], got {rho}", sd + 2.0)));
    }
    let z = z.unwrap_or_else(|| {
        let mut v = vec![0.0; dim];
        v[0] = rho * big_n;
        v
    });
    let norm = z.iter().map(|a| a * a).sum::<f64>().sqrt();
    if z.len() != dim || !(big_n..=(sd + 2.0) * big_n).contains(&norm) {
        return Err(ExplorationError::Precondition(format!("need N <= |z| <= (sqrt(d)+2)N, got |z| = {norm}")));
    }
    let covering = covering_number(dim, rho)?;
    let annulus_ev = EventSpec::Seed { n, big_n, rho };
    annulus_ev.validate().map_err(|e| ExplorationError::Estimator(e.into()))?;
    let box_ev = EventSpec::GeneralSeed {
        source: vec![Region::ball_at_origin(dim, n)],
        target: Region::Cube { center: z.clone(), half: big_n },
        clip: Region::ball_at_origin(dim, 3.0 * sd * big_n),
        min_radius: n,
    };
    let annulus = estimate_event(&annulus_ev, lambda, mu, mc)?;
    let boxed = estimate_event(&box_ev, lambda, mu, mc)?;
    let implied_box_bound = 1.0 - (1.0 - annulus.value).powf(1.0 / covering as f64);
    Ok(CoveringReport { dim, n, big_n, rho, z, annulus, boxed, covering, implied_box_bound })
}

//! The boundary-count functional of a set around `B_n` and the correlation
//! length it defines.

use super::{Estimate, EstimatorError, McSettings};
use crate::connectivity::ClusterIndex;
use crate::geometry::Region;
use crate::measures::RadiusMeasure;
use crate::sampling::{CenterPolicy, Configuration, Sampler, SamplerSpec, Truncation, Window};
use serde::{Deserialize, Serialize};

/// Number of balls meeting `∂S` that are joined to `B_n` through balls
/// contained in `S`.
///
/// A ball meeting `∂S` counts when it meets `B_n` itself or meets a ball
/// whose inner cluster meets `B_n`.
pub fn phi_count(cfg: &Configuration, n: f64, s: &Region) -> u64 {
    let boundary = s.boundary().expect("set with a boundary");
    let core = Region::ball_at_origin(cfg.dim, n);
    let idx = ClusterIndex::build(cfg, |z, r| s.contains_ball(z, r));
    let labels = idx.labels_meeting(&core);
    let mut hit = vec![false; idx.participants()];
    for l in labels {
        hit[l as usize] = true;
    }
    cfg.iter()
        .filter(|(z, r)| boundary.meets_ball(z, *r))
        .filter(|(z, r)| core.meets_ball(z, *r) || idx.slots_meeting(z, *r).into_iter().any(|t| hit[idx.slot_label(t) as usize]))
        .count() as u64
}

fn phi_sampler(n: f64, s: &Region, lambda: f64, mu: &RadiusMeasure) -> Result<Sampler, EstimatorError> {
    let (_, hi) = mu.support();
    if hi > n * (1.0 + 1e-12) {
        return Err(EstimatorError::Precondition(format!("radius measure must be supported in [0, {n}], has {}", mu.describe())));
    }
    let core = Region::ball_at_origin(mu.dim, n);
    if !s.contains_ball(&vec![0.0; mu.dim], n) && *s != core {
        return Err(EstimatorError::Precondition("S must contain B_n".into()));
    }
    let rho = s.bounding_radius();
    if !rho.is_finite() || s.boundary().is_none() {
        return Err(EstimatorError::Precondition("S must be bounded".into()));
    }
    // balls meeting ∂S have centres within r of S, which the enlarged ball covers
    let spec = SamplerSpec::new(lambda, mu.clone(), Window::ball(mu.dim, rho))
        .centers(CenterPolicy::Enlarged)
        .truncation(Truncation::Fixed { r_max: hi, max_discarded: 0.0 });
    Ok(Sampler::new(spec)?)
}

/// Mean of [`phi_count`] under intensity `λ dz ⊗ μ` with `μ` carried by `[0, n]`.
pub fn estimate_phi(n: f64, s: &Region, lambda: f64, mu: &RadiusMeasure, mc: &McSettings) -> Result<Estimate, EstimatorError> {
    mc.check()?;
    let sampler = phi_sampler(n, s, lambda, mu)?;
    let values = mc.run(|seed, _| phi_count(&sampler.sample(seed), n, s) as f64);
    Ok(Estimate::mean(&values, mc.seed, 0.0))
}

/// Outcome of the concentric-ball search for the correlation length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationLength {
    /// First grid radius whose upper confidence bound on φ is at most `1/e`,
    /// or `+∞` when none qualifies.
    pub length: f64,
    /// Every radius examined with its φ estimate.
    pub grid: Vec<(f64, Estimate)>,
}

impl CorrelationLength {
    pub fn found(&self) -> bool {
        self.length.is_finite()
    }
}

/// Geometric grid `n, n q, n q², …` capped at `ell_max`, which is always included.
pub fn geometric_grid(n: f64, ell_max: f64, ratio: f64) -> Vec<f64> {
    assert!(ratio > 1.0, "grid ratio must exceed 1");
    let mut out = Vec::new();
    let mut s = n;
    while s < ell_max * (1.0 - 1e-12) {
        out.push(s);
        s *= ratio;
    }
    out.push(ell_max);
    out
}

/// Smallest ball radius `s` on a geometric grid in `[n, ell_max]` with
/// `φ(B_s) ≤ 1/e` at 95% confidence.
///
/// Only concentric balls are tried, so the result can exceed the infimum
/// over all sets.
pub fn correlation_length(
    n: f64,
    lambda: f64,
    mu: &RadiusMeasure,
    ell_max: f64,
    ratio: f64,
    mc: &McSettings,
) -> Result<CorrelationLength, EstimatorError> {
    if !(ell_max >= n) {
        return Err(EstimatorError::Precondition(format!("ell_max {ell_max} below n {n}")));
    }
    let threshold = (-1.0f64).exp();
    let mut grid = Vec::new();
    for s in geometric_grid(n, ell_max, ratio) {
        let e = estimate_phi(n, &Region::ball_at_origin(mu.dim, s), lambda, mu, mc)?;
        let pass = e.ci_hi <= threshold;
        grid.push((s, e));
        if pass {
            return Ok(CorrelationLength { length: s, grid });
        }
    }
    Ok(CorrelationLength { length: f64::INFINITY, grid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::unit_ball_volume;
    use crate::sampling::CoupledSampler;

    #[test]
    fn zero_intensity() {
        let mu = RadiusMeasure::point_mass(2, 1.0).unwrap();
        let s = Region::ball_at_origin(2, 5.0);
        let e = estimate_phi(3.0, &s, 0.0, &mu, &McSettings::new(20, 1)).unwrap();
        assert_eq!(e.value, 0.0);
        let l = correlation_length(3.0, 0.0, &mu, 20.0, 1.5, &McSettings::new(20, 1)).unwrap();
        assert_eq!(l.length, 3.0);
    }

    #[test]
    fn degenerate_set_counts_the_shell() {
        // with S = B_n every ball meeting the sphere counts
        let (n, r0, lambda) = (4.0, 1.0, 0.05);
        let mu = RadiusMeasure::point_mass(2, r0).unwrap();
        let s = Region::ball_at_origin(2, n);
        let e = estimate_phi(n, &s, lambda, &mu, &McSettings::new(4000, 2)).unwrap();
        let exact = lambda * unit_ball_volume(2) * ((n + r0).powi(2) - (n - r0).powi(2));
        assert!((e.value - exact).abs() <= 3.0 * e.stderr, "{} vs {exact} ± {}", e.value, e.stderr);
    }

    #[test]
    fn count_by_hand() {
        let w = Window::ball(2, 10.0);
        let cfg = Configuration::from_balls(
            w,
            &[
                (vec![1.5, 0.0], 1.0), // meets B_2, inner
                (vec![3.3, 0.0], 1.0), // chained inner ball
                (vec![5.2, 0.0], 1.0), // meets ∂B_6 through the chain
                (vec![0.0, 5.5], 1.0), // meets ∂B_6, isolated
                (vec![-1.0, 0.0], 5.5), // meets ∂B_6 and B_2 directly
            ],
        );
        let s = Region::ball_at_origin(2, 6.0);
        assert_eq!(phi_count(&cfg, 2.0, &s), 2);
    }

    #[test]
    fn requires_truncated_measure() {
        let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
        let s = Region::ball_at_origin(2, 5.0);
        assert!(estimate_phi(3.0, &s, 0.1, &mu, &McSettings::new(5, 1)).is_err());
    }

    #[test]
    fn coupled_counts_grow_with_intensity() {
        let mu = RadiusMeasure::truncated(2, 1.0, 3.0).unwrap();
        let s = Region::ball_at_origin(2, 6.0);
        let spec = SamplerSpec::new(0.6, mu, Window::ball(2, 6.0));
        let coupled = CoupledSampler::new(spec).unwrap();
        for seed in 0..40 {
            let (cfg, marks) = coupled.sampler.sample_marked(seed);
            let lo = phi_count(&coupled.thin(&cfg, &marks, 0.2, None), 3.0, &s);
            let hi = phi_count(&coupled.thin(&cfg, &marks, 0.6, None), 3.0, &s);
            assert!(lo <= hi);
        }
    }

    #[test]
    fn grid_endpoints() {
        assert_eq!(geometric_grid(2.0, 2.0, 2.0), vec![2.0]);
        assert_eq!(geometric_grid(2.0, 10.0, 2.0), vec![2.0, 4.0, 8.0, 10.0]);
    }
}

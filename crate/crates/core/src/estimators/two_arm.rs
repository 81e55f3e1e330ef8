//! Two-arm probabilities and the bad-ball void probability.

use super::event::event_sampler;
use super::{Estimate, EstimatorError, McSettings};
use crate::connectivity::{bad_balls, evaluate_unchecked, EventSpec};
use crate::measures::{unit_ball_volume, MeasureKind, RadiusMeasure};
use serde::{Deserialize, Serialize};

/// Volume of the parallel body `Λ_K ⊕ B_r` (Steiner's formula for a cube).
pub fn cube_parallel_volume(dim: usize, big_k: f64, r: f64) -> f64 {
    let mut binom = 1.0;
    let mut total = 0.0;
    for j in 0..=dim {
        total += binom * (2.0 * big_k).powi((dim - j) as i32) * unit_ball_volume(j) * r.powi(j as i32);
        binom = binom * (dim - j) as f64 / (j + 1) as f64;
    }
    total
}

/// `(dz ⊗ μ)(𝓑(Λ_K))`.
///
/// A ball of radius at most `K` meeting `Λ_K` has its centre inside
/// `Λ_{2K}`, so only radii above `K` contribute, each with the volume of
/// `Λ_K ⊕ B_r`.
pub fn bad_ball_mass(mu: &RadiusMeasure, big_k: f64) -> f64 {
    let d = mu.dim;
    if let MeasureKind::PointMass { radius } = mu.kind {
        return if radius > big_k { cube_parallel_volume(d, big_k, radius) } else { 0.0 };
    }
    let mut binom = 1.0;
    let mut total = 0.0;
    for j in 0..=d {
        total += binom * (2.0 * big_k).powi((d - j) as i32) * unit_ball_volume(j) * mu.partial_moment(j as f64, big_k, f64::INFINITY);
        binom = binom * (d - j) as f64 / (j + 1) as f64;
    }
    total
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoArmPoint {
    pub big_k: f64,
    /// Frequency of two disjoint crossing clusters once bad balls are removed.
    pub two_arm: Estimate,
    /// Frequency of at least one bad ball.
    pub bad: Estimate,
    /// `1 - exp(-λ (dz ⊗ μ)(𝓑(Λ_K)))`.
    pub bad_exact: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoArmReport {
    pub k: f64,
    pub lambda: f64,
    pub points: Vec<TwoArmPoint>,
    /// No two-arm estimate lies entirely above the previous one.
    pub decreasing_within_ci: bool,
}

/// Estimates the two-arm probability from `Λ_k` for each `K`, meant for
/// supercritical `λ`, along with the bad-ball probability.
pub fn two_arm_decay(k: f64, ks: &[f64], lambda: f64, mu: &RadiusMeasure, mc: &McSettings) -> Result<TwoArmReport, EstimatorError> {
    mc.check()?;
    let mut points = Vec::new();
    for &big_k in ks {
        let ev = EventSpec::TwoArm { k, big_k };
        let sampler = event_sampler(&ev, lambda, mu, mc.truncation)?;
        ev.check_window(&sampler.spec_config())?;
        let rows = mc.run(|seed, _| {
            let cfg = sampler.sample(seed);
            (evaluate_unchecked(&cfg, &ev), !bad_balls(&cfg, big_k).is_empty())
        });
        let a: Vec<bool> = rows.iter().map(|r| r.0).collect();
        let b: Vec<bool> = rows.iter().map(|r| r.1).collect();
        points.push(TwoArmPoint {
            big_k,
            // every ball the sampler leaves out is bad, so the two-arm indicator is exact
            two_arm: Estimate::bernoulli(&a, mc.seed, 0.0),
            bad: Estimate::bernoulli(&b, mc.seed, sampler.truncation_tail()),
            bad_exact: -(-lambda * bad_ball_mass(mu, big_k)).exp_m1(),
        });
    }
    let decreasing_within_ci = points.windows(2).all(|w| w[1].two_arm.ci_lo <= w[0].two_arm.ci_hi);
    Ok(TwoArmReport { k, lambda, points, decreasing_within_ci })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::sampling::{CenterPolicy, SamplerSpec, Sampler, Truncation, Window};
    use std::f64::consts::PI;

    #[test]
    fn steiner_in_the_plane() {
        // square of side 2K plus a strip of width r and quarter discs
        let (k, r) = (1.5, 2.0);
        assert!((cube_parallel_volume(2, k, r) - (9.0 + 4.0 * 3.0 * r + PI * r * r)).abs() < 1e-12);
    }

    #[test]
    fn bad_mass_by_quadrature() {
        let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
        let big_k = 2.0;
        // midpoint rule in u = 1/r on (0, 1/K]
        let m = 200_000;
        let h = 1.0 / big_k / m as f64;
        let quad: f64 = (0..m)
            .map(|i| {
                let u = (i as f64 + 0.5) * h;
                let r = 1.0 / u;
                cube_parallel_volume(2, big_k, r) * r.powf(-4.0) * r * r * h
            })
            .sum();
        assert!((bad_ball_mass(&mu, big_k) / quad - 1.0).abs() < 1e-6);
        let pm = RadiusMeasure::point_mass(2, 1.0).unwrap();
        assert_eq!(bad_ball_mass(&pm, 1.0), 0.0);
    }

    #[test]
    fn bad_ball_frequency_matches_void_probability() {
        let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
        let rep = two_arm_decay(1.0, &[2.0, 3.0], 0.8, &mu, &McSettings::new(1500, 4)).unwrap();
        for p in &rep.points {
            let (lo, hi) = p.bad.interval(0.99);
            assert!(lo <= p.bad_exact && p.bad_exact <= hi, "{p:?}");
            assert!((0.0..=1.0).contains(&p.two_arm.value));
        }
    }

    #[test]
    fn sampled_bad_count_matches_mass() {
        // direct check of the sampler against the Steiner integral
        let mu = RadiusMeasure::power_law(3, 1.5).unwrap();
        let big_k = 1.0;
        let spec = SamplerSpec::new(2.0, mu.clone(), Window::cube(3, big_k))
            .centers(CenterPolicy::Enlarged)
            .truncation(Truncation::Auto { max_discarded: 1e-4 });
        let s = Sampler::new(spec).unwrap();
        let reps = 3000u64;
        let total: usize = (0..reps).map(|i| bad_balls(&s.sample(rng::derive(5, 0, i)), big_k).len()).sum();
        let mean = total as f64 / reps as f64;
        let exact = 2.0 * bad_ball_mass(&mu, big_k);
        assert!((mean - exact).abs() < 4.0 * (exact / reps as f64).sqrt(), "{mean} vs {exact}");
    }
}

//! Event frequencies, single and coupled across parameters.

use super::{Estimate, EstimatorError, McSettings};
use crate::connectivity::{evaluate_event, EventSpec};
use crate::measures::RadiusMeasure;
use crate::sampling::{CoupledSampler, Sampler, SamplerSpec, Truncation};

/// Sampler drawing exactly what `ev` depends on.
///
/// Two-arm events discard every ball of radius above `K` as bad, so their
/// sampler is never cut off below `K`.
pub fn event_sampler(ev: &EventSpec, lambda: f64, mu: &RadiusMeasure, truncation: Truncation) -> Result<Sampler, EstimatorError> {
    ev.validate()?;
    let plan = ev.plan(mu.dim);
    let spec = SamplerSpec::new(lambda, mu.clone(), plan.window).centers(plan.centers).r_min(plan.r_min).truncation(truncation);
    let sampler = Sampler::new(spec.clone())?;
    if let EventSpec::TwoArm { big_k, .. } = ev {
        if sampler.r_max() < *big_k && mu.support().1 > *big_k {
            let budget = match truncation {
                Truncation::Auto { max_discarded } | Truncation::Fixed { max_discarded, .. } => max_discarded,
            };
            return Ok(Sampler::new(spec.truncation(Truncation::Fixed { r_max: *big_k, max_discarded: budget }))?);
        }
    }
    Ok(sampler)
}

/// Frequency of `ev` over independent configurations at intensity `λ dz ⊗ μ`.
pub fn estimate_event(ev: &EventSpec, lambda: f64, mu: &RadiusMeasure, mc: &McSettings) -> Result<Estimate, EstimatorError> {
    mc.check()?;
    let sampler = event_sampler(ev, lambda, mu, mc.truncation)?;
    // window problems are the same for every replica
    evaluate_event(&sampler.spec_config(), ev)?;
    let outcomes = mc.run(|seed, _| evaluate_event(&sampler.sample(seed), ev).expect("window checked"));
    Ok(Estimate::bernoulli(&outcomes, mc.seed, sampler.truncation_tail()))
}

/// Frequencies of `ev` at several `(λ, δ)` points from shared draws.
///
/// Every replica draws one configuration at the largest `λ` and smallest `δ`
/// and thins it to each point, so the curve inherits the monotonicity of the
/// event in each replica. `δ` must be `None` for point masses.
pub fn estimate_event_curve(
    ev: &EventSpec,
    mu: &RadiusMeasure,
    points: &[(f64, Option<f64>)],
    mc: &McSettings,
) -> Result<Vec<Estimate>, EstimatorError> {
    mc.check()?;
    ev.validate()?;
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let lambda_max = points.iter().map(|p| p.0).fold(0.0, f64::max);
    let delta_min = points.iter().filter_map(|p| p.1).reduce(f64::min);
    let dominating = match delta_min {
        Some(d) => mu.with_delta(d)?,
        None => mu.clone(),
    };
    let sampler = event_sampler(ev, lambda_max, &dominating, mc.truncation)?;
    evaluate_event(&sampler.spec_config(), ev)?;
    let tail = sampler.truncation_tail();
    let coupled = CoupledSampler::from_sampler(sampler);
    let rows = mc.run(|seed, _| {
        let (cfg, marks) = coupled.sampler.sample_marked(seed);
        points
            .iter()
            .map(|&(lambda, delta)| evaluate_event(&coupled.thin(&cfg, &marks, lambda, delta), ev).expect("window checked"))
            .collect::<Vec<bool>>()
    });
    Ok((0..points.len())
        .map(|j| {
            let col: Vec<bool> = rows.iter().map(|r| r[j]).collect();
            Estimate::bernoulli(&col, mc.seed, tail)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Region;
    use crate::measures::unit_ball_volume;

    #[test]
    fn zero_intensity_gives_zero() {
        let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
        let ev = EventSpec::Crossing { inner: 1.0, outer: 3.0 };
        let e = estimate_event(&ev, 0.0, &mu, &McSettings::new(50, 1)).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.ci_lo, 0.0);
    }

    #[test]
    fn dictator_matches_void_probability() {
        let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
        let ev = EventSpec::dictator(8.0, 2, 1.0);
        let e = estimate_event(&ev, 1.0, &mu, &McSettings::new(4000, 11)).unwrap();
        let exact = 1.0 - (-unit_ball_volume(2) / 3.0).exp();
        assert!((exact - 0.64899).abs() < 1e-4);
        let (lo, hi) = e.interval(0.99);
        assert!(lo <= exact && exact <= hi, "{e:?}");
    }

    #[test]
    fn dense_point_mass_crosses() {
        let mu = RadiusMeasure::point_mass(2, 1.0).unwrap();
        let ev = EventSpec::Crossing { inner: 0.0, outer: 2.0 };
        let e = estimate_event(&ev, 8.0, &mu, &McSettings::new(200, 3)).unwrap();
        assert!(e.ci_hi > 0.999 && e.value > 0.98, "{e:?}");
    }

    #[test]
    fn window_problems_propagate() {
        let mu = RadiusMeasure::point_mass(2, 1.0).unwrap();
        let ev = EventSpec::Connection {
            a: Region::origin(2),
            b: Region::ball_at_origin(2, 1.0),
            clip: None,
        };
        assert!(estimate_event(&ev, 1.0, &mu, &McSettings::new(5, 1)).is_err());
    }

    #[test]
    fn coupled_curve_is_monotone() {
        let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
        let ev = EventSpec::Crossing { inner: 1.0, outer: 4.0 };
        let pts = [(0.1, Some(1.0)), (0.2, Some(1.0)), (0.3, Some(1.0)), (0.3, Some(0.7))];
        let est = estimate_event_curve(&ev, &mu, &pts, &McSettings::new(300, 5)).unwrap();
        for w in est.windows(2) {
            assert!(w[0].acc.sum <= w[1].acc.sum, "{:?}", est.iter().map(|e| e.value).collect::<Vec<_>>());
        }
    }
}

//! Properties checked through the public API only.

use boolperc::connectivity::EventSpec;
use boolperc::estimators::{correlation_length, estimate_event};
use boolperc::exploration::{explore_with_process, overlap_multiplicity, ExplorationSetup, SprinkleParams};
use boolperc::rng::{self, tag};
use boolperc::stats::correlation;
use boolperc::{CenterPolicy, McSettings, RadiusMeasure, Sampler, SamplerSpec, Truncation, Window};

#[test]
fn disjoint_region_counts_are_uncorrelated() {
    let reps = 4000u64;
    for (d, delta, lambda) in [(2usize, 1.0, 2.0), (3, 0.5, 0.5)] {
        let mu = RadiusMeasure::power_law(d, delta).unwrap();
        let spec = SamplerSpec::new(lambda, mu, Window::cube(d, 1.5)).centers(CenterPolicy::WindowOnly);
        let s = Sampler::new(spec).unwrap();
        let (mut left, mut right_big) = (Vec::new(), Vec::new());
        for i in 0..reps {
            let cfg = s.sample(rng::derive(3, tag::SAMPLE, i));
            left.push(cfg.iter().filter(|(z, _)| z[0] < 0.0).count() as f64);
            right_big.push(cfg.iter().filter(|(z, r)| z[0] >= 0.0 && *r >= 1.5).count() as f64);
        }
        let c = correlation(&left, &right_big);
        assert!(c.abs() <= 4.0 / (reps as f64).sqrt(), "d={d}: correlation {c}");
    }
}

#[test]
fn large_phi_everywhere_forces_crossing_after_a_boost() {
    // disks of radius 1/2 below their critical intensity, with φ above 1/e on every grid ball
    let mu = RadiusMeasure::point_mass(2, 0.5).unwrap();
    let (n, big_n, lambda) = (1.0, 8.0, 1.0);
    let mc = McSettings::new(1000, 21);
    let cl = correlation_length(n, lambda, &mu, big_n, 2.0, &mc).unwrap();
    assert!(!cl.found());
    for (s, e) in &cl.grid {
        assert!(e.ci_lo > (-1.0f64).exp(), "phi(B_{s}) = {e:?}");
    }
    let boosted = 1.2 * lambda;
    let ev = EventSpec::Crossing { inner: n, outer: big_n };
    let e = estimate_event(&ev, boosted, &mu, &McSettings::new(2000, 22)).unwrap();
    let bound = (boosted - lambda) / (std::f64::consts::E * boosted);
    assert!(e.value >= bound - 3.0 * e.stderr, "{} vs {bound}", e.value);
}

#[test]
fn explored_process_is_dominated_by_the_boosted_intensity() {
    let setup = ExplorationSetup::new(2, 1.0, 2.0, 4);
    let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
    let (lambda, sprinkle) = (0.4, SprinkleParams::new(0.5, 0.4));
    let window = setup.window();
    let spec = SamplerSpec::new(lambda, mu.clone(), window.clone())
        .centers(CenterPolicy::WindowOnly)
        .truncation(Truncation::default());
    let sampler = Sampler::new(spec).unwrap();
    let r_max = sampler.r_max();
    let reps = 200u64;
    let counts: Vec<f64> = (0..reps)
        .map(|i| {
            let base = sampler.sample(rng::derive(5, tag::SAMPLE, i));
            let (_, eta) = explore_with_process(base, &mu, &setup, &sprinkle, i).unwrap();
            eta.iter().filter(|(z, _)| window.contains(z)).count() as f64
        })
        .collect();
    let mean = counts.iter().sum::<f64>() / reps as f64;
    let sd = (counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
    let kappa = overlap_multiplicity(2) as f64;
    let bound = (lambda + kappa * sprinkle.intensity()) * window.volume() * mu.mass(1.0, r_max);
    assert!(mean <= bound + 3.0 * sd / (reps as f64).sqrt(), "{mean} vs {bound}");
    // sprinkles were actually added
    assert!(mean > lambda * window.volume() * mu.mass(1.0, r_max));
}

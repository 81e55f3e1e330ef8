use super::*;
use crate::connectivity::{evaluate_event, EventSpec};
use crate::estimators::McSettings;
use crate::geometry::Region;
use crate::measures::RadiusMeasure;
use crate::sampling::{Configuration, Truncation, Window};
use crate::stats;
use proptest::prelude::*;

fn setup(m: i64) -> ExplorationSetup {
    ExplorationSetup::new(2, 1.0, 2.0, m)
}

#[test]
fn certain_acceptance_reaches_the_boundary() {
    let out = run_abstract_exploration(|_, _| 1.0, 6, 1).unwrap();
    assert!(out.reached_boundary);
    assert_eq!(out.rejected, 0);
    // Edges are taken from the lexicographically smallest accepted site, so (-1, 0)
    // overtakes the origin as soon as it is accepted.
    assert_eq!(out.queried()[..5], [[1, 0], [0, 1], [-1, 0], [-1, 1], [-2, 0]]);
}

#[test]
fn impossible_acceptance_rejects_the_four_neighbours() {
    let out = run_abstract_exploration(|_, _| 0.0, 6, 1).unwrap();
    assert!(!out.reached_boundary);
    assert_eq!((out.accepted, out.rejected), (1, 4));
    assert_eq!(out.queried(), vec![[1, 0], [0, 1], [-1, 0], [0, -1]]);
    assert_eq!(out.trace.iter().map(|s| s.frontier_size).collect::<Vec<_>>(), vec![4, 3, 2, 1]);
}

#[test]
fn out_of_range_probability_is_rejected() {
    assert!(run_abstract_exploration(|_, _| 1.5, 6, 1).is_err());
}

#[test]
fn exploration_agrees_with_the_site_percolation_oracle() {
    for &q in &[0.45, 0.6, 0.75] {
        for seed in 0..60 {
            let explored = run_abstract_exploration(|_, _| q, 12, seed).unwrap().reached_boundary;
            assert_eq!(explored, site_percolation_oracle(q, 12, seed), "q={q} seed={seed}");
        }
    }
}

#[test]
fn queried_marks_have_the_bernoulli_law() {
    let q = 0.6;
    let (mut hits, mut total) = (0u64, 0u64);
    for seed in 0..200 {
        let out = run_abstract_exploration(|_, _| q, 10, seed).unwrap();
        hits += out.trace.iter().filter(|s| s.accepted).count() as u64;
        total += out.trace.len() as u64;
    }
    let t = stats::chi_square(&[hits, total - hits], &[q * total as f64, (1.0 - q) * total as f64]);
    assert!(t.p_value > 1e-3, "{t:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn percolation_is_monotone_in_q(seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let r_lo = run_abstract_exploration(|_, _| lo, 8, seed).unwrap();
        let r_hi = run_abstract_exploration(|_, _| hi, 8, seed).unwrap();
        prop_assert!(!r_lo.reached_boundary || r_hi.reached_boundary);
    }

    #[test]
    fn explored_sets_are_disjoint_and_connected(seed in any::<u64>(), q in 0.3f64..0.9) {
        let out = run_abstract_exploration(|_, _| q, 6, seed).unwrap();
        let acc: std::collections::BTreeSet<Site> =
            std::iter::once([0, 0]).chain(out.trace.iter().filter(|s| s.accepted).map(|s| s.x_t)).collect();
        let rej: std::collections::BTreeSet<Site> = out.trace.iter().filter(|s| !s.accepted).map(|s| s.x_t).collect();
        prop_assert!(acc.is_disjoint(&rej));
        prop_assert_eq!(acc.len(), out.accepted);
        for s in &out.trace {
            prop_assert!(acc.contains(&s.from));
            prop_assert_eq!((s.x_t[0] - s.from[0]).abs() + (s.x_t[1] - s.from[1]).abs(), 1);
        }
    }
}

#[test]
fn empty_process_rejects_every_neighbour() {
    let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
    let out = run_exploration(0.0, &mu, &setup(4), &SprinkleParams::none(), Truncation::default(), 5).unwrap();
    assert!(!out.reached_boundary);
    assert_eq!((out.accepted, out.rejected), (1, 4));
}

#[test]
fn preconditions_are_checked() {
    let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
    let t = Truncation::default();
    let none = SprinkleParams::none();
    assert!(run_exploration(1.0, &mu, &ExplorationSetup::new(2, 1.0, 2.0, 3), &none, t, 0).is_err());
    assert!(run_exploration(1.0, &mu, &ExplorationSetup::new(2, 3.0, 2.0, 4), &none, t, 0).is_err());
}

/// Balls of radius 2.5 at every box centre `4x`: neighbours overlap and each meets `B_1`.
fn mega_balls(s: &ExplorationSetup) -> Configuration {
    let m = s.half_sites;
    let balls: Vec<(Vec<f64>, f64)> =
        (-m..=m).flat_map(|a| (-m..=m).map(move |b| [a, b])).map(|x| (s.center(x), 2.5)).collect();
    Configuration::from_balls(s.window(), &balls)
}

#[test]
fn forced_geometry_reaches_the_boundary() {
    let s = setup(5);
    let mu = RadiusMeasure::point_mass(2, 1.0).unwrap();
    let out = run_exploration_on(mega_balls(&s), &mu, &s, &SprinkleParams::none(), 0).unwrap();
    assert!(out.reached_boundary);
    assert_eq!(out.rejected, 0);
    for step in &out.trace {
        let b = step.seed_ball.as_ref().unwrap();
        assert_eq!(b.center, s.center(step.x_t));
        assert_eq!(b.radius, 2.5);
    }
}

#[test]
fn the_largest_connected_ball_is_chosen() {
    let s = setup(4);
    let mu = RadiusMeasure::point_mass(2, 1.0).unwrap();
    // Two candidates in Λ_(1,0) reachable from B_1: radius 3.5 wins over 3.2.
    let balls = vec![(vec![3.0, 1.0], 3.2), (vec![3.5, -1.5], 3.5), (vec![4.5, 0.0], 0.5)];
    let out = run_exploration_on(Configuration::from_balls(s.window(), &balls), &mu, &s, &SprinkleParams::none(), 0)
        .unwrap();
    let first = &out.trace[0];
    assert_eq!(first.x_t, [1, 0]);
    assert_eq!(first.seed_ball, Some(SeedBall { center: vec![3.5, -1.5], radius: 3.5 }));
}

#[test]
fn identical_seeds_give_identical_traces() {
    let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
    let sp = SprinkleParams::new(1.0, 0.3);
    let run = |seed| {
        let out = run_exploration(0.6, &mu, &setup(4), &sp, Truncation::default(), seed).unwrap();
        let mut buf = Vec::new();
        out.write_trace(&mut buf).unwrap();
        buf
    };
    let a = run(17);
    assert_eq!(a, run(17));
    assert_ne!(a, run(18));
    for line in String::from_utf8(a).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["t", "x_t", "accepted", "seed_ball", "frontier_size"] {
            assert!(v.get(key).is_some(), "missing {key} in {line}");
        }
    }
}

#[test]
fn supercritical_runs_reach_the_boundary() {
    let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
    let mc = McSettings::new(200, 41);
    let hits = mc.run(|seed, _| {
        run_exploration(1.5, &mu, &setup(4), &SprinkleParams::none(), Truncation::default(), seed)
            .unwrap()
            .reached_boundary
    });
    let est = crate::estimators::Estimate::bernoulli(&hits, 41, 0.0);
    assert!(est.ci_lo > 0.0, "{est:?}");
}

#[test]
fn sprinkled_balls_overlap_at_most_kappa_times() {
    let kappa = overlap_multiplicity(2);
    // Lattice points in a disc of radius 2√2 centred at a lattice point.
    assert!(kappa >= 25, "{kappa}");
    let s = setup(4);
    let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
    let out = run_exploration(1.0, &mu, &s, &SprinkleParams::new(1.0, 0.2), Truncation::default(), 3).unwrap();
    let queried = out.queried();
    let mut rng = crate::rng::stream(9, 0, 0);
    for _ in 0..20_000 {
        let y = [crate::rng::unit(&mut rng) * 40.0 - 20.0, crate::rng::unit(&mut rng) * 40.0 - 20.0];
        let k = queried.iter().filter(|&&x| s.clip(x).contains(&y)).count();
        assert!(k <= kappa);
    }
}

#[test]
fn planar_covering_count_and_coverage() {
    assert_eq!(covering_number(2, 1.0).unwrap(), 5);
    assert!(covering_number(2, 0.5).is_err());
    for &(d, rho) in &[(2usize, 1.0), (2, 2.5), (3, 1.0), (3, 3.7)] {
        let centers = covering_centers(d, rho).unwrap();
        let mut rng = crate::rng::stream(4, d as u64, 0);
        for _ in 0..20_000 {
            let mut u: Vec<f64> = (0..d).map(|_| crate::rng::normal(&mut rng)).collect();
            let n = u.iter().map(|a| a * a).sum::<f64>().sqrt();
            let s = rho + 0.5 * crate::rng::unit(&mut rng);
            u.iter_mut().for_each(|a| *a *= s / n);
            let covered = centers.iter().any(|c| crate::geometry::dist2(c, &u) <= 1.0);
            assert!(covered, "d={d} rho={rho} point {u:?} uncovered by {} balls", centers.len());
        }
    }
}

#[test]
fn fibonacci_mesh_is_below_the_shrink_margin() {
    let pts = covering::fibonacci_sphere(10_000);
    let margin = 2.0 * (4.0f64 / 10_000.0).sqrt();
    let mut rng = crate::rng::stream(5, 0, 0);
    for _ in 0..5_000 {
        let v: Vec<f64> = (0..3).map(|_| crate::rng::normal(&mut rng)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let u = [v[0] / n, v[1] / n, v[2] / n];
        let best = pts
            .iter()
            .map(|p| (p[0] * u[0] + p[1] * u[1] + p[2] * u[2]).clamp(-1.0, 1.0).acos())
            .fold(f64::INFINITY, f64::min);
        assert!(best < margin);
    }
}

#[test]
fn covering_boost_trivial_cases() {
    let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
    let mc = McSettings::new(20, 1);
    let r = covering_seed_boost(2, 1.0, 2.0, 1.0, None, 0.0, &mu, &mc).unwrap();
    assert_eq!((r.annulus.value, r.boxed.value), (0.0, 0.0));
    assert!(covering_seed_boost(2, 1.0, 2.0, 4.0, None, 0.5, &mu, &mc).is_err());

    // One ball centred at (ρ + 1/4)N e_1 reaching back over B_n realises both events.
    let (n, big_n, rho) = (1.0, 2.0, 1.0);
    let ball = (vec![(rho + 0.25) * big_n, 0.0], (rho + 0.25) * big_n);
    let cfg = Configuration::from_balls(Window::ball(2, 3.0 * 2f64.sqrt() * big_n), &[ball]);
    let annulus = EventSpec::Seed { n, big_n, rho };
    let boxed = EventSpec::GeneralSeed {
        source: vec![Region::ball_at_origin(2, n)],
        target: Region::Cube { center: vec![rho * big_n, 0.0], half: big_n },
        clip: Region::ball_at_origin(2, 3.0 * 2f64.sqrt() * big_n),
        min_radius: n,
    };
    assert!(evaluate_event(&cfg, &annulus).unwrap());
    assert!(evaluate_event(&cfg, &boxed).unwrap());
}

#[test]
fn covering_boost_box_clears_the_implied_bound() {
    let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
    let mc = McSettings::new(1500, 12);
    let r = covering_seed_boost(2, 1.0, 2.0, 1.0, None, 0.6, &mu, &mc).unwrap();
    assert!(r.annulus.value > 0.0 && r.annulus.value < 1.0, "{r:?}");
    assert!(r.holds(3.0), "{r:?}");
}

fn ball_geometry() -> SprinkleGeometry {
    SprinkleGeometry {
        a: Region::ball_at_origin(2, 1.0),
        room: Window::ball(2, 4.0),
        targets: Some(Region::sphere_at_origin(2, 3.5)),
        target_balls: None,
    }
}

#[test]
fn no_sprinkling_leaves_the_conditional_frequency_unchanged() {
    let mu = RadiusMeasure::point_mass(2, 0.5).unwrap();
    let mc = McSettings::new(600, 2);
    let r = sprinkling_gain(&ball_geometry(), 0.5, &mu, 0.0, Some(1.0), &mc).unwrap();
    assert_eq!(r.before, r.after);
    assert!(r.conditioning.value < 1.0);
}

#[test]
fn rare_conditioning_is_reported() {
    let mu = RadiusMeasure::point_mass(2, 0.5).unwrap();
    let mc = McSettings::new(200, 2);
    let err = sprinkling_gain(&ball_geometry(), 20.0, &mu, 1.0, Some(1.0), &mc).unwrap_err();
    assert!(matches!(err, ExplorationError::ConditioningTooRare { .. }), "{err:?}");
}

#[test]
fn sprinkling_clears_the_lemma_bound() {
    let mu = RadiusMeasure::point_mass(2, 0.5).unwrap();
    let mc = McSettings::new(2000, 6);
    let r = sprinkling_gain(&ball_geometry(), 0.5, &mu, 4.0, None, &mc).unwrap();
    assert!(r.hypothesis_holds(), "{r:?}");
    assert!(r.conclusion_holds(3.0), "{r:?}");
    assert!(r.after.value >= r.before.value);
}

#[test]
fn target_balls_only_count_from_the_base_process() {
    let geom = SprinkleGeometry {
        a: Region::ball_at_origin(2, 1.0),
        room: Window::ball(2, 6.0),
        targets: None,
        target_balls: Some((Region::ball_at_origin(2, 6.0), 2.0)),
    };
    // A chain of small balls from A to a big ball.
    let balls = vec![(vec![1.5, 0.0], 0.6), (vec![4.0, 0.0], 2.0)];
    let cfg = Configuration::from_balls(Window::ball(2, 6.0), &balls);
    assert!(geom.connects(&cfg, 2));
    assert!(!geom.connects(&cfg, 1));
}

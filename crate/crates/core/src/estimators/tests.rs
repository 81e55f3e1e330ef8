use super::*;
use crate::connectivity::EventSpec;
use crate::measures::RadiusMeasure;
use proptest::prelude::*;

#[test]
fn partitions_merge_to_the_full_run() {
    let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
    let ev = EventSpec::Crossing { inner: 1.0, outer: 3.0 };
    let full = estimate_event(&ev, 0.4, &mu, &McSettings::new(90, 8)).unwrap();
    let a = estimate_event(&ev, 0.4, &mu, &McSettings::new(30, 8)).unwrap();
    let b = estimate_event(&ev, 0.4, &mu, &McSettings::new(60, 8).offset(30)).unwrap();
    let merged = b.merge(&a);
    assert_eq!(merged.acc.count, full.acc.count);
    assert_eq!(merged.acc.sum, full.acc.sum);
    assert_eq!(merged.value, full.value);
}

#[test]
fn sequential_mode_reproduces_parallel_results() {
    let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
    let ev = EventSpec::Seed { n: 1.0, big_n: 2.0, rho: 1.0 };
    let mc = McSettings::new(40, 3);
    let par_run = estimate_event(&ev, 0.5, &mu, &mc).unwrap();
    let seq_run = crate::par::map_indexed_sequential(0, 40, |i| {
        let s = event_sampler(&ev, 0.5, &mu, mc.truncation).unwrap();
        crate::connectivity::evaluate_event(&s.sample(mc.replica_seed(i)), &ev).unwrap()
    });
    assert_eq!(par_run, Estimate::bernoulli(&seq_run, 3, par_run.bias_note));
}

#[test]
fn zero_replicas_rejected() {
    let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
    let ev = EventSpec::Crossing { inner: 1.0, outer: 3.0 };
    assert!(matches!(estimate_event(&ev, 0.4, &mu, &McSettings::new(0, 1)), Err(EstimatorError::Precondition(_))));
}

#[test]
fn wider_confidence_gives_wider_interval() {
    let e = Estimate::bernoulli(&[true, false, false, true, true, false, false], 0, 0.0);
    let (lo95, hi95) = (e.ci_lo, e.ci_hi);
    let (lo99, hi99) = e.interval(0.99);
    assert!(lo99 < lo95 && hi95 < hi99);
}

proptest! {
    #[test]
    fn bernoulli_interval_brackets_value(bits in proptest::collection::vec(any::<bool>(), 1..300)) {
        let e = Estimate::bernoulli(&bits, 0, 0.0);
        prop_assert!(e.ci_lo <= e.value + 1e-12 && e.value <= e.ci_hi + 1e-12);
        prop_assert!(e.stderr >= 0.0);
        prop_assert!(0.0 <= e.ci_lo && e.ci_hi <= 1.0);
    }

    #[test]
    fn mean_interval_brackets_value(xs in proptest::collection::vec(-1e3f64..1e3, 1..200)) {
        let e = Estimate::mean(&xs, 0, 0.0);
        prop_assert!(e.ci_lo <= e.value && e.value <= e.ci_hi);
        prop_assert!(e.stderr >= 0.0);
    }

    #[test]
    fn merge_is_commutative_and_associative(
        a in proptest::collection::vec(any::<bool>(), 1..50),
        b in proptest::collection::vec(any::<bool>(), 1..50),
        c in proptest::collection::vec(any::<bool>(), 1..50),
    ) {
        let (ea, eb, ec) = (Estimate::bernoulli(&a, 0, 0.0), Estimate::bernoulli(&b, 0, 0.0), Estimate::bernoulli(&c, 0, 0.0));
        prop_assert_eq!(ea.merge(&eb), eb.merge(&ea));
        prop_assert_eq!(ea.merge(&eb).merge(&ec), ea.merge(&eb.merge(&ec)));
    }
}

use super::*;
use proptest::prelude::*;

fn d(m: i64, e: u32) -> Dyadic {
    Dyadic::new(m, e)
}

fn quarter(n: usize) -> Vec<Dyadic> {
    vec![d(1, 2); n]
}

#[test]
fn dictator_and_constant_influences() {
    let f = BooleanFunction::dictator(3, vec![d(1, 3), d(3, 3), d(1, 1)]).unwrap();
    assert_eq!(f.influences(), vec![Dyadic::one(), Dyadic::zero(), Dyadic::zero()]);
    let c = BooleanFunction::constant(3, true, quarter(3)).unwrap();
    assert!(c.influences().iter().all(Dyadic::is_zero));
}

#[test]
fn and_of_two_quarter_bits() {
    let f = BooleanFunction::and(2, quarter(2)).unwrap();
    assert_eq!(f.influence(0), d(1, 2));
}

#[test]
fn talagrand_dictator_quarter() {
    let f = BooleanFunction::dictator(1, quarter(1)).unwrap();
    let t = talagrand_check(&f);
    assert!((t.lhs - 0.25 * 4f64.ln()).abs() < 1e-15);
    assert_eq!(t.variance, 3.0 / 16.0);
    assert_eq!(t.max_term, 0.25);
    assert!((t.implied_c - 4.0 / 3.0).abs() < 1e-12);
}

#[test]
fn talagrand_constant_is_degenerate() {
    let t = talagrand_check(&BooleanFunction::constant(2, false, quarter(2)).unwrap());
    assert!(t.degenerate && t.implied_c == f64::INFINITY);
}

#[test]
fn majority_of_three_fair_bits() {
    let f = BooleanFunction::majority(3, vec![d(1, 1); 3]).unwrap();
    assert_eq!(f.influences(), vec![d(1, 1); 3]);
    assert_eq!(f.variance(), d(1, 2));
    let t = talagrand_check(&f);
    // Σ (1/2) ln 2 (1/2) over three bits, against (1/4) ln 4
    assert!((t.lhs - 0.75 * 2f64.ln()).abs() < 1e-15);
    assert!((t.implied_c - 1.5).abs() < 1e-12);
}

#[test]
fn probabilities_above_one_half_are_rejected() {
    assert!(BooleanFunction::dictator(1, vec![d(3, 2)]).is_err());
    assert!(BooleanFunction::dictator(1, vec![Dyadic::zero()]).is_err());
    assert!(Table::from_fn(25, |_| false).is_err());
}

#[test]
fn fair_bit_lift_is_a_relabelling() {
    for id in 0..256 {
        let f = BooleanFunction::uniform(Table::numbered(3, id).unwrap());
        let l = f.lift().unwrap();
        assert_eq!(l.function.table(), f.table());
    }
}

#[test]
fn quarter_lift_is_an_and() {
    let f = BooleanFunction::dictator(1, quarter(1)).unwrap();
    let l = f.lift().unwrap();
    let and = Table::from_fn(2, |x| x == 3).unwrap();
    assert_eq!(l.function.table(), &and);
}

#[test]
fn flip_probabilities_for_small_depths() {
    let q = DyadicBit { m: 1, ell: 2 };
    assert_eq!(q.flip_probability(1), d(1, 1));
    assert_eq!(q.flip_bound(1), d(1, 1));
    assert_eq!(q.flip_probability(2), d(1, 1));
    assert_eq!(q.flip_bound(2), d(1, 1));
    let h = DyadicBit { m: 1, ell: 1 };
    assert_eq!(h.flip_probability(1), Dyadic::one());
    assert_eq!(DyadicBit { m: 3, ell: 3 }.j_star(), 1);
    assert_eq!(DyadicBit { m: 1, ell: 3 }.j_star(), 3);
    assert_eq!(DyadicBit { m: 1, ell: 1 }.j_star(), 1);
}

#[test]
fn encoded_bits_have_the_target_law() {
    // enumerate the fair bits and compare the law of (Y_1, ..., Y_N) with the product measure
    let p = vec![d(3, 3), d(1, 2), d(5, 4)];
    let f = BooleanFunction::constant(3, false, p.clone()).unwrap();
    let l = f.lift().unwrap();
    let total: u32 = f.depth().iter().sum();
    let mut counts = [0u64; 8];
    for y in 0..1usize << total {
        let mut x = 0;
        for (i, enc) in l.encoders.iter().enumerate() {
            if enc.y((y >> l.offsets[i]) as u64 & ((1 << enc.ell) - 1)) {
                x |= 1 << i;
            }
        }
        counts[x] += 1;
    }
    for (x, &c) in counts.iter().enumerate() {
        let mut want = Dyadic::one();
        for (i, pi) in p.iter().enumerate() {
            want = &want * &(if x >> i & 1 == 1 { pi.clone() } else { pi.one_minus() });
        }
        assert_eq!(Dyadic::new(c, total), want, "pattern {x}");
    }
}

#[test]
fn full_space_on_three_bits() {
    let grid = [d(1, 3), d(1, 2), d(3, 3), d(1, 1)];
    let mut min_c = f64::INFINITY;
    for id in 0..256u64 {
        let table = Table::numbered(3, id).unwrap();
        for a in &grid {
            for b in &grid {
                for c in &grid {
                    let f = BooleanFunction::new(table.clone(), vec![a.clone(), b.clone(), c.clone()]).unwrap();
                    let lifted = f.lift().unwrap();
                    assert_eq!(lifted.function.variance(), f.variance());
                    for i in 0..3 {
                        let rep = encoding_bounds_check(&f, &lifted, i);
                        assert!(rep.all_hold(), "f={id} p=({a},{b},{c}) {rep:?}");
                    }
                    let t = talagrand_check(&f);
                    if !t.degenerate {
                        min_c = min_c.min(t.implied_c);
                    }
                }
            }
        }
    }
    assert!(min_c > 0.0 && min_c.is_finite());
}

#[test]
fn big_tables_sum_in_chunks() {
    let n = 16;
    let f = BooleanFunction::majority(n + 1, vec![d(1, 1); n + 1]).unwrap();
    // a fair majority on an odd number of bits is balanced
    assert_eq!(f.prob_one(), d(1, 1));
    let g = BooleanFunction::uniform(Table::from_fn(n + 1, |x| x.count_ones() as usize * 2 > n + 1).unwrap());
    assert_eq!(f.influence(3), g.influence(3));
}

fn dyadic_p() -> impl Strategy<Value = Dyadic> {
    (1u32..=4).prop_flat_map(|ell| (1u64..=(1 << (ell - 1))).prop_map(move |m| Dyadic::new(m, ell)))
}

proptest! {
    #[test]
    fn lift_preserves_variance_and_identities(id in 0u64..1 << 16, p in proptest::collection::vec(dyadic_p(), 4)) {
        let f = BooleanFunction::new(Table::numbered(4, id).unwrap(), p).unwrap();
        let lifted = f.lift().unwrap();
        prop_assert_eq!(lifted.function.variance(), f.variance());
        for i in 0..4 {
            let rep = encoding_bounds_check(&f, &lifted, i);
            prop_assert!(rep.all_hold(), "{:?}", rep);
        }
    }

    #[test]
    fn russo_formula_holds_exactly(id in 0u64..1 << 8, p in proptest::collection::vec(dyadic_p(), 3), i in 0usize..3, h in 1i64..8) {
        let f = BooleanFunction::new(Table::numbered(3, id).unwrap(), p.clone()).unwrap();
        let step = Dyadic::new(h, 4);
        let g = f.with_p(i, &p[i] + &step).unwrap();
        let lhs = &g.prob_one() - &f.prob_one();
        prop_assert_eq!(lhs, &step * &f.signed_pivotal(i));
        // for an increasing function the derivative is the influence
        let monotone = (0..8usize).all(|x| (0..3).all(|k| !f.table().get(x) || f.table().get(x | 1 << k)));
        if monotone {
            prop_assert_eq!(f.signed_pivotal(i), f.influence(i));
        }
    }
}

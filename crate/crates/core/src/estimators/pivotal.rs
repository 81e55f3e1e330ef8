//! Pivotality integrals, the δ-derivative they give, and the Talagrand-type ratio.

use super::event::event_sampler;
use super::{Estimate, EstimatorError, McSettings};
use crate::connectivity::{evaluate_unchecked, EventProbe, EventSpec};
use crate::measures::{unit_ball_volume, CellLaw, RadiusMeasure};
use crate::rng::{self, tag};
use crate::sampling::CoupledSampler;
use rand::Rng;
use serde::{Deserialize, Serialize};

fn require_increasing(ev: &EventSpec) -> Result<(), EstimatorError> {
    if !ev.is_increasing() {
        return Err(crate::connectivity::EventError::NotIncreasing.into());
    }
    Ok(ev.validate()?)
}

fn power_law(mu: &RadiusMeasure) -> Result<f64, EstimatorError> {
    mu.delta().ok_or_else(|| EstimatorError::Precondition("needs a power-law radius measure".into()))
}

/// `Piv_n^x(E)`: the `dz ⊗ μ_δ` mass of insertions from the cell
/// `(x + [0,1)^d) × [n, n+1)` that switch `E` on.
///
/// Each replica averages the pivotal indicator over `draws` insertions and
/// multiplies by the cell mass `g(n)`.
pub fn estimate_pivotal(
    ev: &EventSpec,
    x: &[f64],
    n: u32,
    lambda: f64,
    mu: &RadiusMeasure,
    draws: u64,
    mc: &McSettings,
) -> Result<Estimate, EstimatorError> {
    mc.check()?;
    require_increasing(ev)?;
    let delta = power_law(mu)?;
    let law = CellLaw::new(n, delta, mu.dim);
    let sampler = event_sampler(ev, lambda, mu, mc.truncation)?;
    ev.check_window(&sampler.spec_config())?;
    let draws = draws.max(1);
    let values = mc.run(|seed, _| {
        let cfg = sampler.sample(seed);
        let probe = EventProbe::new_unchecked(&cfg, ev);
        if probe.base() {
            return 0.0;
        }
        let mut r = rng::stream(seed, tag::INSERT, 0);
        let mut z = vec![0.0; x.len()];
        let hits = (0..draws)
            .filter(|_| {
                for (zi, xi) in z.iter_mut().zip(x) {
                    *zi = xi + rng::unit(&mut r);
                }
                probe.with_ball(&z, law.inverse(rng::unit(&mut r)))
            })
            .count();
        law.g() * hits as f64 / draws as f64
    });
    Ok(Estimate::mean(&values, mc.seed, sampler.truncation_tail()))
}

/// Mecke-form estimate of `∂P_δ(E)/∂δ` with its truncation bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaDerivative {
    pub estimate: Estimate,
    /// Largest inserted radius.
    pub r_max: f64,
    /// Bound on the contribution of insertions above `r_max`.
    pub tail_bound: f64,
}

/// `λ ∫_{r > a} α_d (ρ + r)^d ln r dμ(r)`, or with `ρ` alone when the
/// influence ball does not grow with `r`.
fn log_tail(lambda: f64, mu: &RadiusMeasure, rho: f64, grows: bool, a: f64) -> f64 {
    let d = mu.dim;
    let alpha = unit_ball_volume(d);
    if !grows {
        return lambda * alpha * rho.powi(d as i32) * mu.log_partial_moment(0.0, a, f64::INFINITY);
    }
    let mut total = 0.0;
    let mut binom = 1.0;
    for k in 0..=d {
        total += binom * rho.powi((d - k) as i32) * mu.log_partial_moment(k as f64, a, f64::INFINITY);
        binom = binom * (d - k) as f64 / (k + 1) as f64;
    }
    lambda * alpha * total
}

/// `∂P_δ(E)/∂δ = -λ ∫ P(η ∉ E, η ∪ {(z,r)} ∈ E) ln r dz dμ_δ(r)`.
///
/// Insertions are stratified over radius bands up to the smallest `r_max`
/// whose tail bound is at most `tail_budget`; within a band the centre is
/// uniform on the influence ball at the band's top radius. Draws are spread
/// over bands in proportion to each band's weight `vol · mass · ln b`.
pub fn delta_derivative(
    ev: &EventSpec,
    lambda: f64,
    mu: &RadiusMeasure,
    draws: u64,
    tail_budget: f64,
    mc: &McSettings,
) -> Result<DeltaDerivative, EstimatorError> {
    mc.check()?;
    require_increasing(ev)?;
    power_law(mu)?;
    let d = mu.dim;
    let infl = ev.influence(d);
    let (support_lo, support_hi) = mu.support();
    let r_lo = support_lo.max(ev.relevant_r_min()).max(1.0);
    let mut r_max = (2.0 * r_lo).min(support_hi);
    while r_max < support_hi && log_tail(lambda, mu, infl.radius, infl.grows, r_max) > tail_budget {
        r_max = (r_max * 2.0).min(support_hi);
    }
    let tail_bound = if r_max >= support_hi { 0.0 } else { log_tail(lambda, mu, infl.radius, infl.grows, r_max) };
    let sampler = event_sampler(ev, lambda, mu, mc.truncation)?;
    ev.check_window(&sampler.spec_config())?;
    let alpha = unit_ball_volume(d);
    // strata with their weight bound and share of the draws
    let bands: Vec<(f64, f64, f64, f64)> = mu
        .bands(r_lo, r_max)
        .into_iter()
        .map(|(a, b)| {
            let radius = infl.at(b);
            let vol = alpha * radius.powi(d as i32);
            (a, b, radius, vol * mu.mass(a, b))
        })
        .filter(|band| band.3 > 0.0 && band.1 > 1.0)
        .collect();
    let weights: Vec<f64> = bands.iter().map(|b| b.3 * b.1.ln()).collect();
    let total_weight: f64 = weights.iter().sum();
    let draws = draws.max(bands.len() as u64);
    let alloc: Vec<u64> = weights.iter().map(|w| ((w / total_weight) * draws as f64).ceil().max(1.0) as u64).collect();
    let values = mc.run(|seed, _| {
        if lambda == 0.0 {
            return 0.0;
        }
        let cfg = sampler.sample(seed);
        let probe = EventProbe::new_unchecked(&cfg, ev);
        if probe.base() {
            return 0.0;
        }
        let mut r = rng::stream(seed, tag::INSERT, 0);
        let mut z = vec![0.0; d];
        let mut integral = 0.0;
        for (band, &k) in bands.iter().zip(&alloc) {
            let (a, b, radius, mass) = *band;
            let mut sum = 0.0;
            for _ in 0..k {
                uniform_in_ball(&mut r, radius, &mut z);
                let rad = mu.sample_in(rng::unit(&mut r), a, b);
                if probe.with_ball(&z, rad) {
                    sum += rad.ln();
                }
            }
            integral += mass * sum / k as f64;
        }
        -lambda * integral
    });
    let bias = sampler.truncation_tail() + tail_bound;
    Ok(DeltaDerivative { estimate: Estimate::mean(&values, mc.seed, bias), r_max, tail_bound })
}

fn uniform_in_ball<R: Rng + ?Sized>(r: &mut R, radius: f64, out: &mut [f64]) {
    let d = out.len();
    if d <= 3 {
        loop {
            let mut n2 = 0.0;
            for x in out.iter_mut() {
                *x = 2.0 * rng::unit(r) - 1.0;
                n2 += *x * *x;
            }
            if n2 <= 1.0 {
                break;
            }
        }
    } else {
        // rejection from the cube gets expensive, so use a Gaussian direction
        let mut g2 = 0.0;
        for x in out.iter_mut() {
            *x = rng::normal(r);
            g2 += *x * *x;
        }
        let scale = rng::unit(r).powf(1.0 / d as f64) / g2.sqrt();
        out.iter_mut().for_each(|x| *x *= scale);
    }
    out.iter_mut().for_each(|x| *x *= radius);
}

/// Coupled central difference `[P_{δ-h}(E) - P_{δ+h}(E)] / (2h)`.
///
/// Both configurations are thinned from one draw at `δ - h`, so each
/// replica contributes `0` or `±1/(2h)`. The result estimates `-∂P/∂δ`.
pub fn finite_difference_delta(
    ev: &EventSpec,
    lambda: f64,
    mu: &RadiusMeasure,
    h: f64,
    mc: &McSettings,
) -> Result<Estimate, EstimatorError> {
    mc.check()?;
    ev.validate()?;
    let delta = power_law(mu)?;
    if !(h > 0.0 && h < delta) {
        return Err(EstimatorError::Precondition(format!("step {h} must lie in (0, delta)")));
    }
    let low = mu.with_delta(delta - h)?;
    let sampler = event_sampler(ev, lambda, &low, mc.truncation)?;
    ev.check_window(&sampler.spec_config())?;
    let tail = sampler.truncation_tail();
    let coupled = CoupledSampler::from_sampler(sampler);
    let values = mc.run(|seed, _| {
        let (cfg, marks) = coupled.sampler.sample_marked(seed);
        let a = evaluate_unchecked(&cfg, ev) as u8 as f64;
        let b = evaluate_unchecked(&coupled.thin(&cfg, &marks, lambda, Some(delta + h)), ev) as u8 as f64;
        (a - b) / (2.0 * h)
    });
    Ok(Estimate::mean(&values, mc.seed, tail))
}

/// Terms of `Σ ln n · Piv_n^x(E) ≥ C₀ P(E)(1 - P(E)) ln(1 / max Piv)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TalagrandReport {
    /// `Σ_{x,n} ln n · Piv_n^x(E)` over the cells examined.
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub probability: Estimate,
    pub max_piv: f64,
    /// `P(1 - P) ln(1 / max Piv)`.
    pub rhs_factor: f64,
    /// `lhs / rhs_factor`; `None` when the right side vanishes.
    pub ratio: Option<f64>,
    pub cells: usize,
}

impl TalagrandReport {
    /// A zero right side satisfies the inequality for any constant.
    pub fn degenerate(&self) -> bool {
        self.ratio.is_none()
    }

    pub fn holds(&self) -> bool {
        self.ratio.is_none_or(|r| r > 0.0)
    }
}

/// Cells `(x, n)` whose insertions can affect `E`, by increasing `n` and
/// then lexicographic `x`, at most `budget` of them.
pub fn relevant_cells(ev: &EventSpec, dim: usize, r_lo: f64, budget: usize) -> Vec<(Vec<i64>, u32)> {
    let infl = ev.influence(dim);
    let mut out = Vec::new();
    let mut n = r_lo.floor().max(1.0) as u32;
    while out.len() < budget {
        let reach = infl.at(n as f64 + 1.0);
        let m = reach.ceil() as i64;
        let mut x = vec![-m; dim];
        'cells: loop {
            // nearest point of the unit cube x + [0,1)^d to the origin
            let near: f64 = x.iter().map(|&c| {
                let c = c as f64;
                let t = if c > 0.0 { c } else if c + 1.0 < 0.0 { c + 1.0 } else { 0.0 };
                t * t
            }).sum();
            if near <= reach * reach {
                out.push((x.clone(), n));
                if out.len() >= budget {
                    break 'cells;
                }
            }
            let mut i = dim;
            loop {
                if i == 0 {
                    break 'cells;
                }
                i -= 1;
                if x[i] < m - 1 {
                    x[i] += 1;
                    break;
                }
                x[i] = -m;
            }
        }
        n += 1;
        if n > 1 << 20 {
            break;
        }
    }
    out
}

/// Estimates both sides of the Talagrand-type inequality over the first
/// `cell_budget` relevant cells.
pub fn talagrand_diagnostic(
    ev: &EventSpec,
    lambda: f64,
    mu: &RadiusMeasure,
    cell_budget: usize,
    draws: u64,
    mc: &McSettings,
) -> Result<TalagrandReport, EstimatorError> {
    mc.check()?;
    require_increasing(ev)?;
    let delta = power_law(mu)?;
    let d = mu.dim;
    let sampler = event_sampler(ev, lambda, mu, mc.truncation)?;
    ev.check_window(&sampler.spec_config())?;
    let cells = relevant_cells(ev, d, ev.relevant_r_min().max(1.0), cell_budget);
    let laws: Vec<CellLaw> = cells.iter().map(|c| CellLaw::new(c.1, delta, d)).collect();
    let draws = draws.max(1);
    let rows = mc.run(|seed, _| {
        let cfg = sampler.sample(seed);
        let probe = EventProbe::new_unchecked(&cfg, ev);
        let base = probe.base();
        let mut pivs = vec![0.0; cells.len()];
        if !base {
            let mut r = rng::stream(seed, tag::INSERT, 0);
            let mut z = vec![0.0; d];
            for ((x, _), (law, p)) in cells.iter().zip(laws.iter().zip(pivs.iter_mut())) {
                let mut hits = 0u64;
                for _ in 0..draws {
                    for (zi, &xi) in z.iter_mut().zip(x) {
                        *zi = xi as f64 + rng::unit(&mut r);
                    }
                    hits += probe.with_ball(&z, law.inverse(rng::unit(&mut r))) as u64;
                }
                *p = law.g() * hits as f64 / draws as f64;
            }
        }
        (base, pivs)
    });
    let outcomes: Vec<bool> = rows.iter().map(|r| r.0).collect();
    let probability = Estimate::bernoulli(&outcomes, mc.seed, sampler.truncation_tail());
    let reps = rows.len() as f64;
    let mean_piv: Vec<f64> = (0..cells.len()).map(|j| rows.iter().map(|r| r.1[j]).sum::<f64>() / reps).collect();
    let lhs_per: Vec<f64> = rows
        .iter()
        .map(|r| cells.iter().zip(&r.1).map(|(c, p)| (c.1 as f64).ln() * p).sum::<f64>())
        .collect();
    let lhs_est = Estimate::mean(&lhs_per, mc.seed, 0.0);
    let max_piv = mean_piv.iter().copied().fold(0.0, f64::max);
    let p = probability.value;
    let rhs_factor = if max_piv > 0.0 && max_piv < 1.0 { p * (1.0 - p) * (1.0 / max_piv).ln() } else { 0.0 };
    let ratio = (rhs_factor > 0.0).then(|| lhs_est.value / rhs_factor);
    Ok(TalagrandReport { lhs: lhs_est.value, lhs_stderr: lhs_est.stderr, probability, max_piv, rhs_factor, ratio, cells: cells.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn some_ball(n: f64) -> EventSpec {
        EventSpec::BigBall { n, threshold: 1e-9 }
    }

    #[test]
    fn empty_configuration_makes_every_insertion_pivotal() {
        let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
        let e = estimate_pivotal(&some_ball(10.0), &[0.0, 0.0], 2, 0.0, &mu, 50, &McSettings::new(10, 1)).unwrap();
        let g = CellLaw::new(2, 1.0, 2).g();
        assert!((e.value - g).abs() < 1e-15);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn distant_cells_are_never_pivotal() {
        let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
        let ev = EventSpec::Seed { n: 1.0, big_n: 2.0, rho: 1.0 };
        let e = estimate_pivotal(&ev, &[50.0, 50.0], 1, 0.5, &mu, 50, &McSettings::new(20, 1)).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn pivotal_cells_sum_to_the_intensity_derivative() {
        // for F, dP/dλ = e^{-m} m / λ, and the pivotal mass of all cells equals it
        let (n, t, lambda, delta) = (3.0, 2.0, 0.7, 1.0);
        let mu = RadiusMeasure::power_law(2, delta).unwrap();
        let ev = EventSpec::BigBall { n, threshold: t };
        let s = 2.0 + delta;
        let m = lambda * unit_ball_volume(2) * n * n * t.powf(-s) / s;
        let exact = (-m).exp() * m / lambda;
        let cells = relevant_cells(&ev, 2, t, 36 * 12);
        let mut total = 0.0;
        let mut var = 0.0;
        for (j, (x, k)) in cells.iter().enumerate() {
            let xf: Vec<f64> = x.iter().map(|&c| c as f64).collect();
            let e = estimate_pivotal(&ev, &xf, *k, lambda, &mu, 40, &McSettings::new(40, j as u64)).unwrap();
            total += e.value;
            var += e.stderr * e.stderr;
        }
        // cells above the budget hold radii beyond the last band
        let last = cells.last().unwrap().1 as f64 + 1.0;
        let missing = (-m).exp() * unit_ball_volume(2) * n * n * mu.mass(last, f64::INFINITY);
        assert!((total + missing - exact).abs() <= 3.0 * var.sqrt() + 0.02 * exact, "{total} + {missing} vs {exact}");
    }

    #[test]
    fn derivative_of_dictator_matches_closed_form() {
        let (n, lambda, delta) = (8.0, 1.0, 1.0);
        let mu = RadiusMeasure::power_law(2, delta).unwrap();
        let ev = EventSpec::dictator(n, 2, delta);
        let t = n.powf(2.0 / 3.0);
        let s = 3.0;
        let m = lambda * unit_ball_volume(2) * n * n * t.powf(-s) / s;
        let exact = -(-m).exp() * m * (t.ln() + 1.0 / s);
        let mc = McSettings::new(400, 5);
        let dd = delta_derivative(&ev, lambda, &mu, 200, 1e-4, &mc).unwrap();
        let e = &dd.estimate;
        assert!((e.value - exact).abs() <= 3.0 * e.stderr + dd.tail_bound, "{} ± {} vs {exact}", e.value, e.stderr);
    }

    #[test]
    fn derivative_vanishes_without_balls() {
        let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
        let ev = EventSpec::Seed { n: 1.0, big_n: 2.0, rho: 1.0 };
        let dd = delta_derivative(&ev, 0.0, &mu, 20, 1e-3, &McSettings::new(5, 1)).unwrap();
        assert_eq!(dd.estimate.value, 0.0);
    }

    #[test]
    fn finite_difference_is_nonnegative_per_replica() {
        let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
        let ev = EventSpec::Seed { n: 1.0, big_n: 2.0, rho: 1.0 };
        let e = finite_difference_delta(&ev, 0.5, &mu, 0.05, &McSettings::new(200, 2)).unwrap();
        assert!(e.acc.sum >= 0.0);
    }

    #[test]
    fn talagrand_degenerate_and_positive() {
        let mu = RadiusMeasure::power_law(2, 1.0).unwrap();
        let none = talagrand_diagnostic(&some_ball(2.0), 0.0, &mu, 8, 4, &McSettings::new(10, 1)).unwrap();
        assert!(none.degenerate() && none.holds());
        let ev = EventSpec::Seed { n: 1.0, big_n: 2.0, rho: 1.0 };
        let rep = talagrand_diagnostic(&ev, 0.4, &mu, 60, 8, &McSettings::new(60, 4)).unwrap();
        assert!(rep.holds());
        assert!(rep.ratio.is_some_and(|r| r.is_finite() && r > 0.0), "{rep:?}");
    }

    #[test]
    fn cells_cover_the_influence_ball() {
        let ev = EventSpec::BigBall { n: 2.0, threshold: 1.0 };
        let cells = relevant_cells(&ev, 2, 1.0, 1000);
        assert_eq!(cells.iter().filter(|c| c.1 == 1).count(), 16);
        assert!(cells.iter().all(|c| c.1 >= 1));
    }
}

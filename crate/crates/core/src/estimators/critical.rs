//! Bisection for critical intensities at a finite scale.

use super::event::event_sampler;
use super::{Estimate, EstimatorError, McSettings};
use crate::connectivity::{evaluate_unchecked, EventSpec};
use crate::measures::RadiusMeasure;
use crate::sampling::CoupledSampler;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Which crossing probability drives the search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CriticalMode {
    /// `P(0 ↔ ∂B_r)` with the origin covered.
    LambdaC,
    /// `P(B_r ↔ ∂B_{2r})`.
    LambdaHatC,
    /// `P(0 ↔ ∂B_r)` through balls centred in the slab `S_k`.
    Slab { k: f64 },
}

impl CriticalMode {
    pub fn event(&self, dim: usize, r: f64) -> EventSpec {
        match *self {
            CriticalMode::LambdaC => EventSpec::Crossing { inner: 0.0, outer: r },
            CriticalMode::LambdaHatC => EventSpec::Crossing { inner: r, outer: 2.0 * r },
            CriticalMode::Slab { k } => EventSpec::slab_crossing(dim, k, r),
        }
    }

    pub fn name(&self) -> String {
        match self {
            CriticalMode::LambdaC => "lambda_c".into(),
            CriticalMode::LambdaHatC => "lambda_hat_c".into(),
            CriticalMode::Slab { k } => format!("slab({k})"),
        }
    }
}

/// Search parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalSearch {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// Final bracket width.
    pub tolerance: f64,
    /// Increasing scales; decisions are taken at the largest.
    pub ladder: Vec<f64>,
    /// Crossing-probability threshold.
    pub theta: f64,
    /// Replica count is doubled up to this cap while the interval straddles `theta`.
    pub max_replicas: u64,
}

impl CriticalSearch {
    pub fn new(lambda_lo: f64, lambda_hi: f64, tolerance: f64, ladder: Vec<f64>) -> Self {
        Self { lambda_lo, lambda_hi, tolerance, ladder, theta: 0.5, max_replicas: 4096 }
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        let bad = |m: &str| Err(EstimatorError::Precondition(m.into()));
        if !(0.0 <= self.lambda_lo && self.lambda_lo < self.lambda_hi) {
            return bad("bracket needs 0 <= lambda_lo < lambda_hi");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if self.ladder.is_empty() || self.ladder.windows(2).any(|w| w[0] >= w[1]) || self.ladder[0] <= 0.0 {
            return bad("ladder must be a nonempty increasing list of positive scales");
        }
        if !(0.0 < self.theta && self.theta < 1.0) {
            return bad("theta must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn top_scale(&self) -> f64 {
        *self.ladder.last().expect("validated")
    }
}

/// One evaluated intensity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchStep {
    pub lambda: f64,
    /// Crossing estimates along the ladder, smallest scale first.
    pub ladder: Vec<(f64, Estimate)>,
    /// `Greater` when the top-scale interval lies above `theta`, `Less` when
    /// below, `Equal` when it still straddles `theta` at the replica cap and
    /// the point estimate decided.
    #[serde(with = "ordering")]
    pub decision: Ordering,
}

impl SearchStep {
    pub fn top(&self) -> &Estimate {
        &self.ladder.last().expect("nonempty ladder").1
    }

    pub fn above(&self, theta: f64) -> bool {
        match self.decision {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => self.top().value >= theta,
        }
    }
}

mod ordering {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::cmp::Ordering;

    pub fn serialize<S: Serializer>(o: &Ordering, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match o {
            Ordering::Less => "below",
            Ordering::Equal => "undecided",
            Ordering::Greater => "above",
        })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Ordering, D::Error> {
        match String::deserialize(d)?.as_str() {
            "below" => Ok(Ordering::Less),
            "above" => Ok(Ordering::Greater),
            _ => Ok(Ordering::Equal),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalResult {
    pub mode: CriticalMode,
    pub lo: f64,
    pub hi: f64,
    pub theta: f64,
    pub scale: f64,
    pub trace: Vec<SearchStep>,
}

impl CriticalResult {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

struct Evaluator<'a> {
    cs: &'a CriticalSearch,
    events: Vec<EventSpec>,
    samplers: Vec<CoupledSampler>,
    mc: &'a McSettings,
    tail: f64,
}

impl<'a> Evaluator<'a> {
    fn new(cs: &'a CriticalSearch, mu: &RadiusMeasure, mode: CriticalMode, mc: &'a McSettings) -> Result<Self, EstimatorError> {
        let events: Vec<EventSpec> = cs.ladder.iter().map(|&r| mode.event(mu.dim, r)).collect();
        let mut samplers = Vec::new();
        let mut tail: f64 = 0.0;
        for ev in &events {
            let s = event_sampler(ev, cs.lambda_hi, mu, mc.truncation)?;
            ev.check_window(&s.spec_config())?;
            tail = tail.max(s.truncation_tail());
            samplers.push(CoupledSampler::from_sampler(s));
        }
        Ok(Self { cs, events, samplers, mc, tail })
    }

    /// Crossing frequency at scale index `j` over replicas `[from, to)`.
    fn batch(&self, j: usize, lambda: f64, from: u64, to: u64) -> Estimate {
        let sub = self.mc.clone().offset(self.mc.offset + from).replicas(to - from);
        let outcomes = sub.run(|seed, _| {
            let (cfg, marks) = self.samplers[j].sampler.sample_marked(seed);
            evaluate_unchecked(&self.samplers[j].thin(&cfg, &marks, lambda, None), &self.events[j])
        });
        Estimate::bernoulli(&outcomes, self.mc.seed, self.tail)
    }

    fn step(&self, lambda: f64) -> SearchStep {
        let top = self.events.len() - 1;
        let theta = self.cs.theta;
        let mut n = self.mc.replicas;
        let mut est = self.batch(top, lambda, 0, n);
        let decision = loop {
            if est.ci_lo > theta {
                break Ordering::Greater;
            }
            if est.ci_hi < theta {
                break Ordering::Less;
            }
            if n >= self.cs.max_replicas {
                break Ordering::Equal;
            }
            let more = self.batch(top, lambda, n, 2 * n);
            est = est.merge(&more);
            n *= 2;
        };
        let mut ladder: Vec<(f64, Estimate)> =
            (0..top).map(|j| (self.cs.ladder[j], self.batch(j, lambda, 0, self.mc.replicas))).collect();
        ladder.push((self.cs.top_scale(), est));
        SearchStep { lambda, ladder, decision }
    }
}

/// Bisects `[λ_lo, λ_hi]` for the intensity at which the crossing
/// probability of `mode` at the top ladder scale passes `theta`.
///
/// All intensities are thinned from the same draws at `λ_hi`, so decisions
/// are monotone replica by replica. The bracket must be confirmed with
/// separated confidence intervals at both ends.
pub fn critical_search(
    cs: &CriticalSearch,
    mu: &RadiusMeasure,
    mode: CriticalMode,
    mc: &McSettings,
) -> Result<CriticalResult, EstimatorError> {
    cs.validate()?;
    mc.check()?;
    let eval = Evaluator::new(cs, mu, mode, mc)?;
    let mut trace = Vec::new();
    let lo_step = eval.step(cs.lambda_lo);
    let hi_step = eval.step(cs.lambda_hi);
    let lo_ok = lo_step.decision == Ordering::Less;
    let hi_ok = hi_step.decision == Ordering::Greater;
    if !(lo_ok && hi_ok) {
        return Err(EstimatorError::BracketInvalid(format!(
            "{} at scale {}: crossing at lambda_lo={} is {:.3} [{:.3}, {:.3}], at lambda_hi={} is {:.3} [{:.3}, {:.3}], threshold {}",
            mode.name(),
            cs.top_scale(),
            cs.lambda_lo,
            lo_step.top().value,
            lo_step.top().ci_lo,
            lo_step.top().ci_hi,
            cs.lambda_hi,
            hi_step.top().value,
            hi_step.top().ci_lo,
            hi_step.top().ci_hi,
            cs.theta
        )));
    }
    trace.push(lo_step);
    trace.push(hi_step);
    let (mut lo, mut hi) = (cs.lambda_lo, cs.lambda_hi);
    while hi - lo > cs.tolerance {
        let mid = 0.5 * (lo + hi);
        let step = eval.step(mid);
        if step.above(cs.theta) {
            hi = mid;
        } else {
            lo = mid;
        }
        trace.push(step);
    }
    Ok(CriticalResult { mode, lo, hi, theta: cs.theta, scale: cs.top_scale(), trace })
}

/// Independent reference for disks of one radius in the plane: the
/// intensity at which a cluster wraps a flat torus horizontally with
/// probability one half, located by bisection on coupled samples.
pub mod torus {
    use crate::rng::{self, tag};
    use rand_distr::{Distribution, Poisson};

    /// Does some cluster of disks of radius `radius` with the given centres
    /// wrap around the torus `[0, side)²` in the first coordinate?
    pub fn wraps(points: &[[f64; 2]], radius: f64, side: f64) -> bool {
        assert!(side > 4.0 * radius, "torus too small for unambiguous images");
        let n = points.len();
        // union-find carrying the offset of each point from its root
        let mut parent: Vec<usize> = (0..n).collect();
        let mut offset = vec![[0.0f64; 2]; n];
        fn find(parent: &mut [usize], offset: &mut [[f64; 2]], i: usize) -> (usize, [f64; 2]) {
            let mut path = vec![i];
            let mut r = i;
            while parent[r] != r {
                r = parent[r];
                path.push(r);
            }
            // offsets relative to the root, filled from the root end
            for &p in path.iter().rev().skip(1) {
                let q = parent[p];
                if q != r {
                    offset[p] = [offset[p][0] + offset[q][0], offset[p][1] + offset[q][1]];
                }
                parent[p] = r;
            }
            (r, if i == r { [0.0, 0.0] } else { offset[i] })
        }
        let reach = 2.0 * radius;
        let cells = (side / reach).floor().max(1.0) as usize;
        let cell = side / cells as f64;
        let mut grid: Vec<Vec<usize>> = vec![Vec::new(); cells * cells];
        let key = |x: f64| ((x / cell) as usize).min(cells - 1);
        for (i, p) in points.iter().enumerate() {
            grid[key(p[0]) * cells + key(p[1])].push(i);
        }
        for (i, p) in points.iter().enumerate() {
            let (cx, cy) = (key(p[0]) as i64, key(p[1]) as i64);
            for dx in -1..=1i64 {
                for dy in -1..=1i64 {
                    let gx = (cx + dx).rem_euclid(cells as i64) as usize;
                    let gy = (cy + dy).rem_euclid(cells as i64) as usize;
                    for &j in &grid[gx * cells + gy] {
                        if j <= i {
                            continue;
                        }
                        let q = points[j];
                        // displacement from i to j along the shortest torus vector
                        let mut v = [q[0] - p[0], q[1] - p[1]];
                        for c in &mut v {
                            *c -= side * (*c / side).round();
                        }
                        if v[0] * v[0] + v[1] * v[1] > reach * reach {
                            continue;
                        }
                        let (ri, oi) = find(&mut parent, &mut offset, i);
                        let (rj, oj) = find(&mut parent, &mut offset, j);
                        if ri == rj {
                            // a closed loop whose lifted displacement is not zero wraps
                            let loop_x = oi[0] + v[0] - oj[0];
                            if loop_x.abs() > side * 0.5 {
                                return true;
                            }
                        } else {
                            // place rj so that pos(j) = pos(i) + v
                            parent[rj] = ri;
                            offset[rj] = [oi[0] + v[0] - oj[0], oi[1] + v[1] - oj[1]];
                        }
                    }
                }
            }
        }
        false
    }

    /// Wrapping frequency at each intensity, thinned from shared draws.
    pub fn wrapping_frequencies(lambdas: &[f64], radius: f64, side: f64, replicas: u64, seed: u64) -> Vec<f64> {
        let lambda_max = lambdas.iter().copied().fold(0.0, f64::max);
        let mut hits = vec![0u64; lambdas.len()];
        for rep in 0..replicas {
            let mut r = rng::stream(seed, tag::ORACLE, rep);
            let count = Poisson::new(lambda_max * side * side).expect("positive mean").sample(&mut r) as usize;
            let draws: Vec<([f64; 2], f64)> =
                (0..count).map(|_| ([rng::unit(&mut r) * side, rng::unit(&mut r) * side], rng::unit(&mut r))).collect();
            for (h, &l) in hits.iter_mut().zip(lambdas) {
                let pts: Vec<[f64; 2]> = draws.iter().filter(|d| d.1 < l / lambda_max).map(|d| d.0).collect();
                *h += wraps(&pts, radius, side) as u64;
            }
        }
        hits.iter().map(|&h| h as f64 / replicas as f64).collect()
    }

    /// Intensity at which the wrapping frequency crosses one half, linearly
    /// interpolated on a uniform grid over `[lo, hi]`.
    pub fn wrapping_threshold(lo: f64, hi: f64, steps: usize, radius: f64, side: f64, replicas: u64, seed: u64) -> f64 {
        let grid: Vec<f64> = (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect();
        let f = wrapping_frequencies(&grid, radius, side, replicas, seed);
        for i in 1..grid.len() {
            if f[i] >= 0.5 {
                if f[i - 1] >= 0.5 {
                    return grid[i - 1];
                }
                let t = (0.5 - f[i - 1]) / (f[i] - f[i - 1]);
                return grid[i - 1] + t * (grid[i] - grid[i - 1]);
            }
        }
        hi
    }
}

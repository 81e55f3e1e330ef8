//! Gain in connection probability from sprinkling an independent process.
//!
//! `A` is a bounded region, `R` a window confining the centres of connecting
//! balls, `C` a target region and `B` a family of target balls of `η`. The
//! experiment estimates `P(A ↔ O(B ∩ η) ∪ C)` through balls centred in `R`,
//! then the same probability conditioned on no ball of `η` crossing `∂A`,
//! without and with an extra process `η'` of intensity `βξ` centred in `R`.

use super::{ExplorationError, SprinkleParams};
use crate::connectivity::ClusterIndex;
use crate::estimators::{Estimate, McSettings};
use crate::geometry::Region;
use crate::measures::RadiusMeasure;
use crate::rng::{self, tag};
use crate::sampling::{CenterPolicy, Configuration, Sampler, SamplerSpec, Truncation, Window};
use serde::{Deserialize, Serialize};

/// Below this conditioning frequency the rejection sampler gives up.
pub const MIN_CONDITIONING: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SprinkleGeometry {
    /// The set `A`.
    pub a: Region,
    /// Window `R` holding the centres of connecting balls.
    pub room: Window,
    /// Target region `C`.
    pub targets: Option<Region>,
    /// Target balls `B`: balls of `η` centred in the region with radius at least the bound.
    pub target_balls: Option<(Region, f64)>,
}

impl SprinkleGeometry {
    pub fn validate(&self) -> Result<(), ExplorationError> {
        if self.targets.is_none() && self.target_balls.is_none() {
            return Err(ExplorationError::Precondition("sprinkling needs a target region or target balls".into()));
        }
        if !self.a.bounding_radius().is_finite() || matches!(self.a, Region::Slab { .. }) {
            return Err(ExplorationError::Precondition("A must be bounded".into()));
        }
        if let Some(c) = &self.targets {
            if let Some(p) = region_probe(&self.a) {
                if c.contains(&p) {
                    return Err(ExplorationError::Precondition("target region C meets A".into()));
                }
            }
        }
        self.room.validate().map_err(ExplorationError::Precondition)
    }

    /// Whether the ball crosses `∂A`.
    pub fn crosses_boundary(&self, z: &[f64], r: f64) -> bool {
        self.a.meets_ball(z, r) && !self.a.contains_ball(z, r)
    }

    fn is_target(&self, z: &[f64], r: f64, from_eta: bool) -> bool {
        self.targets.as_ref().is_some_and(|c| c.meets_ball(z, r))
            || (from_eta
                && self
                    .target_balls
                    .as_ref()
                    .is_some_and(|(reg, min)| r >= *min && reg.contains(z) && !self.crosses_boundary(z, r)))
    }

    /// Whether `A` connects to the targets; balls at index `>= eta_len` belong to `η'`.
    pub fn connects(&self, cfg: &Configuration, eta_len: usize) -> bool {
        let idx = ClusterIndex::build(cfg, |z, _| self.room.contains(z));
        let n = idx.participants();
        let mut src = vec![false; n];
        let mut tgt = vec![false; n];
        for s in 0..n as u32 {
            let i = idx.slot_ball(s);
            let (z, r) = (cfg.center(i), cfg.radius(i));
            let l = idx.slot_label(s) as usize;
            src[l] |= self.a.meets_ball(z, r);
            tgt[l] |= self.is_target(z, r, i < eta_len);
        }
        // Every class touching A is joined through A itself.
        src.iter().any(|&a| a) && tgt.iter().zip(&src).any(|(&t, &a)| t && a)
    }
}

/// A point of the region, used for the overlap sanity check.
fn region_probe(a: &Region) -> Option<Vec<f64>> {
    match a {
        Region::Ball { center, .. } | Region::Cube { center, .. } => Some(center.clone()),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SprinklingReport {
    pub lambda: f64,
    pub params: SprinkleParams,
    /// Unconditional connection frequency under `η`.
    pub hypothesis: Estimate,
    /// `1 - exp(-3λ/ξ)`.
    pub hypothesis_bound: f64,
    /// Frequency of `η ∩ ΔA = ∅`.
    pub conditioning: Estimate,
    pub before: Estimate,
    pub after: Estimate,
    /// `1 - exp(-β) - exp(-λ/ξ)`.
    pub conclusion_bound: f64,
}

impl SprinklingReport {
    pub fn hypothesis_holds(&self) -> bool {
        self.hypothesis.ci_lo >= self.hypothesis_bound
    }

    /// Whether the conditional post-sprinkle frequency clears the bound within `sigmas` standard errors.
    pub fn conclusion_holds(&self, sigmas: f64) -> bool {
        self.after.value + sigmas * self.after.stderr >= self.conclusion_bound
    }
}

/// `ξ` making `1 - exp(-3λ/ξ)` equal to `h`.
///
/// Rounded up by a few ulps so the recomputed threshold never exceeds `h`.
pub fn xi_for_hypothesis(lambda: f64, h: f64) -> f64 {
    3.0 * lambda / -(1.0 - h).ln() * (1.0 + 1e-12)
}

/// Estimates the connection probability before and after sprinkling.
///
/// With `xi = None`, `ξ` is the smallest value whose hypothesis threshold
/// lies below the lower confidence end of the measured hypothesis frequency.
pub fn sprinkling_gain(
    geom: &SprinkleGeometry,
    lambda: f64,
    mu: &RadiusMeasure,
    beta: f64,
    xi: Option<f64>,
    mc: &McSettings,
) -> Result<SprinklingReport, ExplorationError> {
    geom.validate()?;
    mc.check()?;
    if !(lambda > 0.0 && beta >= 0.0) {
        return Err(ExplorationError::Precondition(format!("need lambda > 0 and beta >= 0, got {lambda}, {beta}")));
    }
    let spec = SamplerSpec::new(lambda, mu.clone(), geom.room.clone())
        .centers(CenterPolicy::Enlarged)
        .truncation(mc.truncation);
    let sampler = Sampler::new(spec)?;

    let first: Vec<(bool, bool)> = mc.run(|s, _| {
        let eta = sampler.sample(rng::derive(s, tag::SAMPLE, 0));
        let clean = !eta.iter().any(|(z, r)| geom.crosses_boundary(z, r));
        (geom.connects(&eta, eta.len()), clean)
    });
    let hyp: Vec<bool> = first.iter().map(|p| p.0).collect();
    let clean: Vec<bool> = first.iter().map(|p| p.1).collect();
    let hypothesis = Estimate::bernoulli(&hyp, mc.seed, sampler.truncation_tail());
    let conditioning = Estimate::bernoulli(&clean, mc.seed, 0.0);
    if conditioning.value < MIN_CONDITIONING || conditioning.acc.sum == 0.0 {
        return Err(ExplorationError::ConditioningTooRare { frequency: conditioning.value, replicas: mc.replicas });
    }

    let xi = match xi {
        Some(x) => x,
        None if hypothesis.ci_lo > 0.0 => xi_for_hypothesis(lambda, hypothesis.ci_lo),
        None => {
            return Err(ExplorationError::Precondition("hypothesis frequency indistinguishable from 0".into()));
        }
    };
    let params = SprinkleParams::new(beta, xi);
    params.validate()?;
    let sprinkler = if params.intensity() > 0.0 {
        let r_max = sampler.r_max();
        let truncation = if r_max.is_finite() {
            Truncation::Fixed { r_max, max_discarded: f64::INFINITY }
        } else {
            Truncation::default()
        };
        let spec = SamplerSpec::new(params.intensity(), mu.clone(), geom.room.clone())
            .centers(CenterPolicy::WindowOnly)
            .truncation(truncation);
        Some(Sampler::new(spec)?)
    } else {
        None
    };

    let second: Vec<Option<(bool, bool)>> = mc.run(|s, i| {
        let k = (i - mc.offset) as usize;
        if !clean[k] {
            return None;
        }
        let mut eta = sampler.sample(rng::derive(s, tag::SAMPLE, 0));
        let before = hyp[k];
        let eta_len = eta.len();
        if let Some(sp) = &sprinkler {
            let extra = sp.sample(rng::derive(s, tag::SPRINKLE, 0));
            for (z, r) in extra.iter() {
                eta.push(z, r);
            }
        }
        Some((before, geom.connects(&eta, eta_len)))
    });
    let kept: Vec<(bool, bool)> = second.into_iter().flatten().collect();
    let before: Vec<bool> = kept.iter().map(|p| p.0).collect();
    let after: Vec<bool> = kept.iter().map(|p| p.1).collect();

    Ok(SprinklingReport {
        lambda,
        params,
        hypothesis_bound: 1.0 - (-3.0 * lambda / xi).exp(),
        conclusion_bound: 1.0 - (-beta).exp() - (-lambda / xi).exp(),
        hypothesis,
        conditioning,
        before: Estimate::bernoulli(&before, mc.seed, sampler.truncation_tail()),
        after: Estimate::bernoulli(&after, mc.seed, sampler.truncation_tail()),
    })
}

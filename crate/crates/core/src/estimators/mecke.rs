//! Both sides of the Mecke identity for a few functionals.
//!
//! `E Σ_{x∈η} h(x, η∖x) = λ ∫ E h((z,r), η) dz dμ(r)`: the left side counts
//! over sampled configurations, the right side inserts fresh points into
//! independent ones.

use super::{Estimate, EstimatorError, McSettings};
use crate::connectivity::ClusterIndex;
use crate::geometry::Region;
use crate::measures::RadiusMeasure;
use crate::rng::{self, tag};
use crate::sampling::{CenterPolicy, Configuration, Sampler, SamplerSpec, Window};
use serde::{Deserialize, Serialize};

/// Evaluates `h((z,r), η)` for one fixed `η`.
pub type Insertion<'a> = Box<dyn Fn(&[f64], f64) -> f64 + 'a>;

/// `h(x, η)` in both of the forms the two sides need.
pub trait MeckeFunctional: Sync {
    fn name(&self) -> &'static str;

    /// `Σ_{x∈η} h(x, η∖x)`.
    fn total(&self, cfg: &Configuration) -> f64;

    /// Evaluator of `h((z,r), η)` for many insertions into one `η`.
    fn prepare<'a>(&'a self, cfg: &'a Configuration) -> Insertion<'a>;
}

/// `h = 1[B_r^z meets a fixed region]`.
pub struct BallMeetsRegion(pub Region);

impl MeckeFunctional for BallMeetsRegion {
    fn name(&self) -> &'static str {
        "ball_meets_region"
    }

    fn total(&self, cfg: &Configuration) -> f64 {
        cfg.iter().filter(|(z, r)| self.0.meets_ball(z, *r)).count() as f64
    }

    fn prepare<'a>(&'a self, _cfg: &'a Configuration) -> Insertion<'a> {
        Box::new(move |z, r| self.0.meets_ball(z, r) as u8 as f64)
    }
}

/// `h = #{y ∈ η : B_y meets B_x}`; the left side is twice the edge count.
pub struct DegreeCount;

impl MeckeFunctional for DegreeCount {
    fn name(&self) -> &'static str {
        "degree_count"
    }

    fn total(&self, cfg: &Configuration) -> f64 {
        let idx = ClusterIndex::build(cfg, |_, _| true);
        2.0 * idx.edges().len() as f64
    }

    fn prepare<'a>(&'a self, cfg: &'a Configuration) -> Insertion<'a> {
        let idx = ClusterIndex::build(cfg, |_, _| true);
        Box::new(move |z, r| idx.slots_meeting(z, r).len() as f64)
    }
}

/// `h = 1[B_x meets ∂B_outer and is joined to B_inner in η ∪ {x}]`.
pub struct BoundaryCrossing {
    pub inner: f64,
    pub outer: f64,
}

impl BoundaryCrossing {
    fn regions(&self, dim: usize) -> (Region, Region) {
        (Region::ball_at_origin(dim, self.inner), Region::sphere_at_origin(dim, self.outer))
    }
}

impl MeckeFunctional for BoundaryCrossing {
    fn name(&self) -> &'static str {
        "boundary_crossing"
    }

    fn total(&self, cfg: &Configuration) -> f64 {
        let (core, sphere) = self.regions(cfg.dim);
        let idx = ClusterIndex::build(cfg, |_, _| true);
        let hit = labels_hit(&idx, &core);
        (0..cfg.len())
            .filter(|&i| sphere.meets_ball(cfg.center(i), cfg.radius(i)) && idx.label(i).is_some_and(|l| hit[l as usize]))
            .count() as f64
    }

    fn prepare<'a>(&'a self, cfg: &'a Configuration) -> Insertion<'a> {
        let (core, sphere) = self.regions(cfg.dim);
        let idx = ClusterIndex::build(cfg, |_, _| true);
        let hit = labels_hit(&idx, &core);
        Box::new(move |z, r| {
            let on = sphere.meets_ball(z, r)
                && (core.meets_ball(z, r) || idx.slots_meeting(z, r).into_iter().any(|s| hit[idx.slot_label(s) as usize]));
            on as u8 as f64
        })
    }
}

fn labels_hit(idx: &ClusterIndex<'_>, core: &Region) -> Vec<bool> {
    let mut hit = vec![false; idx.participants()];
    for l in idx.labels_meeting(core) {
        hit[l as usize] = true;
    }
    hit
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeckeReport {
    pub functional: String,
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// `(lhs - rhs) / sqrt(se_lhs² + se_rhs²)`.
    pub z: f64,
}

impl MeckeReport {
    pub fn agrees(&self, sigmas: f64) -> bool {
        self.z.abs() <= sigmas
    }
}

/// Estimates both sides of the identity for `h` under intensity `λ dz ⊗ μ`
/// on a ball window with enlarged centres.
///
/// The right side draws `draws` insertions per replica into a configuration
/// independent of the one used by the left side.
pub fn mecke_check(
    h: &dyn MeckeFunctional,
    lambda: f64,
    mu: &RadiusMeasure,
    window_radius: f64,
    draws: u64,
    mc: &McSettings,
) -> Result<MeckeReport, EstimatorError> {
    mc.check()?;
    let spec = SamplerSpec::new(lambda, mu.clone(), Window::ball(mu.dim, window_radius))
        .centers(CenterPolicy::Enlarged)
        .truncation(mc.truncation);
    let sampler = Sampler::new(spec)?;
    let mass = sampler.band_mass();
    let draws = draws.max(1);
    let rows = mc.run(|seed, _| {
        let lhs = h.total(&sampler.sample(seed));
        let other = sampler.sample(rng::derive(seed, tag::RHS, 0));
        let eval = h.prepare(&other);
        let mut r = rng::stream(seed, tag::INSERT, 0);
        let mut z = Vec::with_capacity(mu.dim);
        let mut sum = 0.0;
        for _ in 0..draws {
            if let Some((rad, admitted)) = sampler.insertion(&mut r, &mut z) {
                if admitted {
                    sum += eval(&z, rad);
                }
            }
        }
        (lhs, mass * sum / draws as f64)
    });
    let l: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let rr: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let tail = sampler.truncation_tail();
    let lhs = Estimate::mean(&l, mc.seed, tail);
    let rhs = Estimate::mean(&rr, mc.seed, tail);
    let se = (lhs.stderr.powi(2) + rhs.stderr.powi(2)).sqrt();
    let z = if se > 0.0 { (lhs.value - rhs.value) / se } else if lhs.value == rhs.value { 0.0 } else { f64::INFINITY };
    Ok(MeckeReport { functional: h.name().into(), lhs, rhs, z })
}

//! Declarative events and their exact indicators on a configuration.

use super::index::ClusterIndex;
use crate::geometry::{lens_meets_cube, Region};
use crate::sampling::{CenterPolicy, Configuration, Window};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EventError {
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    #[error("invalid event: {0}")]
    Invalid(String),
    #[error("event is not increasing")]
    NotIncreasing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventSpec {
    /// `A ↔ B` through balls centred in `clip`.
    Connection { a: Region, b: Region, clip: Option<Region> },
    /// `B_inner ↔ ∂B_outer`; `inner = 0` means the origin, which must be covered.
    Crossing { inner: f64, outer: f64 },
    /// `B_n` connects, through balls centred in `B_{(ρ+1/2)N}`, to a ball of
    /// radius at least `n` centred in `B_{(ρ+1/2)N} \ B_{ρN}`.
    Seed { n: f64, big_n: f64, rho: f64 },
    /// Some ball of radius at least `min_radius` centred in `target` connects
    /// to the union of `source` through balls centred in `clip`.
    GeneralSeed { source: Vec<Region>, target: Region, clip: Region, min_radius: f64 },
    /// Two disjoint clusters of `O(η \ bad) ∩ Λ_K` meet both `Λ_k` and `∂Λ_K`.
    TwoArm { k: f64, big_k: f64 },
    /// Some ball of radius at least `threshold` centred in `B_n`.
    BigBall { n: f64, threshold: f64 },
}

/// What a configuration must contain for an event to be evaluated exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub window: Window,
    pub centers: CenterPolicy,
    pub r_min: f64,
}

/// Insertion domain `B_{radius + (grows ? r : 0)}` for balls of radius `r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Influence {
    pub radius: f64,
    pub grows: bool,
}

impl Influence {
    pub fn at(&self, r: f64) -> f64 {
        if self.grows {
            self.radius + r
        } else {
            self.radius
        }
    }
}

impl EventSpec {
    /// The event `F`: a ball of radius at least `n^{d/(d+δ)}` centred in `B_n`.
    pub fn dictator(n: f64, dim: usize, delta: f64) -> Self {
        EventSpec::BigBall { n, threshold: n.powf(dim as f64 / (dim as f64 + delta)) }
    }

    /// Slab-clipped crossing `0 ↔ ∂B_r` through balls centred in `S_k`.
    pub fn slab_crossing(dim: usize, k: f64, r: f64) -> Self {
        EventSpec::Connection {
            a: Region::origin(dim),
            b: Region::sphere_at_origin(dim, r),
            clip: Some(Region::Slab { half_thickness: k }),
        }
    }

    pub fn validate(&self) -> Result<(), EventError> {
        let bad = |m: String| Err(EventError::Invalid(m));
        match *self {
            EventSpec::Crossing { inner, outer } if !(inner >= 0.0 && outer > inner) => {
                bad(format!("crossing needs 0 <= inner < outer, got {inner}, {outer}"))
            }
            EventSpec::Seed { n, big_n, rho } if !(n >= 1.0 && rho >= 1.0 && big_n >= 2.0 * n) => {
                bad(format!("seed event needs n >= 1, rho >= 1, N >= 2n; got n={n}, N={big_n}, rho={rho}"))
            }
            EventSpec::TwoArm { k, big_k } if !(k > 0.0 && big_k >= k) => bad(format!("two-arm needs 0 < k <= K, got {k}, {big_k}")),
            EventSpec::BigBall { n, threshold } if !(n > 0.0 && threshold > 0.0) => bad("big-ball needs positive n and threshold".into()),
            EventSpec::GeneralSeed { ref clip, min_radius, .. } if !clip.bounding_radius().is_finite() || !(min_radius > 0.0) => {
                bad("general seed event needs a bounded clip and positive radius".into())
            }
            EventSpec::Connection { ref clip, ref b, .. } => {
                if crossing_shape(b).is_none() && !clip.as_ref().is_some_and(|c| c.bounding_radius().is_finite()) {
                    bad("connection needs a bounded clip or an origin-centred sphere target".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn is_increasing(&self) -> bool {
        !matches!(self, EventSpec::TwoArm { .. })
    }

    /// Sampling plan under which the event is evaluated exactly.
    pub fn plan(&self, dim: usize) -> Plan {
        let plan = |window, centers, r_min| Plan { window, centers, r_min };
        match self {
            EventSpec::Crossing { outer, .. } => plan(Window::ball(dim, *outer), CenterPolicy::Enlarged, 0.0),
            EventSpec::Seed { big_n, rho, .. } => plan(Window::ball(dim, (rho + 0.5) * big_n), CenterPolicy::WindowOnly, 0.0),
            EventSpec::GeneralSeed { clip, .. } => plan(Window::ball(dim, clip.bounding_radius()), CenterPolicy::WindowOnly, 0.0),
            EventSpec::BigBall { n, threshold } => plan(Window::ball(dim, *n), CenterPolicy::WindowOnly, *threshold),
            EventSpec::TwoArm { big_k, .. } => plan(Window::cube(dim, *big_k), CenterPolicy::Enlarged, 0.0),
            EventSpec::Connection { b, clip, .. } => match crossing_shape(b) {
                Some(r) => plan(Window::ball(dim, r), CenterPolicy::Enlarged, 0.0),
                None => {
                    let c = clip.as_ref().expect("validated");
                    match c {
                        Region::Cube { center, half } if center.iter().all(|&x| x == 0.0) => {
                            plan(Window::cube(dim, *half), CenterPolicy::WindowOnly, 0.0)
                        }
                        _ => plan(Window::ball(dim, c.bounding_radius()), CenterPolicy::WindowOnly, 0.0),
                    }
                }
            },
        }
    }

    /// Region containing the centre of any ball that can affect the event.
    pub fn influence(&self, dim: usize) -> Influence {
        let p = self.plan(dim);
        Influence { radius: p.window.circumradius(), grows: p.centers == CenterPolicy::Enlarged }
    }

    /// Smallest radius of a ball that can affect the event.
    pub fn relevant_r_min(&self) -> f64 {
        match self {
            EventSpec::BigBall { threshold, .. } => *threshold,
            _ => 0.0,
        }
    }

    /// Checks that `cfg` contains every ball the event depends on.
    pub fn check_window(&self, cfg: &Configuration) -> Result<(), EventError> {
        let w = &cfg.window;
        let enlarged = cfg.centers_policy == CenterPolicy::Enlarged;
        let need_ball = |r: f64, must_enlarge: bool| {
            if w.contains_origin_ball(r) && (enlarged || !must_enlarge) {
                Ok(())
            } else {
                Err(EventError::WindowTooSmall(format!(
                    "requires a window containing B_{r}{} (have {})",
                    if must_enlarge { " with enlarged centres" } else { "" },
                    w.describe()
                )))
            }
        };
        match self {
            EventSpec::Crossing { outer, .. } => need_ball(*outer, true),
            EventSpec::Seed { big_n, rho, .. } => need_ball((rho + 0.5) * big_n, false),
            EventSpec::GeneralSeed { clip, .. } => need_ball(clip.bounding_radius(), false),
            EventSpec::BigBall { n, .. } => need_ball(*n, false),
            EventSpec::Connection { b, clip, .. } => match crossing_shape(b) {
                Some(r) => need_ball(r, true),
                None => need_ball(clip.as_ref().map_or(f64::INFINITY, |c| c.bounding_radius()), false),
            },
            EventSpec::TwoArm { big_k, .. } => {
                let ok = (enlarged && w.contains_origin_cube(*big_k)) || w.contains_origin_cube(2.0 * big_k);
                if !ok {
                    return Err(EventError::WindowTooSmall(format!(
                        "requires an enlarged window containing Λ_{big_k} or a window containing Λ_{} (have {})",
                        2.0 * big_k,
                        w.describe()
                    )));
                }
                if cfg.r_max < *big_k {
                    return Err(EventError::WindowTooSmall(format!("requires r_max >= {big_k}, have {}", cfg.r_max)));
                }
                Ok(())
            }
        }
    }

    /// Whether a ball takes part in the clustering.
    pub fn participates(&self, z: &[f64], r: f64) -> bool {
        match self {
            EventSpec::Crossing { outer, .. } => within(z, *outer + r),
            EventSpec::Seed { big_n, rho, .. } => within(z, (rho + 0.5) * big_n),
            EventSpec::GeneralSeed { clip, .. } => clip.contains(z),
            EventSpec::BigBall { .. } => true,
            EventSpec::Connection { b, clip, .. } => {
                clip.as_ref().is_none_or(|c| c.contains(z)) && crossing_shape(b).is_none_or(|rr| within(z, rr + r))
            }
            EventSpec::TwoArm { k: _, big_k } => {
                let k = *big_k;
                r <= k && z.iter().all(|x| x.abs() <= 2.0 * k) && z.iter().map(|x| (x.abs() - k).max(0.0).powi(2)).sum::<f64>() <= r * r
            }
        }
    }

    /// Whether a participating ball touches the source side.
    pub fn is_source(&self, z: &[f64], r: f64) -> bool {
        match self {
            EventSpec::Crossing { inner, .. } => {
                if *inner == 0.0 {
                    within(z, r)
                } else {
                    within(z, inner + r)
                }
            }
            EventSpec::Seed { n, .. } => within(z, n + r),
            EventSpec::GeneralSeed { source, .. } => source.iter().any(|s| s.meets_ball(z, r)),
            EventSpec::BigBall { .. } => true,
            EventSpec::Connection { a, .. } => a.meets_ball(z, r),
            EventSpec::TwoArm { k, .. } => Region::Cube { center: vec![0.0; z.len()], half: *k }.meets_ball(z, r),
        }
    }

    /// Whether a participating ball qualifies as the target.
    pub fn is_target(&self, z: &[f64], r: f64) -> bool {
        match self {
            EventSpec::Crossing { outer, .. } => Region::Sphere { center: vec![0.0; z.len()], radius: *outer }.meets_ball(z, r),
            EventSpec::Seed { n, big_n, rho } => {
                let n2: f64 = z.iter().map(|x| x * x).sum();
                let (inner, outer) = (rho * big_n, (rho + 0.5) * big_n);
                r >= *n && n2 > inner * inner && n2 <= outer * outer
            }
            EventSpec::GeneralSeed { target, min_radius, .. } => r >= *min_radius && target.contains(z),
            EventSpec::BigBall { n, threshold } => r >= *threshold && within(z, *n),
            EventSpec::Connection { b, .. } => b.meets_ball(z, r),
            EventSpec::TwoArm { big_k, .. } => {
                Region::CubeBoundary { center: vec![0.0; z.len()], half: *big_k }.meets_ball(z, r)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            EventSpec::Connection { .. } => "connection".into(),
            EventSpec::Crossing { inner, outer } => format!("crossing({inner};{outer})"),
            EventSpec::Seed { n, big_n, rho } => format!("seed(n={n};N={big_n};rho={rho})"),
            EventSpec::GeneralSeed { min_radius, .. } => format!("general_seed(n={min_radius})"),
            EventSpec::TwoArm { k, big_k } => format!("two_arm(k={k};K={big_k})"),
            EventSpec::BigBall { n, threshold } => format!("big_ball(n={n};t={threshold})"),
        }
    }
}

/// Radius of an origin-centred sphere target.
fn crossing_shape(b: &Region) -> Option<f64> {
    match b {
        Region::Sphere { center, radius } if center.iter().all(|&x| x == 0.0) => Some(*radius),
        _ => None,
    }
}

#[inline]
fn within(z: &[f64], r: f64) -> bool {
    z.iter().map(|x| x * x).sum::<f64>() <= r * r
}

/// Balls of `𝓑(Λ_K)`: meeting `Λ_K` with centre outside `Λ_{2K}` or radius above `K`.
pub fn bad_balls(cfg: &Configuration, big_k: f64) -> Vec<usize> {
    let cube = Region::Cube { center: vec![0.0; cfg.dim], half: big_k };
    cfg.iter()
        .enumerate()
        .filter(|(_, (z, r))| {
            cube.meets_ball(z, *r) && (*r > big_k || z.iter().any(|x| x.abs() > 2.0 * big_k))
        })
        .map(|(i, _)| i)
        .collect()
}

/// Exact indicator of `ev` on `cfg`.
pub fn evaluate_event(cfg: &Configuration, ev: &EventSpec) -> Result<bool, EventError> {
    ev.validate()?;
    ev.check_window(cfg)?;
    Ok(evaluate_unchecked(cfg, ev))
}

/// Indicator without the window check, for hand-built configurations.
pub fn evaluate_unchecked(cfg: &Configuration, ev: &EventSpec) -> bool {
    match ev {
        EventSpec::BigBall { .. } => cfg.iter().any(|(z, r)| ev.is_target(z, r)),
        EventSpec::TwoArm { k, big_k } => two_arm(cfg, *k, *big_k),
        _ => {
            let idx = ClusterIndex::build(cfg, |z, r| ev.participates(z, r));
            let n = idx.participants();
            let mut src = vec![false; n];
            let mut tgt = vec![false; n];
            for s in 0..n as u32 {
                let i = idx.slot_ball(s);
                let (z, r) = (cfg.center(i), cfg.radius(i));
                let l = idx.slot_label(s) as usize;
                src[l] |= ev.is_source(z, r);
                tgt[l] |= ev.is_target(z, r);
            }
            src.iter().zip(&tgt).any(|(a, b)| *a && *b)
        }
    }
}

fn two_arm(cfg: &Configuration, k: f64, big_k: f64) -> bool {
    let ev = EventSpec::TwoArm { k, big_k };
    let center = vec![0.0; cfg.dim];
    let idx = ClusterIndex::build_with(
        cfg,
        |z, r| ev.participates(z, r),
        |i, j| lens_meets_cube(cfg.center(i), cfg.radius(i), cfg.center(j), cfg.radius(j), &center, big_k),
    );
    let n = idx.participants();
    let mut src = vec![false; n];
    let mut tgt = vec![false; n];
    for s in 0..n as u32 {
        let i = idx.slot_ball(s);
        let (z, r) = (cfg.center(i), cfg.radius(i));
        let l = idx.slot_label(s) as usize;
        src[l] |= ev.is_source(z, r);
        tgt[l] |= ev.is_target(z, r);
    }
    src.iter().zip(&tgt).filter(|(a, b)| **a && **b).count() >= 2
}

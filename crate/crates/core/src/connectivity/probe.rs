//! Incremental evaluation of increasing events under a single insertion.

use super::events::{evaluate_unchecked, EventError, EventSpec};
use super::index::ClusterIndex;
use crate::sampling::Configuration;

/// Answers "does `η ∪ {(z, r)}` belong to the event" without rebuilding clusters.
///
/// The inserted ball merges every class it meets; the event holds afterwards
/// iff it held before or the merged class carries both a source and a target.
pub struct EventProbe<'a> {
    ev: &'a EventSpec,
    idx: ClusterIndex<'a>,
    src: Vec<bool>,
    tgt: Vec<bool>,
    base: bool,
}

impl<'a> EventProbe<'a> {
    pub fn new(cfg: &'a Configuration, ev: &'a EventSpec) -> Result<Self, EventError> {
        if !ev.is_increasing() {
            return Err(EventError::NotIncreasing);
        }
        ev.validate()?;
        ev.check_window(cfg)?;
        Ok(Self::new_unchecked(cfg, ev))
    }

    pub fn new_unchecked(cfg: &'a Configuration, ev: &'a EventSpec) -> Self {
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
        let base = src.iter().zip(&tgt).any(|(a, b)| *a && *b);
        Self { ev, idx, src, tgt, base }
    }

    /// Indicator of the event on the configuration itself.
    pub fn base(&self) -> bool {
        self.base
    }

    /// Indicator of the event after inserting `B_r^z`.
    pub fn with_ball(&self, z: &[f64], r: f64) -> bool {
        if self.base {
            return true;
        }
        if !self.ev.participates(z, r) {
            return false;
        }
        let mut src = self.ev.is_source(z, r);
        let mut tgt = self.ev.is_target(z, r);
        if src && tgt {
            return true;
        }
        for s in self.idx.slots_meeting(z, r) {
            let l = self.idx.slot_label(s) as usize;
            src |= self.src[l];
            tgt |= self.tgt[l];
            if src && tgt {
                return true;
            }
        }
        false
    }

    /// Whether inserting `B_r^z` switches the event on.
    pub fn pivotal(&self, z: &[f64], r: f64) -> bool {
        !self.base && self.with_ball(z, r)
    }
}

/// Reference implementation by full recomputation.
pub fn with_ball_recompute(cfg: &Configuration, ev: &EventSpec, z: &[f64], r: f64) -> bool {
    let mut c = cfg.clone();
    c.push(z, r);
    evaluate_unchecked(&c, ev)
}

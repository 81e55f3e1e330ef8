//! Ball-intersection clustering over a multi-level spatial hash.
//!
//! Level `ℓ` holds balls with radius in `(h 2^{ℓ-1}, h 2^ℓ]` (level 0: `r ≤ h`)
//! in a grid of cell side `2 h 2^ℓ`, with `h` the median radius. A ball
//! looks for partners in its own level and every level above it, touching at
//! most `3^d` cells per level, so a few huge balls never force a quadratic scan.

use super::dsu::DisjointSets;
use crate::geometry::{balls_meet, Region};
use crate::sampling::Configuration;
use rustc_hash::{FxHashMap, FxHashSet};

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct Level {
    cell: f64,
    max_r: f64,
    cells: FxHashMap<u64, Vec<u32>>,
    members: Vec<u32>,
}

/// Spatial hash over the participating balls of a configuration.
#[derive(Clone, Debug)]
pub struct LevelGrid {
    dim: usize,
    base: f64,
    levels: Vec<Level>,
}

#[inline]
fn cell_key(coords: &[i64]) -> u64 {
    // collisions only add candidates; every candidate is tested exactly
    coords.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &c| (h ^ c as u64).wrapping_mul(0x0000_0100_0000_01b3).rotate_left(17))
}

impl LevelGrid {
    pub fn new(dim: usize, radii: &[f64]) -> Self {
        let base = if radii.is_empty() {
            1.0
        } else {
            let mut r = radii.to_vec();
            r.sort_by(f64::total_cmp);
            let m = r[r.len() / 2];
            if m > 0.0 {
                m
            } else {
                r.iter().copied().find(|&x| x > 0.0).unwrap_or(1.0)
            }
        };
        Self { dim, base, levels: Vec::new() }
    }

    fn level_of(&self, r: f64) -> usize {
        let mut l = 0;
        let mut m = self.base;
        while m < r {
            m *= 2.0;
            l += 1;
        }
        l
    }

    fn ensure(&mut self, l: usize) {
        while self.levels.len() <= l {
            let k = self.levels.len();
            let max_r = self.base * 2f64.powi(k as i32);
            self.levels.push(Level { cell: 2.0 * max_r, max_r, cells: FxHashMap::default(), members: Vec::new() });
        }
    }

    pub fn insert(&mut self, slot: u32, z: &[f64], r: f64) -> usize {
        let l = self.level_of(r);
        self.ensure(l);
        let level = &mut self.levels[l];
        let coords: Vec<i64> = z.iter().map(|&x| (x / level.cell).floor() as i64).collect();
        level.cells.entry(cell_key(&coords)).or_default().push(slot);
        level.members.push(slot);
        l
    }

    /// Calls `f` on every slot in levels `>= from` that could meet `B_r^z`.
    pub fn candidates(&self, z: &[f64], r: f64, from: usize, mut f: impl FnMut(u32)) {
        let d = self.dim;
        let mut lo = vec![0i64; d];
        let mut hi = vec![0i64; d];
        let mut cur = vec![0i64; d];
        for level in self.levels.iter().skip(from) {
            if level.members.is_empty() {
                continue;
            }
            let reach = r + level.max_r;
            let mut count: f64 = 1.0;
            for i in 0..d {
                lo[i] = ((z[i] - reach) / level.cell).floor() as i64;
                hi[i] = ((z[i] + reach) / level.cell).floor() as i64;
                count *= (hi[i] - lo[i] + 1) as f64;
            }
            if count >= level.members.len() as f64 {
                for &s in &level.members {
                    f(s);
                }
                continue;
            }
            let mut seen: FxHashSet<u64> = FxHashSet::default();
            cur.copy_from_slice(&lo);
            loop {
                let key = cell_key(&cur);
                if seen.insert(key) {
                    if let Some(v) = level.cells.get(&key) {
                        for &s in v {
                            f(s);
                        }
                    }
                }
                let mut i = 0;
                loop {
                    if i == d {
                        break;
                    }
                    cur[i] += 1;
                    if cur[i] <= hi[i] {
                        break;
                    }
                    cur[i] = lo[i];
                    i += 1;
                }
                if i == d {
                    break;
                }
            }
        }
    }
}

/// Connectivity classes of the participating balls of a configuration.
#[derive(Clone, Debug)]
pub struct ClusterIndex<'a> {
    cfg: &'a Configuration,
    slots: Vec<u32>,
    slot_of: Vec<u32>,
    levels: Vec<u8>,
    labels: Vec<u32>,
    grid: LevelGrid,
}

impl<'a> ClusterIndex<'a> {
    /// Clusters the balls accepted by `participates`; two balls are joined
    /// when they intersect and `edge` accepts the pair (configuration indices).
    pub fn build_with(
        cfg: &'a Configuration,
        participates: impl Fn(&[f64], f64) -> bool,
        edge: impl Fn(usize, usize) -> bool,
    ) -> Self {
        let mut slots = Vec::new();
        let mut slot_of = vec![NONE; cfg.len()];
        for (i, (z, r)) in cfg.iter().enumerate() {
            if participates(z, r) {
                slot_of[i] = slots.len() as u32;
                slots.push(i as u32);
            }
        }
        let radii: Vec<f64> = slots.iter().map(|&i| cfg.radius(i as usize)).collect();
        let mut grid = LevelGrid::new(cfg.dim, &radii);
        let mut levels = Vec::with_capacity(slots.len());
        for (s, &i) in slots.iter().enumerate() {
            levels.push(grid.insert(s as u32, cfg.center(i as usize), cfg.radius(i as usize)) as u8);
        }
        let mut dsu = DisjointSets::new(slots.len());
        for (s, &i) in slots.iter().enumerate() {
            let (z, r) = (cfg.center(i as usize), cfg.radius(i as usize));
            let own = levels[s] as usize;
            grid.candidates(z, r, own, |t| {
                let tl = levels[t as usize] as usize;
                if tl == own && t as usize <= s {
                    return;
                }
                let j = slots[t as usize] as usize;
                if balls_meet(z, r, cfg.center(j), cfg.radius(j)) && edge(i as usize, j) {
                    dsu.union(s as u32, t);
                }
            });
        }
        let labels = dsu.canonical_labels();
        Self { cfg, slots, slot_of, levels, labels, grid }
    }

    pub fn build(cfg: &'a Configuration, participates: impl Fn(&[f64], f64) -> bool) -> Self {
        Self::build_with(cfg, participates, |_, _| true)
    }

    pub fn config(&self) -> &'a Configuration {
        self.cfg
    }

    pub fn participants(&self) -> usize {
        self.slots.len()
    }

    pub fn participates(&self, i: usize) -> bool {
        self.slot_of[i] != NONE
    }

    /// Class label of ball `i`, if it participates. Labels are slot numbers.
    pub fn label(&self, i: usize) -> Option<u32> {
        let s = self.slot_of[i];
        (s != NONE).then(|| self.labels[s as usize])
    }

    /// Label of a participating slot.
    pub fn slot_label(&self, slot: u32) -> u32 {
        self.labels[slot as usize]
    }

    pub fn slot_ball(&self, slot: u32) -> usize {
        self.slots[slot as usize] as usize
    }

    pub fn class_count(&self) -> usize {
        self.labels.iter().enumerate().filter(|&(s, &l)| s as u32 == l).count()
    }

    pub fn same_class(&self, i: usize, j: usize) -> bool {
        matches!((self.label(i), self.label(j)), (Some(a), Some(b)) if a == b)
    }

    /// Labels of classes with a ball meeting `region`, sorted.
    pub fn labels_meeting(&self, region: &Region) -> Vec<u32> {
        let mut out: Vec<u32> = self
            .slots
            .iter()
            .enumerate()
            .filter(|&(_, &i)| region.meets_ball(self.cfg.center(i as usize), self.cfg.radius(i as usize)))
            .map(|(s, _)| self.labels[s])
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Whether some class meets both regions.
    pub fn connected(&self, a: &Region, b: &Region) -> bool {
        let la = self.labels_meeting(a);
        if la.is_empty() {
            return false;
        }
        self.labels_meeting(b).iter().any(|l| la.binary_search(l).is_ok())
    }

    /// Configuration indices of all balls in classes meeting `region`, sorted.
    pub fn cluster_of(&self, region: &Region) -> Vec<usize> {
        let la = self.labels_meeting(region);
        let mut out: Vec<usize> = self
            .slots
            .iter()
            .enumerate()
            .filter(|&(s, _)| la.binary_search(&self.labels[s]).is_ok())
            .map(|(_, &i)| i as usize)
            .collect();
        out.sort_unstable();
        out
    }

    /// Participating slots whose balls meet `B_r^z`.
    pub fn slots_meeting(&self, z: &[f64], r: f64) -> Vec<u32> {
        let mut out = Vec::new();
        self.grid.candidates(z, r, 0, |s| {
            let i = self.slots[s as usize] as usize;
            if balls_meet(z, r, self.cfg.center(i), self.cfg.radius(i)) {
                out.push(s);
            }
        });
        out
    }

    /// Intersecting participating pairs `(i, j)`, `i < j`, in configuration indices.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (s, &i) in self.slots.iter().enumerate() {
            let (z, r) = (self.cfg.center(i as usize), self.cfg.radius(i as usize));
            let own = self.levels[s] as usize;
            self.grid.candidates(z, r, own, |t| {
                if self.levels[t as usize] as usize == own && t as usize <= s {
                    return;
                }
                let j = self.slots[t as usize] as usize;
                if balls_meet(z, r, self.cfg.center(j), self.cfg.radius(j)) {
                    let (a, b) = if (i as usize) < j { (i as usize, j) } else { (j, i as usize) };
                    out.push((a, b));
                }
            });
        }
        out.sort_unstable();
        out
    }
}

/// Clusters balls centred in `clip` (all balls when `None`).
pub fn build_index<'a>(cfg: &'a Configuration, clip: Option<&Region>) -> ClusterIndex<'a> {
    match clip {
        Some(c) => ClusterIndex::build(cfg, |z, _| c.contains(z)),
        None => ClusterIndex::build(cfg, |_, _| true),
    }
}

/// Whether some class of `idx` meets both `a` and `b`.
pub fn connected(idx: &ClusterIndex<'_>, a: &Region, b: &Region) -> bool {
    idx.connected(a, b)
}

/// Balls in classes meeting `a`.
pub fn cluster_of(idx: &ClusterIndex<'_>, a: &Region) -> Vec<usize> {
    idx.cluster_of(a)
}

//! Regions of space and their intersection predicates against balls.
//!
//! Predicates compare squared distances so that touching balls count as
//! intersecting without any tolerance parameter.

use serde::{Deserialize, Serialize};

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Closed balls `B_{r1}^{z1}` and `B_{r2}^{z2}` intersect.
#[inline]
pub fn balls_meet(z1: &[f64], r1: f64, z2: &[f64], r2: f64) -> bool {
    let s = r1 + r2;
    dist2(z1, z2) <= s * s
}

/// Squared distance from `z` to the axis-aligned box `center + [-half, half]^d`.
fn box_dist2(z: &[f64], center: &[f64], half: &[f64]) -> f64 {
    z.iter()
        .zip(center)
        .zip(half)
        .map(|((x, c), h)| {
            let e = ((x - c).abs() - h).max(0.0);
            e * e
        })
        .sum()
}

/// A region of `R^d`. Centers are explicit; `Slab` is centred at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Region {
    /// Closed ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// Sphere `∂B`.
    Sphere { center: Vec<f64>, radius: f64 },
    /// `inner < ‖x − c‖ ≤ outer`.
    Annulus { center: Vec<f64>, inner: f64, outer: f64 },
    /// Axis-aligned cube `c + [-half, half]^d`.
    Cube { center: Vec<f64>, half: f64 },
    /// Boundary of a cube.
    CubeBoundary { center: Vec<f64>, half: f64 },
    /// `R^2 × [-k, k]^{d-2}`.
    Slab { half_thickness: f64 },
    Point { at: Vec<f64> },
    Everywhere,
}

impl Region {
    pub fn ball_at_origin(dim: usize, radius: f64) -> Self {
        Region::Ball { center: vec![0.0; dim], radius }
    }

    pub fn sphere_at_origin(dim: usize, radius: f64) -> Self {
        Region::Sphere { center: vec![0.0; dim], radius }
    }

    pub fn cube_at_origin(dim: usize, half: f64) -> Self {
        Region::Cube { center: vec![0.0; dim], half }
    }

    pub fn origin(dim: usize) -> Self {
        Region::Point { at: vec![0.0; dim] }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Ball { center, radius } => dist2(x, center) <= radius * radius,
            Region::Sphere { center, radius } => dist2(x, center) == radius * radius,
            Region::Annulus { center, inner, outer } => {
                let d2 = dist2(x, center);
                d2 > inner * inner && d2 <= outer * outer
            }
            Region::Cube { center, half } => x.iter().zip(center).all(|(a, c)| (a - c).abs() <= *half),
            Region::CubeBoundary { center, half } => {
                let inside = x.iter().zip(center).all(|(a, c)| (a - c).abs() <= *half);
                inside && x.iter().zip(center).any(|(a, c)| (a - c).abs() == *half)
            }
            Region::Slab { half_thickness } => x.iter().skip(2).all(|a| a.abs() <= *half_thickness),
            Region::Point { at } => x == at.as_slice(),
            Region::Everywhere => true,
        }
    }

    /// The closed ball `B_r^z` meets the region.
    pub fn meets_ball(&self, z: &[f64], r: f64) -> bool {
        match self {
            Region::Ball { center, radius } => balls_meet(z, r, center, *radius),
            Region::Sphere { center, radius } => {
                let d2 = dist2(z, center);
                let lo = radius - r;
                let hi = radius + r;
                d2 <= hi * hi && (lo <= 0.0 || d2 >= lo * lo)
            }
            Region::Annulus { center, inner, outer } => {
                let d2 = dist2(z, center);
                let hi = outer + r;
                // the ball reaches beyond the inner sphere unless it sits strictly inside it
                d2 <= hi * hi && (r > *inner || d2 > (inner - r) * (inner - r) || (inner - r) < 0.0)
            }
            Region::Cube { center, half } => {
                let h = vec![*half; z.len()];
                box_dist2(z, center, &h) <= r * r
            }
            Region::CubeBoundary { center, half } => {
                let h = vec![*half; z.len()];
                if box_dist2(z, center, &h) > r * r {
                    return false;
                }
                // a ball meeting the cube misses its boundary only when strictly inside
                let inner_gap = z
                    .iter()
                    .zip(center)
                    .map(|(a, c)| half - (a - c).abs())
                    .fold(f64::INFINITY, f64::min);
                inner_gap <= r
            }
            Region::Slab { half_thickness } => {
                let h: Vec<f64> = (0..z.len()).map(|i| if i < 2 { f64::INFINITY } else { *half_thickness }).collect();
                let d2: f64 = z
                    .iter()
                    .zip(&h)
                    .map(|(x, h)| {
                        let e = (x.abs() - h).max(0.0);
                        e * e
                    })
                    .sum();
                d2 <= r * r
            }
            Region::Point { at } => dist2(z, at) <= r * r,
            Region::Everywhere => true,
        }
    }

    /// The closed ball `B_r^z` lies inside the region.
    pub fn contains_ball(&self, z: &[f64], r: f64) -> bool {
        match self {
            Region::Ball { center, radius } => {
                let s = radius - r;
                s >= 0.0 && dist2(z, center) <= s * s
            }
            Region::Annulus { center, inner, outer } => {
                let d2 = dist2(z, center);
                let s = outer - r;
                let t = inner + r;
                s >= 0.0 && d2 <= s * s && d2 > t * t
            }
            Region::Cube { center, half } => z.iter().zip(center).all(|(a, c)| (a - c).abs() + r <= *half),
            Region::Slab { half_thickness } => z.iter().skip(2).all(|a| a.abs() + r <= *half_thickness),
            Region::Everywhere => true,
            Region::Sphere { .. } | Region::CubeBoundary { .. } | Region::Point { .. } => false,
        }
    }

    /// Topological boundary, for regions where it is another region.
    pub fn boundary(&self) -> Option<Region> {
        match self {
            Region::Ball { center, radius } => Some(Region::Sphere { center: center.clone(), radius: *radius }),
            Region::Cube { center, half } => Some(Region::CubeBoundary { center: center.clone(), half: *half }),
            _ => None,
        }
    }

    /// Supremum of `‖x‖` over the region; infinite for unbounded regions.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            Region::Ball { center, radius } | Region::Sphere { center, radius } => norm2(center).sqrt() + radius,
            Region::Annulus { center, outer, .. } => norm2(center).sqrt() + outer,
            Region::Cube { center, half } | Region::CubeBoundary { center, half } => {
                center.iter().map(|c| (c.abs() + half).powi(2)).sum::<f64>().sqrt()
            }
            Region::Point { at } => norm2(at).sqrt(),
            Region::Slab { .. } | Region::Everywhere => f64::INFINITY,
        }
    }
}

/// Whether `B_{r1}^{z1} ∩ B_{r2}^{z2}` meets the cube `c + [-half, half]^d`.
///
/// Cheap certificates decide most cases; the rest fall back to Dykstra's
/// alternating projections onto the three convex sets.
pub fn lens_meets_cube(z1: &[f64], r1: f64, z2: &[f64], r2: f64, center: &[f64], half: f64) -> bool {
    if !balls_meet(z1, r1, z2, r2) {
        return false;
    }
    let cube = Region::Cube { center: center.to_vec(), half };
    if !cube.meets_ball(z1, r1) || !cube.meets_ball(z2, r2) {
        return false;
    }
    let d = z1.len();
    let dd = dist2(z1, z2).sqrt();
    // midpoint of the lens along the axis of centres lies in the lens
    let p: Vec<f64> = if dd == 0.0 {
        z1.to_vec()
    } else {
        let lo = (-r1).max(dd - r2);
        let hi = r1.min(dd + r2);
        let m = 0.5 * (lo + hi);
        (0..d).map(|i| z1[i] + m * (z2[i] - z1[i]) / dd).collect()
    };
    if cube.contains(&p) {
        return true;
    }
    // projecting a ball centre onto the cube gives a witness if it lies in the other ball
    let proj = |z: &[f64]| -> Vec<f64> { (0..d).map(|i| z[i].clamp(center[i] - half, center[i] + half)).collect() };
    for q in [proj(z1), proj(z2), proj(&p)] {
        if dist2(&q, z1) <= r1 * r1 && dist2(&q, z2) <= r2 * r2 {
            return true;
        }
    }
    dykstra_feasible(z1, r1, z2, r2, center, half, &p)
}

fn dykstra_feasible(z1: &[f64], r1: f64, z2: &[f64], r2: f64, center: &[f64], half: f64, start: &[f64]) -> bool {
    let d = z1.len();
    let scale = r1.max(r2).max(half).max(1.0);
    let tol = 1e-10 * scale;
    let proj_ball = |x: &[f64], z: &[f64], r: f64| -> Vec<f64> {
        let n = dist2(x, z).sqrt();
        if n <= r {
            x.to_vec()
        } else {
            (0..d).map(|i| z[i] + (x[i] - z[i]) * r / n).collect()
        }
    };
    let proj_cube = |x: &[f64]| -> Vec<f64> { (0..d).map(|i| x[i].clamp(center[i] - half, center[i] + half)).collect() };
    let mut x = start.to_vec();
    let mut incs = vec![vec![0.0; d]; 3];
    for _ in 0..5000 {
        for (k, inc) in incs.iter_mut().enumerate() {
            let y: Vec<f64> = (0..d).map(|i| x[i] + inc[i]).collect();
            let nx = match k {
                0 => proj_ball(&y, z1, r1),
                1 => proj_ball(&y, z2, r2),
                _ => proj_cube(&y),
            };
            for ((c, yi), ni) in inc.iter_mut().zip(&y).zip(&nx) {
                *c = yi - ni;
            }
            x = nx;
        }
        let v1 = (dist2(&x, z1).sqrt() - r1).max(0.0);
        let v2 = (dist2(&x, z2).sqrt() - r2).max(0.0);
        if v1 <= tol && v2 <= tol {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    #[test]
    fn sphere_meets_ball() {
        let s = Region::sphere_at_origin(2, 5.0);
        assert!(s.meets_ball(&[0.0, 0.0], 5.0));
        assert!(!s.meets_ball(&[0.0, 0.0], 4.9));
        assert!(s.meets_ball(&[4.0, 0.0], 1.0));
        assert!(!s.meets_ball(&[3.0, 0.0], 1.0));
        assert!(s.meets_ball(&[6.0, 0.0], 1.0));
        assert!(!s.meets_ball(&[6.1, 0.0], 1.0));
        assert!(s.meets_ball(&[0.0, 0.0], 50.0));
    }

    #[test]
    fn annulus_predicates() {
        let a = Region::Annulus { center: vec![0.0, 0.0], inner: 2.0, outer: 3.0 };
        assert!(!a.contains(&[2.0, 0.0]));
        assert!(a.contains(&[3.0, 0.0]));
        assert!(!a.meets_ball(&[0.0, 0.0], 1.0));
        assert!(a.meets_ball(&[0.0, 0.0], 2.5));
        assert!(a.meets_ball(&[3.5, 0.0], 0.5));
        assert!(!a.meets_ball(&[0.5, 0.0], 1.5));
        assert!(a.meets_ball(&[0.5, 0.0], 1.6));
    }

    #[test]
    fn cube_boundary() {
        let c = Region::CubeBoundary { center: vec![0.0, 0.0], half: 2.0 };
        assert!(!c.meets_ball(&[0.0, 0.0], 1.9));
        assert!(c.meets_ball(&[0.0, 0.0], 2.0));
        assert!(c.meets_ball(&[3.0, 0.0], 1.0));
        assert!(!c.meets_ball(&[3.0, 3.0], 1.0));
        assert!(Region::cube_at_origin(2, 2.0).contains_ball(&[1.0, 0.0], 1.0));
        assert!(!Region::cube_at_origin(2, 2.0).contains_ball(&[1.0, 0.0], 1.1));
    }

    #[test]
    fn slab_predicates() {
        let s = Region::Slab { half_thickness: 1.0 };
        assert!(s.contains(&[100.0, -50.0, 0.5]));
        assert!(!s.contains(&[0.0, 0.0, 1.5]));
        assert!(s.meets_ball(&[0.0, 0.0, 1.5], 0.5));
        assert!(!s.meets_ball(&[0.0, 0.0, 1.5], 0.4));
        assert!(s.contains_ball(&[7.0, 0.0, 0.0], 1.0));
    }

    #[test]
    fn lens_cube_against_grid_oracle() {
        // dense grid search in the cube as an independent check
        let mut r = rng::stream(11, 0, 0);
        let mut decided = 0;
        for _ in 0..300 {
            let z1 = [r.random_range(-4.0..4.0), r.random_range(-4.0..4.0)];
            let z2 = [r.random_range(-4.0..4.0), r.random_range(-4.0..4.0)];
            let r1 = r.random_range(0.2..3.0);
            let r2 = r.random_range(0.2..3.0);
            let fast = lens_meets_cube(&z1, r1, &z2, r2, &[0.0, 0.0], 1.0);
            let m = 400;
            let mut found = false;
            let mut margin_hit = false;
            for i in 0..=m {
                for j in 0..=m {
                    let p = [-1.0 + 2.0 * i as f64 / m as f64, -1.0 + 2.0 * j as f64 / m as f64];
                    let a = dist2(&p, &z1).sqrt() - r1;
                    let b = dist2(&p, &z2).sqrt() - r2;
                    if a <= 0.0 && b <= 0.0 {
                        found = true;
                    }
                    if a <= 0.01 && b <= 0.01 {
                        margin_hit = true;
                    }
                }
            }
            if found {
                assert!(fast);
                decided += 1;
            } else if !margin_hit {
                assert!(!fast);
                decided += 1;
            }
        }
        assert!(decided > 250);
    }
}

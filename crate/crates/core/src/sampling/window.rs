//! Observation windows and the enclosing domains centres are drawn from.

use crate::geometry::{dist2, Region};
use crate::measures::unit_ball_volume;
use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum WindowShape {
    Ball { radius: f64 },
    /// Cube `[-half, half]^d`.
    Box { half: f64 },
    /// `[-half_side, half_side]^2 × [-half_thickness, half_thickness]^{d-2}`.
    Slab { half_thickness: f64, half_side: f64 },
    Annulus { inner: f64, outer: f64 },
}

/// Which balls a sample keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterPolicy {
    /// Every ball meeting the window.
    Enlarged,
    /// Every ball centred in the window.
    WindowOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub dim: usize,
    pub shape: WindowShape,
    pub offset: Vec<f64>,
}

/// Region from which centres are drawn uniformly before thinning.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Ball { center: Vec<f64>, radius: f64 },
    Box { center: Vec<f64>, half: Vec<f64> },
}

impl Domain {
    pub fn volume(&self) -> f64 {
        match self {
            Domain::Ball { center, radius } => unit_ball_volume(center.len()) * radius.powi(center.len() as i32),
            Domain::Box { half, .. } => half.iter().map(|h| 2.0 * h).product(),
        }
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, r: &mut R, out: &mut Vec<f64>) {
        match self {
            Domain::Ball { center, radius } => {
                let d = center.len();
                let start = out.len();
                let mut n2 = 0.0;
                for _ in 0..d {
                    let g = rng::normal(r);
                    n2 += g * g;
                    out.push(g);
                }
                let scale = radius * rng::unit(r).powf(1.0 / d as f64) / n2.sqrt().max(f64::MIN_POSITIVE);
                for (k, c) in center.iter().enumerate() {
                    out[start + k] = c + out[start + k] * scale;
                }
            }
            Domain::Box { center, half } => {
                for (c, h) in center.iter().zip(half) {
                    out.push(c + h * (2.0 * rng::unit(r) - 1.0));
                }
            }
        }
    }
}

impl Window {
    pub fn new(dim: usize, shape: WindowShape) -> Self {
        Self { dim, shape, offset: vec![0.0; dim] }
    }

    pub fn ball(dim: usize, radius: f64) -> Self {
        Self::new(dim, WindowShape::Ball { radius })
    }

    pub fn cube(dim: usize, half: f64) -> Self {
        Self::new(dim, WindowShape::Box { half })
    }

    pub fn translated(mut self, offset: &[f64]) -> Self {
        self.offset = offset.to_vec();
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = match self.shape {
            WindowShape::Ball { radius } => radius > 0.0 && radius.is_finite(),
            WindowShape::Box { half } => half > 0.0 && half.is_finite(),
            WindowShape::Slab { half_thickness, half_side } => {
                half_thickness > 0.0 && half_side > 0.0 && half_side.is_finite() && half_thickness.is_finite()
            }
            WindowShape::Annulus { inner, outer } => inner >= 0.0 && outer > inner && outer.is_finite(),
        };
        if !ok {
            return Err(format!("window extents must be positive and finite: {:?}", self.shape));
        }
        if self.offset.len() != self.dim {
            return Err("window offset has the wrong dimension".into());
        }
        Ok(())
    }

    fn local(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.offset).map(|(a, o)| a - o).collect()
    }

    fn half_sides(&self) -> Option<Vec<f64>> {
        match self.shape {
            WindowShape::Box { half } => Some(vec![half; self.dim]),
            WindowShape::Slab { half_thickness, half_side } => {
                Some((0..self.dim).map(|i| if i < 2 { half_side } else { half_thickness }).collect())
            }
            _ => None,
        }
    }

    pub fn volume(&self) -> f64 {
        let ad = unit_ball_volume(self.dim);
        let d = self.dim as i32;
        match self.shape {
            WindowShape::Ball { radius } => ad * radius.powi(d),
            WindowShape::Annulus { inner, outer } => ad * (outer.powi(d) - inner.powi(d)),
            _ => self.half_sides().unwrap().iter().map(|h| 2.0 * h).product(),
        }
    }

    /// Radius of the smallest origin-centred ball (in window coordinates) containing the window.
    pub fn circumradius(&self) -> f64 {
        match self.shape {
            WindowShape::Ball { radius } => radius,
            WindowShape::Annulus { outer, .. } => outer,
            _ => self.half_sides().unwrap().iter().map(|h| h * h).sum::<f64>().sqrt(),
        }
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        let x = self.local(z);
        let n2: f64 = x.iter().map(|a| a * a).sum();
        match self.shape {
            WindowShape::Ball { radius } => n2 <= radius * radius,
            WindowShape::Annulus { inner, outer } => n2 > inner * inner && n2 <= outer * outer,
            _ => x.iter().zip(self.half_sides().unwrap()).all(|(a, h)| a.abs() <= h),
        }
    }

    pub fn meets_ball(&self, z: &[f64], r: f64) -> bool {
        let x = self.local(z);
        let origin = vec![0.0; self.dim];
        match self.shape {
            WindowShape::Ball { radius } => dist2(&x, &origin) <= (radius + r) * (radius + r),
            WindowShape::Annulus { inner, outer } => {
                Region::Annulus { center: origin, inner, outer }.meets_ball(&x, r)
            }
            _ => {
                let d2: f64 = x
                    .iter()
                    .zip(self.half_sides().unwrap())
                    .map(|(a, h)| {
                        let e = (a.abs() - h).max(0.0);
                        e * e
                    })
                    .sum();
                d2 <= r * r
            }
        }
    }

    /// Whether the window contains the origin-centred ball of radius `r`.
    pub fn contains_origin_ball(&self, r: f64) -> bool {
        if self.offset.iter().any(|&o| o != 0.0) {
            let o = self.offset.iter().map(|a| a * a).sum::<f64>().sqrt();
            return match self.shape {
                WindowShape::Ball { radius } => o + r <= radius,
                _ => false,
            };
        }
        match self.shape {
            WindowShape::Ball { radius } => r <= radius,
            WindowShape::Annulus { .. } => false,
            _ => self.half_sides().unwrap().iter().all(|&h| r <= h),
        }
    }

    /// Whether the window contains the origin-centred cube of half-side `h`.
    pub fn contains_origin_cube(&self, h: f64) -> bool {
        if self.offset.iter().any(|&o| o != 0.0) {
            return false;
        }
        match self.shape {
            WindowShape::Ball { radius } => h * (self.dim as f64).sqrt() <= radius,
            WindowShape::Annulus { .. } => false,
            _ => self.half_sides().unwrap().iter().all(|&s| h <= s),
        }
    }

    /// Domain covering every admissible centre for balls of radius at most `b`.
    pub fn domain(&self, policy: CenterPolicy, b: f64) -> Domain {
        let grow = match policy {
            CenterPolicy::Enlarged => b,
            CenterPolicy::WindowOnly => 0.0,
        };
        match self.shape {
            WindowShape::Ball { radius } => Domain::Ball { center: self.offset.clone(), radius: radius + grow },
            WindowShape::Annulus { outer, .. } => Domain::Ball { center: self.offset.clone(), radius: outer + grow },
            _ => Domain::Box {
                center: self.offset.clone(),
                half: self.half_sides().unwrap().iter().map(|h| h + grow).collect(),
            },
        }
    }

    /// Whether a ball `(z, r)` drawn from the domain belongs to the sample.
    pub fn admits(&self, policy: CenterPolicy, z: &[f64], r: f64) -> bool {
        match policy {
            CenterPolicy::Enlarged => self.meets_ball(z, r),
            CenterPolicy::WindowOnly => self.contains(z),
        }
    }

    pub fn describe(&self) -> String {
        let s = match self.shape {
            WindowShape::Ball { radius } => format!("ball(R={radius})"),
            WindowShape::Box { half } => format!("box(L={half})"),
            WindowShape::Slab { half_thickness, half_side } => format!("slab(k={half_thickness};L={half_side})"),
            WindowShape::Annulus { inner, outer } => format!("annulus({inner};{outer})"),
        };
        if self.offset.iter().any(|&o| o != 0.0) {
            format!("{s}@{:?}", self.offset)
        } else {
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volumes() {
        assert!((Window::cube(2, 0.5).volume() - 1.0).abs() < 1e-15);
        assert!((Window::ball(2, 2.0).volume() - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        let s = Window::new(3, WindowShape::Slab { half_thickness: 1.0, half_side: 2.0 });
        assert!((s.volume() - 32.0).abs() < 1e-12);
        assert!((Window::ball(2, 2.0).domain(CenterPolicy::Enlarged, 1.0).volume() - 9.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn translated_predicates() {
        let w = Window::ball(2, 1.0).translated(&[10.0, 0.0]);
        assert!(w.contains(&[10.5, 0.0]));
        assert!(!w.contains(&[0.0, 0.0]));
        assert!(w.meets_ball(&[8.0, 0.0], 1.0));
        assert!(!w.meets_ball(&[7.9, 0.0], 1.0));
    }

    #[test]
    fn domain_points_are_inside() {
        let mut r = rng::stream(1, 2, 3);
        let dom = Domain::Ball { center: vec![1.0, 2.0, 3.0], radius: 2.0 };
        let mut buf = Vec::new();
        for _ in 0..1000 {
            buf.clear();
            dom.sample_point(&mut r, &mut buf);
            assert!(dist2(&buf, &[1.0, 2.0, 3.0]) <= 4.0);
        }
    }
}

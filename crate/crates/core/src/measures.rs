//! Radius measures and the per-band conditional laws used by the encoder.
//!
//! Measures are unnormalized: `PowerLaw(δ)` in dimension `d` has density
//! `r^{-(d+1+δ)}` on `[1, ∞)` and total mass `1/(d+δ)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("divergent moment: power law requires delta > 0, got {0}")]
    DivergentMoment(f64),
    #[error("invalid measure parameter: {0}")]
    Invalid(String),
}

/// Shape of a radius measure. Serialized with a `kind` tag matching the config schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeasureKind {
    PowerLaw { delta: f64 },
    Truncated { delta: f64, cutoff: f64 },
    PointMass { radius: f64 },
}

/// A radius measure in a fixed dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusMeasure {
    pub dim: usize,
    pub kind: MeasureKind,
}

/// `∫_a^b t^{e-1} dt`, with `b` possibly infinite.
fn pow_integral(e: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if e.abs() < 1e-14 {
        return (b / a).ln();
    }
    if b.is_infinite() {
        return if e < 0.0 { -a.powf(e) / e } else { f64::INFINITY };
    }
    // a^e ((b/a)^e - 1) / e keeps precision for nearby endpoints
    a.powf(e) * (e * (b / a).ln()).exp_m1() / e
}

/// `∫_a^b t^{e-1} ln t dt`, with `b` possibly infinite.
fn log_pow_integral(e: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if e.abs() < 1e-14 {
        if b.is_infinite() {
            return f64::INFINITY;
        }
        return (b.ln().powi(2) - a.ln().powi(2)) / 2.0;
    }
    let anti = |t: f64| t.powf(e) * (t.ln() / e - 1.0 / (e * e));
    if b.is_infinite() {
        if e < 0.0 {
            -anti(a)
        } else {
            f64::INFINITY
        }
    } else {
        anti(b) - anti(a)
    }
}

impl RadiusMeasure {
    pub fn power_law(dim: usize, delta: f64) -> Result<Self, MeasureError> {
        check_dim(dim)?;
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(MeasureError::DivergentMoment(delta));
        }
        Ok(Self { dim, kind: MeasureKind::PowerLaw { delta } })
    }

    pub fn truncated(dim: usize, delta: f64, cutoff: f64) -> Result<Self, MeasureError> {
        check_dim(dim)?;
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(MeasureError::DivergentMoment(delta));
        }
        if !(cutoff > 0.0) || !cutoff.is_finite() {
            return Err(MeasureError::Invalid(format!("cutoff must be positive and finite, got {cutoff}")));
        }
        Ok(Self { dim, kind: MeasureKind::Truncated { delta, cutoff } })
    }

    pub fn point_mass(dim: usize, radius: f64) -> Result<Self, MeasureError> {
        check_dim(dim)?;
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(MeasureError::Invalid(format!("radius must be positive and finite, got {radius}")));
        }
        Ok(Self { dim, kind: MeasureKind::PointMass { radius } })
    }

    /// Validates a deserialized measure.
    pub fn validated(self) -> Result<Self, MeasureError> {
        match self.kind {
            MeasureKind::PowerLaw { delta } => Self::power_law(self.dim, delta),
            MeasureKind::Truncated { delta, cutoff } => Self::truncated(self.dim, delta, cutoff),
            MeasureKind::PointMass { radius } => Self::point_mass(self.dim, radius),
        }
    }

    /// Restricts this measure to `[0, cutoff]`.
    pub fn truncate(&self, cutoff: f64) -> Result<Self, MeasureError> {
        match self.kind {
            MeasureKind::PowerLaw { delta } => Self::truncated(self.dim, delta, cutoff),
            MeasureKind::Truncated { delta, cutoff: c } => Self::truncated(self.dim, delta, cutoff.min(c)),
            MeasureKind::PointMass { radius } => {
                if radius <= cutoff {
                    Ok(self.clone())
                } else {
                    Err(MeasureError::Invalid("truncation removes the only atom".into()))
                }
            }
        }
    }

    /// Same shape with a different power-law exponent.
    pub fn with_delta(&self, delta: f64) -> Result<Self, MeasureError> {
        match self.kind {
            MeasureKind::PowerLaw { .. } => Self::power_law(self.dim, delta),
            MeasureKind::Truncated { cutoff, .. } => Self::truncated(self.dim, delta, cutoff),
            MeasureKind::PointMass { .. } => Err(MeasureError::Invalid("point mass has no delta".into())),
        }
    }

    pub fn delta(&self) -> Option<f64> {
        match self.kind {
            MeasureKind::PowerLaw { delta } | MeasureKind::Truncated { delta, .. } => Some(delta),
            MeasureKind::PointMass { .. } => None,
        }
    }

    /// Smallest closed interval carrying the measure.
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            MeasureKind::PowerLaw { .. } => (1.0, f64::INFINITY),
            MeasureKind::Truncated { cutoff, .. } => (1.0f64.min(cutoff), cutoff),
            MeasureKind::PointMass { radius } => (radius, radius),
        }
    }

    /// Clips `[a, b]` to the continuous part of the support.
    fn clip(&self, a: f64, b: f64) -> Option<(f64, f64)> {
        let (lo, hi) = match self.kind {
            MeasureKind::PowerLaw { .. } => (1.0, f64::INFINITY),
            MeasureKind::Truncated { cutoff, .. } => (1.0, cutoff),
            MeasureKind::PointMass { .. } => unreachable!(),
        };
        let a = a.max(lo);
        let b = b.min(hi);
        (b > a).then_some((a, b))
    }

    fn exponent(&self) -> f64 {
        self.dim as f64 + self.delta().expect("continuous measure")
    }

    /// `∫_{[a,b]} t^k dμ(t)`.
    pub fn partial_moment(&self, k: f64, a: f64, b: f64) -> f64 {
        match self.kind {
            MeasureKind::PointMass { radius } => {
                if a <= radius && radius <= b {
                    radius.powf(k)
                } else {
                    0.0
                }
            }
            _ => match self.clip(a, b) {
                Some((a, b)) => pow_integral(k - self.exponent(), a, b),
                None => 0.0,
            },
        }
    }

    /// `∫_{[a,b]} t^k ln t dμ(t)`.
    pub fn log_partial_moment(&self, k: f64, a: f64, b: f64) -> f64 {
        match self.kind {
            MeasureKind::PointMass { radius } => {
                if a <= radius && radius <= b {
                    radius.powf(k) * radius.ln()
                } else {
                    0.0
                }
            }
            _ => match self.clip(a, b) {
                Some((a, b)) => log_pow_integral(k - self.exponent(), a, b),
                None => 0.0,
            },
        }
    }

    /// `μ([a, b])`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        self.partial_moment(0.0, a, b)
    }

    pub fn total_mass(&self) -> f64 {
        self.mass(0.0, f64::INFINITY)
    }

    /// `μ([m, ∞))`.
    pub fn tail_mass(&self, m: f64) -> f64 {
        self.mass(m, f64::INFINITY)
    }

    /// `∫ t^d dμ(t)`; errors if it diverges.
    pub fn d_moment(&self) -> Result<f64, MeasureError> {
        let v = self.partial_moment(self.dim as f64, 0.0, f64::INFINITY);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(MeasureError::DivergentMoment(self.delta().unwrap_or(0.0)))
        }
    }

    /// Normalized CDF of μ restricted to `[a, b]`, evaluated at `r`.
    pub fn cdf_in(&self, r: f64, a: f64, b: f64) -> f64 {
        let total = self.mass(a, b);
        if total == 0.0 {
            return 0.0;
        }
        (self.mass(a, r.min(b)) / total).clamp(0.0, 1.0)
    }

    /// Inverse CDF of μ restricted to `[a, b]`: maps `u ∈ [0,1)` to a radius.
    pub fn sample_in(&self, u: f64, a: f64, b: f64) -> f64 {
        match self.kind {
            MeasureKind::PointMass { radius } => radius,
            _ => {
                let (a, b) = self.clip(a, b).expect("band carries mass");
                let s = self.exponent();
                // r = a (1 - u (1 - (a/b)^s))^{-1/s}
                let q = if b.is_infinite() { 1.0 } else { -(s * (a / b).ln()).exp_m1() };
                let r = a * (-(u * q)).ln_1p().mul_add(-1.0 / s, 0.0).exp();
                r.clamp(a, b)
            }
        }
    }

    /// Radius bands partitioning `support ∩ [r_min, r_max]`: unit bands
    /// `[n, n+1)` below 64, doubling bands above.
    pub fn bands(&self, r_min: f64, r_max: f64) -> Vec<(f64, f64)> {
        match self.kind {
            MeasureKind::PointMass { radius } => {
                if r_min <= radius && radius <= r_max {
                    vec![(radius, radius)]
                } else {
                    vec![]
                }
            }
            _ => {
                let (lo, hi) = self.support();
                let hi = hi.min(r_max);
                let mut out = Vec::new();
                let mut a = lo;
                while a < hi {
                    let next = if a < 64.0 { a.floor() + 1.0 } else { 2.0 * a };
                    let b = next.min(hi);
                    if b > r_min {
                        out.push((a.max(r_min), b));
                    }
                    a = next;
                }
                out
            }
        }
    }

    pub fn describe(&self) -> String {
        match self.kind {
            MeasureKind::PowerLaw { delta } => format!("powerlaw(delta={delta})"),
            MeasureKind::Truncated { delta, cutoff } => format!("truncated(delta={delta};cutoff={cutoff})"),
            MeasureKind::PointMass { radius } => format!("pointmass(radius={radius})"),
        }
    }
}

fn check_dim(dim: usize) -> Result<(), MeasureError> {
    if dim < 2 {
        return Err(MeasureError::Invalid(format!("dimension must be at least 2, got {dim}")));
    }
    Ok(())
}

/// Volume of the unit ball in dimension `d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let mut v = [1.0, 2.0];
    for k in 2..=d {
        let next = v[k % 2] * std::f64::consts::TAU / k as f64;
        v[k % 2] = next;
    }
    v[d % 2]
}

/// Conditional law of the power-law radius on the band `[n, n+1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellLaw {
    pub n: u32,
    pub delta: f64,
    pub dim: usize,
}

impl CellLaw {
    pub fn new(n: u32, delta: f64, dim: usize) -> Self {
        assert!(n >= 1, "band index starts at 1");
        Self { n, delta, dim }
    }

    fn s(&self) -> f64 {
        self.dim as f64 + self.delta
    }

    /// `1 - (n/(n+1))^s`, the normalizing mass of the band in `F` units.
    fn q(&self) -> f64 {
        -(-self.s() * (1.0 / self.n as f64).ln_1p()).exp_m1()
    }

    /// `F(t) = 1 - t^{-(d+δ)}`.
    pub fn big_f(&self, t: f64) -> f64 {
        if t <= 1.0 {
            0.0
        } else {
            -(-self.s() * t.ln()).exp_m1()
        }
    }

    /// Radius mass of the band, `μ_δ([n, n+1))`.
    pub fn g(&self) -> f64 {
        let n = self.n as f64;
        n.powf(-self.s()) * self.q() / self.s()
    }

    /// Normalized CDF on the band.
    pub fn cdf(&self, r: f64) -> f64 {
        let n = self.n as f64;
        if r <= n {
            return 0.0;
        }
        if r >= n + 1.0 {
            return 1.0;
        }
        (-(-self.s() * (r / n).ln()).exp_m1() / self.q()).clamp(0.0, 1.0)
    }

    /// `F_n^{-1}(t)`.
    pub fn inverse(&self, t: f64) -> f64 {
        let n = self.n as f64;
        if t <= 0.0 {
            return n;
        }
        if t >= 1.0 {
            return n + 1.0;
        }
        let r = n * ((-(t * self.q())).ln_1p() * (-1.0 / self.s())).exp();
        r.clamp(n, n + 1.0)
    }

    /// Lipschitz constant of `F_n^{-1}`: the supremum of its derivative,
    /// attained at `t = 1`.
    pub fn lipschitz(&self) -> f64 {
        let n = self.n as f64;
        let s = self.s();
        self.q() / s * (n + 1.0).powf(s + 1.0) / n.powf(s)
    }

    /// Supremum of the normalized density on the band, attained at `r = n`.
    /// Increments of `t` are bounded by this times increments of `F_n^{-1}`.
    pub fn max_density(&self) -> f64 {
        self.s() / (self.n as f64 * self.q())
    }

    /// Lipschitz bound valid for every band, the `n = 1` value.
    pub fn uniform_lipschitz(delta: f64, dim: usize) -> f64 {
        CellLaw::new(1, delta, dim).lipschitz()
    }
}

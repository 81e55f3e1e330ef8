//! Poisson sampling of `η` with intensity `λ dz ⊗ μ` on a finite window.
//!
//! Radii are stratified into bands; each band draws a Poisson number of
//! centres on its own enlarged domain from a dedicated keyed stream, then
//! thins to the balls the window admits.

pub mod encoding;
pub mod io;
pub mod window;

pub use encoding::{continuation_probability, encoding_check, sample_encoded, EncodedCell, EncodingCheck, ProjectionCheck};
pub use window::{CenterPolicy, Domain, Window, WindowShape};

use crate::measures::{unit_ball_volume, MeasureError, RadiusMeasure};
use crate::rng::{self, tag};
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("truncation budget exceeded: expected discarded balls {tail:.3e} > allowed {allowed:.3e} (r_max = {r_max})")]
    TruncationBudgetExceeded { tail: f64, allowed: f64, r_max: f64 },
    #[error("invalid sampling parameters: {0}")]
    Invalid(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// How the radius range is cut off.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase")]
pub enum Truncation {
    /// Smallest `r_max` whose expected number of discarded balls is at most the budget.
    Auto { max_discarded: f64 },
    /// Fixed `r_max`; sampling fails if the discarded expectation exceeds the budget.
    Fixed { r_max: f64, max_discarded: f64 },
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Auto { max_discarded: 1e-3 }
    }
}

/// Everything needed to draw configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub lambda: f64,
    pub measure: RadiusMeasure,
    pub window: Window,
    pub centers: CenterPolicy,
    /// Radii below this are not sampled.
    pub r_min: f64,
    pub truncation: Truncation,
}

impl SamplerSpec {
    pub fn new(lambda: f64, measure: RadiusMeasure, window: Window) -> Self {
        Self { lambda, measure, window, centers: CenterPolicy::Enlarged, r_min: 0.0, truncation: Truncation::default() }
    }

    pub fn centers(mut self, policy: CenterPolicy) -> Self {
        self.centers = policy;
        self
    }

    pub fn r_min(mut self, r_min: f64) -> Self {
        self.r_min = r_min;
        self
    }

    pub fn truncation(mut self, t: Truncation) -> Self {
        self.truncation = t;
        self
    }
}

#[derive(Clone, Debug)]
struct Band {
    a: f64,
    b: f64,
    mean: f64,
    domain: Domain,
}

/// A validated sampler with precomputed bands and truncation radius.
#[derive(Clone, Debug)]
pub struct Sampler {
    spec: SamplerSpec,
    r_max: f64,
    tail: f64,
    bands: Vec<Band>,
}

/// Expected number of balls with radius above `r_max` that the window would admit.
pub fn discarded_expectation(spec: &SamplerSpec, r_max: f64) -> f64 {
    let mu = &spec.measure;
    let lo = r_max.max(spec.r_min);
    match spec.centers {
        CenterPolicy::WindowOnly => spec.lambda * spec.window.volume() * mu.mass(lo, f64::INFINITY) * open_tail(mu, lo),
        CenterPolicy::Enlarged => {
            // vol(W ⊕ B_r) ≤ α_d (ρ + r)^d with ρ the circumradius
            let d = spec.window.dim;
            let rho = spec.window.circumradius();
            let mut total = 0.0;
            let mut binom = 1.0;
            for k in 0..=d {
                total += binom * rho.powi((d - k) as i32) * mu.partial_moment(k as f64, lo, f64::INFINITY) * open_tail(mu, lo);
                binom = binom * (d - k) as f64 / (k + 1) as f64;
            }
            spec.lambda * unit_ball_volume(d) * total
        }
    }
}

/// Atoms exactly at the cut-off are sampled, so they do not count as discarded.
fn open_tail(mu: &RadiusMeasure, lo: f64) -> f64 {
    match mu.kind {
        crate::measures::MeasureKind::PointMass { radius } if radius <= lo => 0.0,
        _ => 1.0,
    }
}

impl Sampler {
    pub fn new(spec: SamplerSpec) -> Result<Self, SamplingError> {
        if !(spec.lambda >= 0.0) || !spec.lambda.is_finite() {
            return Err(SamplingError::Invalid(format!("lambda must be finite and nonnegative, got {}", spec.lambda)));
        }
        if spec.measure.dim != spec.window.dim {
            return Err(SamplingError::Invalid("measure and window dimensions differ".into()));
        }
        spec.window.validate().map_err(SamplingError::Invalid)?;
        let (_, hi) = spec.measure.support();
        let (r_max, allowed) = match spec.truncation {
            Truncation::Fixed { r_max, max_discarded } => (r_max.min(hi), max_discarded),
            Truncation::Auto { max_discarded } => (auto_r_max(&spec, max_discarded)?, max_discarded),
        };
        let tail = discarded_expectation(&spec, r_max);
        if tail > allowed {
            return Err(SamplingError::TruncationBudgetExceeded { tail, allowed, r_max });
        }
        let bands = spec
            .measure
            .bands(spec.r_min, r_max)
            .into_iter()
            .map(|(a, b)| {
                let domain = spec.window.domain(spec.centers, b);
                let mean = spec.lambda * domain.volume() * spec.measure.mass(a, b);
                Band { a, b, mean, domain }
            })
            .collect();
        Ok(Self { spec, r_max, tail, bands })
    }

    pub fn spec(&self) -> &SamplerSpec {
        &self.spec
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn truncation_tail(&self) -> f64 {
        self.tail
    }

    /// Draws one configuration together with a uniform mark per ball.
    pub fn sample_marked(&self, seed: u64) -> (Configuration, Vec<f64>) {
        let spec = &self.spec;
        let d = spec.window.dim;
        let mut centers = Vec::new();
        let mut radii = Vec::new();
        let mut marks = Vec::new();
        let mut z = Vec::with_capacity(d);
        for (k, band) in self.bands.iter().enumerate() {
            if band.mean <= 0.0 {
                continue;
            }
            let mut r = rng::stream(seed, tag::SAMPLE, k as u64);
            let count = Poisson::new(band.mean).expect("positive mean").sample(&mut r) as u64;
            for _ in 0..count {
                z.clear();
                band.domain.sample_point(&mut r, &mut z);
                let radius = spec.measure.sample_in(rng::unit(&mut r), band.a, band.b);
                let mark = rng::unit(&mut r);
                if spec.window.admits(spec.centers, &z, radius) {
                    centers.extend_from_slice(&z);
                    radii.push(radius);
                    marks.push(mark);
                }
            }
        }
        let mut cfg = self.spec_config();
        cfg.centers = centers;
        cfg.radii = radii;
        cfg.seed = seed;
        (cfg, marks)
    }

    pub fn sample(&self, seed: u64) -> Configuration {
        self.sample_marked(seed).0
    }

    /// An empty configuration carrying this sampler's window and cut-off.
    pub fn spec_config(&self) -> Configuration {
        let spec = &self.spec;
        // an untruncated bounded measure is recorded as having no cut-off
        let r_max = if self.r_max >= spec.measure.support().1 { f64::INFINITY } else { self.r_max };
        Configuration {
            dim: spec.window.dim,
            centers: Vec::new(),
            radii: Vec::new(),
            window: spec.window.clone(),
            centers_policy: spec.centers,
            r_max,
            lambda: spec.lambda,
            seed: 0,
            truncation_tail: self.tail,
        }
    }

    /// Total intensity mass `λ (dz ⊗ μ)` of the band domains.
    pub fn band_mass(&self) -> f64 {
        self.bands.iter().map(|b| b.mean).sum()
    }

    /// Draws one point from the normalised band intensity.
    ///
    /// Returns the point and whether the window admits it; averaging
    /// `h · admitted` and multiplying by [`Sampler::band_mass`] integrates `h`
    /// against the intensity of the sampled process.
    pub fn insertion<R: rand::Rng + ?Sized>(&self, rng: &mut R, z: &mut Vec<f64>) -> Option<(f64, bool)> {
        let total = self.band_mass();
        if total <= 0.0 {
            return None;
        }
        let mut u = rng::unit(rng) * total;
        let band = self
            .bands
            .iter()
            .find(|b| {
                u -= b.mean;
                u < 0.0
            })
            .unwrap_or_else(|| self.bands.iter().rev().find(|b| b.mean > 0.0).expect("positive mass"));
        z.clear();
        band.domain.sample_point(rng, z);
        let r = self.spec.measure.sample_in(rng::unit(rng), band.a, band.b);
        Some((r, self.spec.window.admits(self.spec.centers, z, r)))
    }
}

fn auto_r_max(spec: &SamplerSpec, budget: f64) -> Result<f64, SamplingError> {
    let (lo, hi) = spec.measure.support();
    if hi.is_finite() {
        return Ok(hi);
    }
    let f = |r: f64| discarded_expectation(spec, r);
    let mut r = lo.max(spec.r_min).max(1.0) * 2.0;
    while f(r) > budget {
        r *= 2.0;
        if r > 1e15 {
            return Err(SamplingError::TruncationBudgetExceeded { tail: f(r), allowed: budget, r_max: r });
        }
    }
    let (mut a, mut b) = (r / 2.0, r);
    for _ in 0..40 {
        let m = 0.5 * (a + b);
        if f(m) > budget {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(b)
}

/// Draws one configuration.
pub fn sample(
    lambda: f64,
    mu: &RadiusMeasure,
    window: &Window,
    truncation: Truncation,
    seed: u64,
) -> Result<Configuration, SamplingError> {
    let spec = SamplerSpec::new(lambda, mu.clone(), window.clone()).truncation(truncation);
    Ok(Sampler::new(spec)?.sample(seed))
}

/// Superposes an independent sample of intensity `beta_xi dz ⊗ μ` centred in `region`.
pub fn sprinkle(
    base: &Configuration,
    beta_xi: f64,
    mu: &RadiusMeasure,
    region: &Window,
    seed: u64,
) -> Result<Configuration, SamplingError> {
    let mut out = base.clone();
    if beta_xi == 0.0 {
        return Ok(out);
    }
    let truncation = if base.r_max.is_finite() {
        Truncation::Fixed { r_max: base.r_max, max_discarded: f64::INFINITY }
    } else {
        Truncation::default()
    };
    let spec = SamplerSpec::new(beta_xi, mu.clone(), region.clone())
        .centers(CenterPolicy::WindowOnly)
        .truncation(truncation);
    let extra = Sampler::new(spec)?.sample(rng::derive(seed, tag::SPRINKLE, 0));
    out.truncation_tail += extra.truncation_tail;
    for i in 0..extra.len() {
        out.push(extra.center(i), extra.radius(i));
    }
    Ok(out)
}

/// Dominating sampler whose marked draws thin to any `(λ, δ)` below it.
///
/// A ball of radius `r` is kept at `(λ, δ)` when its mark is below
/// `(λ/λ_max) r^{-(δ-δ_min)}`, the density ratio of the two intensities.
#[derive(Clone, Debug)]
pub struct CoupledSampler {
    pub sampler: Sampler,
    lambda_max: f64,
    delta_min: Option<f64>,
}

impl CoupledSampler {
    pub fn new(spec: SamplerSpec) -> Result<Self, SamplingError> {
        let lambda_max = spec.lambda;
        let delta_min = spec.measure.delta();
        Ok(Self { sampler: Sampler::new(spec)?, lambda_max, delta_min })
    }

    pub fn from_sampler(sampler: Sampler) -> Self {
        let lambda_max = sampler.spec.lambda;
        let delta_min = sampler.spec.measure.delta();
        Self { sampler, lambda_max, delta_min }
    }

    pub fn at(&self, seed: u64, lambda: f64, delta: Option<f64>) -> Configuration {
        let (cfg, marks) = self.sampler.sample_marked(seed);
        self.thin(&cfg, &marks, lambda, delta)
    }

    pub fn thin(&self, cfg: &Configuration, marks: &[f64], lambda: f64, delta: Option<f64>) -> Configuration {
        assert!(lambda <= self.lambda_max * (1.0 + 1e-12), "lambda above the dominating intensity");
        let ratio = if self.lambda_max > 0.0 { lambda / self.lambda_max } else { 0.0 };
        let shift = match (delta, self.delta_min) {
            (Some(d), Some(d0)) => {
                assert!(d >= d0 - 1e-12, "delta below the dominating exponent");
                d - d0
            }
            _ => 0.0,
        };
        let mut out = cfg.empty_like();
        out.lambda = lambda;
        for (i, &mark) in marks.iter().enumerate().take(cfg.len()) {
            let keep = ratio * cfg.radius(i).powf(-shift);
            if mark < keep {
                out.push(cfg.center(i), cfg.radius(i));
            }
        }
        out
    }
}

/// One realisation of `η` restricted to what its window admits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub dim: usize,
    centers: Vec<f64>,
    radii: Vec<f64>,
    pub window: Window,
    pub centers_policy: CenterPolicy,
    pub r_max: f64,
    pub lambda: f64,
    pub seed: u64,
    pub truncation_tail: f64,
}

impl Configuration {
    /// Hand-built configuration; the window is taken as given.
    pub fn from_balls(window: Window, balls: &[(Vec<f64>, f64)]) -> Self {
        let dim = window.dim;
        let mut cfg = Configuration {
            dim,
            centers: Vec::new(),
            radii: Vec::new(),
            window,
            centers_policy: CenterPolicy::Enlarged,
            r_max: f64::INFINITY,
            lambda: 0.0,
            seed: 0,
            truncation_tail: 0.0,
        };
        for (z, r) in balls {
            cfg.push(z, *r);
        }
        cfg
    }

    pub fn empty_like(&self) -> Self {
        Configuration { centers: Vec::new(), radii: Vec::new(), ..self.clone_meta() }
    }

    fn clone_meta(&self) -> Self {
        Configuration {
            dim: self.dim,
            centers: Vec::new(),
            radii: Vec::new(),
            window: self.window.clone(),
            centers_policy: self.centers_policy,
            r_max: self.r_max,
            lambda: self.lambda,
            seed: self.seed,
            truncation_tail: self.truncation_tail,
        }
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    #[inline]
    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn radius(&self, i: usize) -> f64 {
        self.radii[i]
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn push(&mut self, z: &[f64], r: f64) {
        assert_eq!(z.len(), self.dim);
        self.centers.extend_from_slice(z);
        self.radii.push(r);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.len()).map(move |i| (self.center(i), self.radius(i)))
    }

    /// Keeps the balls satisfying `keep`.
    pub fn filtered(&self, keep: impl Fn(&[f64], f64) -> bool) -> Self {
        let mut out = self.empty_like();
        for (z, r) in self.iter() {
            if keep(z, r) {
                out.push(z, r);
            }
        }
        out
    }

    /// Copy with the ball at `skip` removed.
    pub fn without(&self, skip: usize) -> Self {
        let mut out = self.empty_like();
        for (i, (z, r)) in self.iter().enumerate() {
            if i != skip {
                out.push(z, r);
            }
        }
        out
    }

    /// Copy with balls in the given order.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut out = self.empty_like();
        for &i in order {
            out.push(self.center(i), self.radius(i));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    fn pl(d: usize, delta: f64) -> RadiusMeasure {
        RadiusMeasure::power_law(d, delta).unwrap()
    }

    #[test]
    fn zero_intensity_is_empty() {
        let cfg = sample(0.0, &pl(2, 1.0), &Window::ball(2, 5.0), Truncation::default(), 1).unwrap();
        assert!(cfg.is_empty());
    }

    #[test]
    fn box_count_mean() {
        // λ=3, unit box, centres in the box, full radius range: mean 1
        let spec = SamplerSpec::new(3.0, pl(2, 1.0), Window::cube(2, 0.5)).centers(CenterPolicy::WindowOnly);
        let s = Sampler::new(spec).unwrap();
        let counts: Vec<u64> = (0..4000).map(|i| s.sample(i).len() as u64).collect();
        let test = stats::chi_square_poisson(&counts, 1.0);
        assert!(test.p_value > 1e-3, "{test:?}");
    }

    #[test]
    fn point_mass_enlargement() {
        // λ=1, PointMass(1), Ball(2): centres in Ball(3), mean 9π
        let mu = RadiusMeasure::point_mass(2, 1.0).unwrap();
        let s = Sampler::new(SamplerSpec::new(1.0, mu, Window::ball(2, 2.0))).unwrap();
        assert_eq!(s.r_max(), 1.0);
        assert_eq!(s.truncation_tail(), 0.0);
        let counts: Vec<u64> = (0..3000).map(|i| s.sample(i).len() as u64).collect();
        let test = stats::chi_square_poisson(&counts, 9.0 * std::f64::consts::PI);
        assert!(test.p_value > 1e-3, "{test:?}");
        for i in 0..50 {
            for (z, _) in s.sample(i).iter() {
                assert!(crate::geometry::norm2(z) <= 9.0);
            }
        }
    }

    #[test]
    fn sampled_balls_meet_window_and_respect_r_max() {
        let s = Sampler::new(SamplerSpec::new(2.0, pl(2, 0.5), Window::cube(2, 3.0))).unwrap();
        for i in 0..100 {
            let cfg = s.sample(i);
            for (z, r) in cfg.iter() {
                assert!(cfg.window.meets_ball(z, r));
                assert!(r <= cfg.r_max && r >= 1.0);
            }
        }
        assert!(s.truncation_tail() <= 1e-3);
    }

    #[test]
    fn fixed_truncation_budget() {
        let spec = SamplerSpec::new(1.0, pl(2, 1.0), Window::ball(2, 10.0))
            .truncation(Truncation::Fixed { r_max: 5.0, max_discarded: 1e-3 });
        assert!(matches!(Sampler::new(spec), Err(SamplingError::TruncationBudgetExceeded { .. })));
    }

    #[test]
    fn discarded_expectation_matches_direct_integral() {
        // Enlarged ball window: exact vol(B_{R+r}) = π (R+r)^2 in d=2
        let spec = SamplerSpec::new(1.5, pl(2, 1.0), Window::ball(2, 4.0));
        let m = 20.0;
        // ∫_m^∞ π (4 + r)^2 r^{-4} dr = π (16/(3 m^3) + 8/(2 m^2) + 1/m)
        let exact = 1.5 * std::f64::consts::PI * (16.0 / (3.0 * m * m * m) + 4.0 / (m * m) + 1.0 / m);
        assert!((discarded_expectation(&spec, m) - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn determinism() {
        let s = Sampler::new(SamplerSpec::new(1.0, pl(3, 1.0), Window::ball(3, 3.0))).unwrap();
        assert_eq!(s.sample(42), s.sample(42));
        assert_ne!(s.sample(42), s.sample(43));
    }

    #[test]
    fn sprinkle_zero_and_superposition() {
        let mu = pl(2, 1.0);
        let w = Window::cube(2, 2.0);
        let spec = SamplerSpec::new(1.0, mu.clone(), w.clone()).centers(CenterPolicy::WindowOnly);
        let s = Sampler::new(spec.clone()).unwrap();
        let base = s.sample(5);
        assert_eq!(sprinkle(&base, 0.0, &mu, &w, 9).unwrap(), base);
        let counts: Vec<u64> = (0..3000)
            .map(|i| sprinkle(&s.sample(i), 2.0, &mu, &w, 10_000 + i).unwrap().len() as u64)
            .collect();
        let mean = 3.0 * w.volume() * mu.mass(1.0, s.r_max());
        assert!(stats::chi_square_poisson(&counts, mean).p_value > 1e-3);
    }

    #[test]
    fn coupled_thinning_is_monotone() {
        let spec = SamplerSpec::new(2.0, pl(2, 0.5), Window::ball(2, 4.0));
        let c = CoupledSampler::new(spec).unwrap();
        let full = c.at(3, 2.0, Some(0.5));
        assert_eq!(full.len(), c.sampler.sample(3).len());
        let a = c.at(3, 1.0, Some(1.0));
        let b = c.at(3, 1.5, Some(0.7));
        assert!(a.len() <= b.len() && b.len() <= full.len());
        for (z, r) in a.iter() {
            assert!(b.iter().any(|(w, s)| w == z && s == r));
        }
    }

    #[test]
    fn coupled_thinning_law() {
        // thinning to (λ=1, δ=1) from (2, 0.5) gives Poisson(λ vol mass) in a WindowOnly box
        let mu = pl(2, 0.5);
        let w = Window::cube(2, 1.0);
        let spec = SamplerSpec::new(2.0, mu, w.clone()).centers(CenterPolicy::WindowOnly);
        let c = CoupledSampler::new(spec).unwrap();
        let r_max = c.sampler.r_max();
        let counts: Vec<u64> = (0..3000).map(|i| c.at(i, 1.0, Some(1.0)).len() as u64).collect();
        let mean = 1.0 * 4.0 * pl(2, 1.0).mass(1.0, r_max);
        assert!(stats::chi_square_poisson(&counts, mean).p_value > 1e-3);
    }
}

//! Bit encoding of the Poisson process on unit cells `S_n^x`.
//!
//! A cell is the set `(x + [-1/2, 1/2)^d) × [n, n+1)`. Its point count is
//! generated by continuation bits `α_k`, each point's radius by 53 fair bits
//! `β` fed through `F_n^{-1}`, and each centre coordinate by 53 fair bits `γ`.
//! Decoding at depth `K` keeps only the first `K` bits of `β` and `γ`.

use super::{CenterPolicy, Configuration, SamplingError, Window};
use crate::measures::CellLaw;
use crate::rng::{self, tag};
use rand::RngCore;
use serde::{Deserialize, Serialize};

/// Number of bits stored per `β` and `γ` word.
pub const FULL_DEPTH: u32 = 53;

/// `P(Poisson(t) ≥ k+1 | Poisson(t) ≥ k)`.
pub fn continuation_probability(k: u64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if k == 0 {
        return -(-t).exp_m1();
    }
    // (S_k - 1)/S_k with S_k = Σ_j t^j k!/(k+j)!
    let mut term = 1.0;
    let mut tail = 0.0;
    let mut j = 1u64;
    loop {
        term *= t / (k + j) as f64;
        tail += term;
        if term <= 1e-17 * tail || j > 10_000 {
            break;
        }
        j += 1;
    }
    tail / (1.0 + tail)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedCell {
    pub x: Vec<i64>,
    pub n: u32,
    pub law: CellLaw,
    pub alpha: Vec<bool>,
    /// Per point, `β` as a 53-bit integer, most significant bit first.
    pub beta: Vec<u64>,
    /// Per point, one 53-bit `γ` word per coordinate.
    pub gamma: Vec<Vec<u64>>,
}

fn truncate_bits(word: u64, depth: u32) -> f64 {
    let depth = depth.min(FULL_DEPTH);
    let kept = word >> (FULL_DEPTH - depth);
    kept as f64 / (1u64 << depth) as f64
}

impl EncodedCell {
    pub fn count(&self) -> usize {
        self.beta.len()
    }

    /// Radius from the first `depth` bits of `β`: `F_n^{-1}(2^{-K}⌊2^K t⌋)`.
    pub fn radius_at(&self, j: usize, depth: u32) -> f64 {
        self.law.inverse(truncate_bits(self.beta[j], depth))
    }

    /// Centre from the first `depth` bits of each `γ` word.
    pub fn center_at(&self, j: usize, depth: u32) -> Vec<f64> {
        self.x
            .iter()
            .zip(&self.gamma[j])
            .map(|(&x, &g)| x as f64 - 0.5 + truncate_bits(g, depth))
            .collect()
    }

    /// Point decoded from all stored bits.
    pub fn exact_point(&self, j: usize) -> (Vec<f64>, f64) {
        (self.center_at(j, FULL_DEPTH), self.radius_at(j, FULL_DEPTH))
    }

    /// Level-`depth` projection of the point.
    pub fn projected_point(&self, j: usize, depth: u32) -> (Vec<f64>, f64) {
        (self.center_at(j, depth), self.radius_at(j, depth))
    }
}

/// Generates the bits of every cell and decodes them at depth `k_depth`.
///
/// The returned configuration uses a cube window bounding the cells with
/// centres restricted to it; only the listed cells are populated.
pub fn sample_encoded(
    lambda: f64,
    delta: f64,
    dim: usize,
    cells: &[(Vec<i64>, u32)],
    k_depth: u32,
    seed: u64,
) -> Result<(Vec<EncodedCell>, Configuration), SamplingError> {
    if k_depth == 0 {
        return Err(SamplingError::Invalid("encoding depth must be at least 1".into()));
    }
    if !(delta > 0.0) {
        return Err(SamplingError::Invalid(format!("delta must be positive, got {delta}")));
    }
    let mut seen = std::collections::BTreeSet::new();
    for (x, n) in cells {
        if x.len() != dim || *n == 0 {
            return Err(SamplingError::Invalid(format!("malformed cell {x:?}, band {n}")));
        }
        if !seen.insert((x.clone(), *n)) {
            return Err(SamplingError::Invalid(format!("duplicate cell {x:?}, band {n}")));
        }
    }
    let cap = k_depth.min(FULL_DEPTH) as usize;
    let mut out = Vec::with_capacity(cells.len());
    for (idx, (x, n)) in cells.iter().enumerate() {
        let law = CellLaw::new(*n, delta, dim);
        let t = lambda * law.g();
        let mut r = rng::stream(seed, tag::ENCODE, idx as u64);
        let mut alpha = Vec::new();
        for k in 0..cap {
            let bit = rng::unit(&mut r) < continuation_probability(k as u64, t);
            alpha.push(bit);
            if !bit {
                break;
            }
        }
        let count = alpha.iter().take_while(|&&b| b).count();
        let mut beta = Vec::with_capacity(count);
        let mut gamma = Vec::with_capacity(count);
        for _ in 0..count {
            beta.push(r.next_u64() >> 11);
            gamma.push((0..dim).map(|_| r.next_u64() >> 11).collect());
        }
        out.push(EncodedCell { x: x.clone(), n: *n, law, alpha, beta, gamma });
    }
    let half = cells
        .iter()
        .flat_map(|(x, _)| x.iter().map(|&v| v.unsigned_abs() as f64 + 0.5))
        .fold(0.5, f64::max);
    let r_max = cells.iter().map(|&(_, n)| n as f64 + 1.0).fold(0.0, f64::max);
    let mut cfg = Configuration::from_balls(Window::cube(dim, half), &[]);
    cfg.centers_policy = CenterPolicy::WindowOnly;
    cfg.r_max = r_max;
    cfg.lambda = lambda;
    cfg.seed = seed;
    for cell in &out {
        for j in 0..cell.count() {
            let (z, rad) = cell.projected_point(j, k_depth);
            cfg.push(&z, rad);
        }
    }
    Ok((out, cfg))
}

/// Comparison of the bit-encoded cell sampler with the direct sampler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingCheck {
    pub dim: usize,
    pub delta: f64,
    pub lambda: f64,
    pub cell: (Vec<i64>, u32),
    pub replicas: u64,
    /// KS p-value of per-cell counts, encoded at full depth against direct.
    pub count_p: f64,
    /// KS p-value of pooled radii.
    pub radius_p: f64,
    /// Per tested depth `K`: largest `r - π_K(r)`, smallest such difference and the bound `c 2^{-K}`.
    pub projection: Vec<ProjectionCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionCheck {
    pub depth: u32,
    pub min_error: f64,
    pub max_error: f64,
    pub bound: f64,
}

impl ProjectionCheck {
    pub fn holds(&self) -> bool {
        self.min_error >= 0.0 && self.max_error <= self.bound
    }
}

/// Draws the cell `(x + [-1/2, 1/2)^d) × [n, n+1)` both ways and compares.
pub fn encoding_check(
    lambda: f64,
    delta: f64,
    dim: usize,
    cell: (Vec<i64>, u32),
    replicas: u64,
    depths: &[u32],
    seed: u64,
) -> Result<EncodingCheck, SamplingError> {
    use super::{Sampler, SamplerSpec, Truncation};
    use crate::measures::RadiusMeasure;
    use crate::stats::ks_two_sample;

    let (x, n) = cell.clone();
    let center: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let spec = SamplerSpec::new(lambda, RadiusMeasure::power_law(dim, delta)?, Window::cube(dim, 0.5).translated(&center))
        .centers(CenterPolicy::WindowOnly)
        .r_min(n as f64)
        .truncation(Truncation::Fixed { r_max: n as f64 + 1.0, max_discarded: f64::INFINITY });
    let direct = Sampler::new(spec)?;
    let cells = [cell.clone()];
    let (mut enc_counts, mut dir_counts, mut enc_radii, mut dir_radii) = (vec![], vec![], vec![], vec![]);
    let mut projection: Vec<ProjectionCheck> = depths
        .iter()
        .map(|&k| ProjectionCheck {
            depth: k,
            min_error: f64::INFINITY,
            max_error: 0.0,
            bound: CellLaw::new(n, delta, dim).lipschitz() * 2f64.powi(-(k as i32)),
        })
        .collect();
    for i in 0..replicas {
        let (enc, _) = sample_encoded(lambda, delta, dim, &cells, FULL_DEPTH, rng::derive(seed, tag::ENCODE, i))?;
        let c = &enc[0];
        enc_counts.push(c.count() as f64);
        for j in 0..c.count() {
            let r = c.radius_at(j, FULL_DEPTH);
            enc_radii.push(r);
            for p in projection.iter_mut() {
                let e = r - c.radius_at(j, p.depth);
                p.min_error = p.min_error.min(e);
                p.max_error = p.max_error.max(e);
            }
        }
        let cfg = direct.sample(rng::derive(seed, tag::SAMPLE, i));
        dir_counts.push(cfg.len() as f64);
        dir_radii.extend_from_slice(cfg.radii());
    }
    for p in projection.iter_mut() {
        if !p.min_error.is_finite() {
            p.min_error = 0.0;
        }
    }
    let radius_p = if enc_radii.is_empty() || dir_radii.is_empty() {
        if enc_radii.len() == dir_radii.len() { 1.0 } else { 0.0 }
    } else {
        ks_two_sample(&enc_radii, &dir_radii).p_value
    };
    Ok(EncodingCheck {
        dim,
        delta,
        lambda,
        cell,
        replicas,
        count_p: ks_two_sample(&enc_counts, &dir_counts).p_value,
        radius_p,
        projection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    #[test]
    fn continuation_matches_poisson_tail_ratio() {
        // upper tails summed directly to avoid cancellation
        let tail = |t: f64, k: u64| -> f64 { (k..k + 200).map(|j| stats::poisson_pmf(t, j)).sum() };
        for &t in &[0.1, 0.875, 3.0, 12.0] {
            for k in 0..15u64 {
                let expect = tail(t, k + 1) / tail(t, k);
                let got = continuation_probability(k, t);
                assert!((got - expect).abs() < 1e-10 * expect.max(1e-300) + 1e-14, "k={k} t={t}");
            }
        }
        assert_eq!(continuation_probability(3, 0.0), 0.0);
    }

    #[test]
    fn cell_count_is_poisson() {
        // λ=3, n=1, d=2, δ=1: Poisson(7/8)
        let cells = vec![(vec![0i64, 0], 1u32)];
        let counts: Vec<u64> = (0..5000)
            .map(|s| sample_encoded(3.0, 1.0, 2, &cells, 53, s).unwrap().0[0].count() as u64)
            .collect();
        assert!(stats::chi_square_poisson(&counts, 7.0 / 8.0).p_value > 1e-3);
    }

    #[test]
    fn depth_one_zero_alpha_is_empty() {
        let cells = vec![(vec![0i64, 0], 1u32)];
        let mut found = false;
        for s in 0..50 {
            let (enc, cfg) = sample_encoded(0.5, 1.0, 2, &cells, 1, s).unwrap();
            assert!(enc[0].alpha.len() == 1);
            if !enc[0].alpha[0] {
                assert_eq!(cfg.len(), 0);
                found = true;
            } else {
                assert_eq!(cfg.len(), 1);
            }
        }
        assert!(found);
    }

    #[test]
    fn projection_error_bounds() {
        let cells: Vec<(Vec<i64>, u32)> = (1..6).map(|n| (vec![n as i64, -1], n)).collect();
        for k in [4u32, 8] {
            for s in 0..200 {
                let (enc, _) = sample_encoded(40.0, 1.0, 2, &cells, k, s).unwrap();
                for cell in &enc {
                    let c = cell.law.lipschitz();
                    for j in 0..cell.count() {
                        let (z, r) = cell.exact_point(j);
                        let (pz, pr) = cell.projected_point(j, k);
                        let e = r - pr;
                        assert!(e >= 0.0 && e <= c * 2f64.powi(-(k as i32)), "{e}");
                        for (a, b) in z.iter().zip(&pz) {
                            assert_eq!(*b, (a * 2f64.powi(k as i32)).floor() / 2f64.powi(k as i32));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn encoded_and_direct_cells_agree() {
        let chk = encoding_check(3.0, 1.0, 2, (vec![2, -1], 1), 3000, &[4, 8], 7).unwrap();
        assert!(chk.count_p > 1e-3 && chk.radius_p > 1e-3, "{chk:?}");
        assert!(chk.projection.iter().all(|p| p.holds()), "{chk:?}");
    }

    #[test]
    fn rejects_duplicate_cells() {
        let cells = vec![(vec![0i64, 0], 1u32), (vec![0, 0], 1)];
        assert!(sample_encoded(1.0, 1.0, 2, &cells, 8, 0).is_err());
    }
}

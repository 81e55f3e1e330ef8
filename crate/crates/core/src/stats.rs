//! Small statistics toolkit: accumulators, Wilson intervals, goodness-of-fit.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Normal quantile for a two-sided interval at `confidence`.
pub fn z_for(confidence: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    n.inverse_cdf(0.5 + confidence / 2.0)
}

/// Running count, sum and sum of squares. Merging is associative and commutative
/// up to floating-point rounding of the sums.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let m = self.sum / n;
        ((self.sum_sq - n * m * m) / (n - 1.0)).max(0.0)
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Accumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Accumulator::new();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Wilson score interval for `successes` out of `n` trials.
pub fn wilson(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Poisson probability mass at `k`.
pub fn poisson_pmf(mean: f64, k: u64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let kf = k as f64;
    (kf * mean.ln() - mean - statrs::function::gamma::ln_gamma(kf + 1.0)).exp()
}

/// Chi-square goodness-of-fit of integer samples against Poisson(`mean`).
///
/// Adjacent values are pooled until every bin expects at least five
/// observations; the last bin collects the upper tail.
pub fn chi_square_poisson(samples: &[u64], mean: f64) -> TestResult {
    let total = samples.len() as f64;
    let max_obs = samples.iter().copied().max().unwrap_or(0);
    let mut bins: Vec<(u64, u64, f64)> = Vec::new(); // (lo, hi inclusive, expected)
    let mut lo = 0u64;
    let mut acc = 0.0;
    let mut cdf = 0.0;
    let mut k = 0u64;
    loop {
        let p = poisson_pmf(mean, k);
        acc += p * total;
        cdf += p;
        let rest = (1.0 - cdf).max(0.0) * total;
        if acc >= 5.0 && rest >= 5.0 {
            bins.push((lo, k, acc));
            lo = k + 1;
            acc = 0.0;
        } else if rest < 5.0 && k >= max_obs {
            bins.push((lo, u64::MAX, acc + rest));
            break;
        }
        k += 1;
        if k > 100_000 {
            bins.push((lo, u64::MAX, acc + rest));
            break;
        }
    }
    // a final bin below five is merged into its neighbour
    if bins.len() >= 2 && bins[bins.len() - 1].2 < 5.0 {
        let last = bins.pop().unwrap();
        let prev = bins.last_mut().unwrap();
        prev.1 = last.1;
        prev.2 += last.2;
    }
    let mut observed = vec![0u64; bins.len()];
    for &s in samples {
        let idx = bins.iter().position(|b| s >= b.0 && s <= b.1).unwrap_or(bins.len() - 1);
        observed[idx] += 1;
    }
    let expected: Vec<f64> = bins.iter().map(|b| b.2).collect();
    chi_square(&observed, &expected)
}

/// Pearson chi-square of observed counts against expected counts.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> TestResult {
    assert_eq!(observed.len(), expected.len());
    let mut stat = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        if e > 0.0 {
            stat += (o as f64 - e).powi(2) / e;
        } else if o > 0 {
            stat = f64::INFINITY;
        }
    }
    let dof = observed.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else if stat.is_infinite() {
        0.0
    } else {
        ChiSquared::new(dof as f64).expect("dof > 0").sf(stat)
    };
    TestResult { statistic: stat, dof, p_value }
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x < 1e-3 {
        return 1.0;
    }
    if x < 1.18 {
        // small-argument series converges faster here
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * x * x)).exp();
        let mut s = 0.0;
        let mut k = 1i32;
        loop {
            let term = y.powi(k * k);
            s += term;
            if term < 1e-17 || k > 100 {
                break;
            }
            k += 2;
        }
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * x * x).exp();
        s += if j % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
///
/// Ties across samples are handled by stepping through equal values together,
/// which makes the test conservative for discrete data.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestResult {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return TestResult { statistic: 0.0, dof: 0, p_value: 1.0 };
    }
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lam = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    TestResult { statistic: d, dof: 0, p_value: kolmogorov_sf(lam) }
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> TestResult {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        return TestResult { statistic: 0.0, dof: 0, p_value: 1.0 };
    }
    let mut d = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - f);
    }
    let nf = n as f64;
    let lam = (nf.sqrt() + 0.12 + 0.11 / nf.sqrt()) * d;
    TestResult { statistic: d, dof: 0, p_value: kolmogorov_sf(lam) }
}

/// Sample Pearson correlation.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    #[test]
    fn wilson_known_values() {
        // 5/10 at 95%: centre 0.5, half-width 0.2634...
        let (lo, hi) = wilson(5, 10, Z95);
        assert!((lo - 0.236_593).abs() < 1e-5, "{lo}");
        assert!((hi - 0.763_407).abs() < 1e-5, "{hi}");
        let (lo, hi) = wilson(0, 20, Z95);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.161_13).abs() < 1e-4);
        assert_eq!(wilson(0, 0, Z95), (0.0, 1.0));
    }

    #[test]
    fn z_quantiles() {
        assert!((z_for(0.95) - Z95).abs() < 1e-9);
        assert!((z_for(0.99) - 2.575_829_303_549).abs() < 1e-8);
    }

    #[test]
    fn accumulator_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let all: Accumulator = xs.iter().copied().collect();
        let mut a: Accumulator = xs[..37].iter().copied().collect();
        let b: Accumulator = xs[37..].iter().copied().collect();
        a.merge(&b);
        assert_eq!(a.count, all.count);
        assert!((a.mean() - all.mean()).abs() < 1e-14);
        assert!((a.variance() - all.variance()).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_branches_agree() {
        // both series at the switch point
        let x = 1.18f64;
        let mut s = 0.0;
        for j in 1..=100 {
            let jf = j as f64;
            let t = (-2.0 * jf * jf * x * x).exp();
            s += if j % 2 == 1 { t } else { -t };
        }
        assert!((kolmogorov_sf(1.179_999_999) - 2.0 * s).abs() < 1e-9);
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 1e-3);
    }

    #[test]
    fn chi_square_accepts_true_poisson() {
        let mut r = rng::stream(3, 0, 0);
        let mean = 2.5;
        let samples: Vec<u64> = (0..2000)
            .map(|_| {
                // inversion sampler, independent of rand_distr
                let u: f64 = r.random();
                let mut k = 0u64;
                let mut c = poisson_pmf(mean, 0);
                while u > c {
                    k += 1;
                    c += poisson_pmf(mean, k);
                }
                k
            })
            .collect();
        assert!(chi_square_poisson(&samples, mean).p_value > 1e-3);
        assert!(chi_square_poisson(&samples, 3.5).p_value < 1e-3);
    }

    #[test]
    fn ks_detects_shift() {
        let mut r = rng::stream(4, 0, 0);
        let a: Vec<f64> = (0..2000).map(|_| r.random()).collect();
        let b: Vec<f64> = (0..2000).map(|_| r.random()).collect();
        let c: Vec<f64> = (0..2000).map(|_| r.random::<f64>() + 0.1).collect();
        assert!(ks_two_sample(&a, &b).p_value > 1e-3);
        assert!(ks_two_sample(&a, &c).p_value < 1e-3);
        assert!(ks_one_sample(&a, |x| x.clamp(0.0, 1.0)).p_value > 1e-3);
    }

    #[test]
    fn wilson_coverage() {
        // 500 synthetic Bernoulli problems with known p
        let mut r = rng::stream(5, 0, 0);
        let mut covered = 0;
        for t in 0..500 {
            let p = 0.02 + 0.96 * (t as f64 / 499.0);
            let n = 200;
            let s = (0..n).filter(|_| r.random::<f64>() < p).count() as u64;
            let (lo, hi) = wilson(s, n, Z95);
            if lo <= p && p <= hi {
                covered += 1;
            }
        }
        assert!(covered as f64 / 500.0 >= 0.93, "{covered}");
    }
}

//! Normal-distribution helpers, truncated sampling, and interval estimates.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

/// Two-sided 99.9% normal quantile.
pub const Z_999: f64 = 3.290_526_731_491_926;

fn std_normal() -> Normal {
    Normal::standard()
}

pub fn phi(x: f64) -> f64 {
    std_normal().pdf(x)
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Upper tail `1 - Φ(x)`, accurate far into the tail.
pub fn normal_sf(x: f64) -> f64 {
    std_normal().sf(x)
}

pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// Stream `stream` of the generator family keyed by `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One draw from `N(0, 1)` conditioned on `[lo, hi]` by inverse CDF.
/// Tails are inverted through the survival function so that intervals far
/// from the origin keep full precision.
pub fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo <= hi);
    if hi <= 0.0 {
        return -truncated_normal(rng, -hi, -lo);
    }
    let u: f64 = rng.random();
    let x = if lo >= 0.0 {
        let (slo, shi) = (normal_sf(lo), normal_sf(hi));
        if slo <= shi {
            return lo;
        }
        -normal_quantile(shi + u * (slo - shi))
    } else {
        let (clo, chi) = (normal_cdf(lo), normal_cdf(hi));
        normal_quantile(clo + u * (chi - clo))
    };
    x.clamp(lo, hi)
}

/// Variance of `N(0, 1)` conditioned on `[a, b]`.
pub fn truncated_normal_variance(a: f64, b: f64) -> f64 {
    let z = normal_cdf(b) - normal_cdf(a);
    let (pa, pb) = (phi(a), phi(b));
    let ta = if a.is_finite() { a * pa } else { 0.0 };
    let tb = if b.is_finite() { b * pb } else { 0.0 };
    let m = (pa - pb) / z;
    1.0 + (ta - tb) / z - m * m
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Running mean and variance (Welford).
#[derive(Clone, Debug, Default)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Two-proportion z statistic with pooled variance.
pub fn two_proportion_z(k1: u64, n1: u64, k2: u64, n2: u64) -> f64 {
    let (p1, p2) = (k1 as f64 / n1 as f64, k2 as f64 / n2 as f64);
    let p = (k1 + k2) as f64 / (n1 + n2) as f64;
    let se = (p * (1.0 - p) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        0.0
    } else {
        (p1 - p2) / se
    }
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_quantiles_are_precise() {
        let s = normal_sf(2.0);
        assert!((s / 0.022_750_131_948_179_2 - 1.0).abs() < 1e-9, "{s:e}");
        assert!((normal_sf(20.0) / 2.753_624_118_606_155_6e-89 - 1.0).abs() < 1e-9);
        let x = -normal_quantile(normal_sf(9.0));
        assert!((x - 9.0).abs() < 1e-9);
    }

    #[test]
    fn truncated_draws_stay_inside() {
        let mut rng = rng_for(1, 0);
        for (lo, hi) in [(-4.0, 4.0), (2.0, 4.0), (-4.0, -2.0), (7.0, 7.004), (0.0, 0.0039)] {
            for _ in 0..1000 {
                let x = truncated_normal(&mut rng, lo, hi);
                assert!(x >= lo && x <= hi, "{x} outside [{lo}, {hi}]");
            }
        }
    }

    #[test]
    fn truncated_variance_limits() {
        assert!((truncated_normal_variance(f64::NEG_INFINITY, f64::INFINITY) - 1.0).abs() < 1e-12);
        let v = truncated_normal_variance(-1e-3, 1e-3);
        assert!((v - 1e-6 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn wilson_contains_point_estimate() {
        let (lo, hi) = wilson_interval(45, 1000, Z_999);
        assert!(lo < 0.045 && 0.045 < hi);
        let (lo, hi) = wilson_interval(0, 1_000_000, Z_999);
        assert_eq!(lo, 0.0);
        assert!(hi < 1.1e-5);
    }

    #[test]
    fn moments_match_closed_form() {
        let m: Moments = [1.0, 2.0, 3.0, 4.0].into_iter().collect();
        assert_eq!(m.mean(), 2.5);
        assert!((m.variance() - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn slope_of_power_law() {
        let x: Vec<f64> = [1.0f64, 2.0, 3.0].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = [1.0f64, 2.0, 3.0].iter().map(|v| (5.0 * v * v).ln()).collect();
        assert!((ols_slope(&x, &y) - 2.0).abs() < 1e-12);
    }
}

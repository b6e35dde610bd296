//! Gaussian-space simulation of protocols: truncated sampling, the
//! Boolean-to-Gaussian coefficient identity, clean-protocol runs and their
//! martingales. Everything here is `f64`.

pub mod clean;
pub mod martingale;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::boolean::{walsh_hadamard, BooleanFn};
use crate::error::{Error, Result};
use crate::fiber::xor_fiber;
use crate::linalg::Samples;
use crate::protocol::ProtocolTree;
use crate::stats::{normal_cdf, rng_for, Moments};

pub use clean::{clean_check, run_clean_protocol, Bin, CleanCheck, CleanupRun, Message, Outcome, RunInvariants, StepKind, StepRecord};
pub use martingale::{martingale_report, MartingaleReport, StepStat};

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianConfig {
    pub n: usize,
    /// Coordinates are conditioned to `[-t, t]`; `f64::INFINITY` disables truncation.
    pub t: f64,
    /// Real messages are multiples of `2^-l`.
    pub l: u32,
    pub lambda: f64,
    pub n_pop: usize,
    pub n_min: usize,
    pub seed: u64,
    /// Draw budget per population refresh.
    pub max_draws: u64,
    /// Bootstrap resamples behind the eigenvalue noise margin.
    pub bootstrap: usize,
}

impl GaussianConfig {
    /// `λ = 100`, `T = 4`, `L = 8`, `N = 20000`, `N_min = 500`.
    pub fn level1(n: usize, seed: u64) -> Self {
        Self { n, t: 4.0, l: 8, lambda: 100.0, n_pop: 20_000, n_min: 500, seed, max_draws: 10_000_000, bootstrap: 16 }
    }

    /// Level-one defaults with `λ = d·(log₂ n)⁴`.
    pub fn level2(n: usize, d: usize, seed: u64) -> Self {
        let lambda = d as f64 * (n as f64).log2().powi(4);
        Self { lambda, ..Self::level1(n, seed) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t.is_nan() || self.t <= 0.0 {
            return Err(Error::InvalidArgument(format!("T must be positive, got {}", self.t)));
        }
        if self.l < 1 || self.l > 40 {
            return Err(Error::InvalidArgument(format!("L must lie in 1..=40, got {}", self.l)));
        }
        if self.lambda.is_nan() || self.lambda <= 0.0 {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.n_pop < 10 * self.n_min || self.n_min < 2 {
            return Err(Error::InvalidArgument(format!(
                "need N >= 10·N_min and N_min >= 2, got N = {}, N_min = {}",
                self.n_pop, self.n_min
            )));
        }
        Ok(())
    }
}

/// `runs` walks with seeds `cfg.seed + i`.
pub fn run_ensemble(c: &ProtocolTree<f64>, level: usize, eta: &SignPattern, cfg: &GaussianConfig, runs: usize) -> Result<Vec<CleanupRun>> {
    (0..runs as u64)
        .map(|i| run_clean_protocol(c, level, eta, &GaussianConfig { seed: cfg.seed.wrapping_add(i), ..cfg.clone() }))
        .collect()
}

/// One point of `N(0, I_n)` conditioned on `[-t, t]^n`.
pub fn truncated_point<R: Rng + ?Sized>(rng: &mut R, n: usize, t: f64, out: &mut [f64]) {
    for v in out.iter_mut().take(n) {
        *v = loop {
            let g: f64 = rng.sample(StandardNormal);
            if g.abs() <= t {
                break g;
            }
        };
    }
}

/// `N` i.i.d. points of the truncated standard Gaussian on `[-T, T]^n`.
pub fn sample_truncated_gaussian(cfg: &GaussianConfig) -> Samples {
    let mut rng = rng_for(cfg.seed, 1);
    let mut s = Samples::new(cfg.n);
    let mut row = vec![0.0; cfg.n];
    for _ in 0..cfg.n_pop {
        truncated_point(&mut rng, cfg.n, cfg.t, &mut row);
        s.push(&row);
    }
    s
}

/// Box measure `γ([-T, T]^n)`: empirical fraction of raw Gaussian points and
/// the exact value `(2Φ(T) - 1)^n`.
pub fn box_measure(n: usize, t: f64, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = rng_for(seed, 2);
    let mut inside = 0u64;
    for _ in 0..samples {
        let ok = (0..n).all(|_| {
            let g: f64 = rng.sample(StandardNormal);
            g.abs() <= t
        });
        inside += ok as u64;
    }
    (inside as f64 / samples as f64, (2.0 * normal_cdf(t) - 1.0).powi(n as i32))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactCheck {
    pub subset: u64,
    /// `ĥ(S)` from the exact fiber.
    pub lhs: f64,
    /// `(π/2)^{|S|}` times the Monte-Carlo mean of `C(sgn x, sgn y) x_S y_S`.
    pub rhs: f64,
    pub stderr: f64,
    pub z: f64,
}

/// Compares `ĥ(S)` with its Gaussian form for every subset in `subsets`
/// (each of size 1 or 2) from one shared sample of `n_samples` pairs.
pub fn check_fact_boolean_to_real(
    c: &ProtocolTree<f64>,
    subsets: &[u64],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<FactCheck>> {
    let n = c.alice_bits();
    if n > 12 {
        return Err(Error::DimensionTooLarge { n, cap: 12 });
    }
    for &s in subsets {
        let k = s.count_ones();
        if !(1..=2).contains(&k) || s >> n != 0 {
            return Err(Error::InvalidArgument(format!("subset {s:#b} must have size 1 or 2 within [n]")));
        }
    }
    let h: BooleanFn<f64> = xor_fiber(c)?;
    let spec = walsh_hadamard(&h);
    let compiled = c.compile();
    let mut acc: Vec<Moments> = vec![Moments::default(); subsets.len()];
    let mut rng = rng_for(seed, 3);
    let (mut x, mut y) = (vec![0.0; n], vec![0.0; n]);
    for _ in 0..n_samples {
        let (mut sx, mut sy) = (0u64, 0u64);
        for i in 0..n {
            x[i] = rng.sample(StandardNormal);
            y[i] = rng.sample(StandardNormal);
            if x[i] < 0.0 {
                sx |= 1 << i;
            }
            if y[i] < 0.0 {
                sy |= 1 << i;
            }
        }
        let v = *compiled.value(sx, sy);
        for (m, &s) in acc.iter_mut().zip(subsets) {
            let mut prod = v;
            let mut bits = s;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                prod *= x[i] * y[i];
                bits &= bits - 1;
            }
            m.push(prod);
        }
    }
    Ok(subsets
        .iter()
        .zip(acc)
        .map(|(&s, m)| {
            let scale = std::f64::consts::FRAC_PI_2.powi(s.count_ones() as i32);
            let lhs = *spec.coeff(s);
            let rhs = scale * m.mean();
            let stderr = scale * m.stderr();
            let z = if stderr > 0.0 { (rhs - lhs) / stderr } else { 0.0 };
            FactCheck { subset: s, lhs, rhs, stderr, z }
        })
        .collect())
}

/// Sign pattern `η`: a `±1` vector (level 1) or a symmetric `±1` matrix with
/// zero diagonal (level 2), stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SignPattern {
    Level1(Vec<i8>),
    Level2 { n: usize, entries: Vec<i8> },
}

impl SignPattern {
    pub fn level(&self) -> usize {
        match self {
            SignPattern::Level1(_) => 1,
            SignPattern::Level2 { .. } => 2,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            SignPattern::Level1(v) => v.len(),
            SignPattern::Level2 { n, .. } => *n,
        }
    }

    /// Signs of the exact level-`k` fiber coefficients, `+1` where a coefficient vanishes.
    pub fn from_fiber(c: &ProtocolTree<f64>, level: usize) -> Result<Self> {
        let spec = walsh_hadamard(&xor_fiber(c)?);
        let n = spec.n();
        let sign = |s: u64| if *spec.coeff(s) < 0.0 { -1 } else { 1 };
        match level {
            1 => Ok(SignPattern::Level1((0..n).map(|i| sign(1 << i)).collect())),
            2 => {
                let mut entries = vec![0i8; n * n];
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            entries[i * n + j] = sign(1 << i | 1 << j);
                        }
                    }
                }
                Ok(SignPattern::Level2 { n, entries })
            }
            _ => Err(Error::InvalidArgument(format!("level must be 1 or 2, got {level}"))),
        }
    }

    pub fn random(n: usize, level: usize, seed: u64) -> Result<Self> {
        let mut rng = rng_for(seed, 4);
        let mut sign = || if rng.random::<bool>() { -1i8 } else { 1 };
        match level {
            1 => Ok(SignPattern::Level1((0..n).map(|_| sign()).collect())),
            2 => {
                let mut entries = vec![0i8; n * n];
                for i in 0..n {
                    for j in i + 1..n {
                        let s = sign();
                        entries[i * n + j] = s;
                        entries[j * n + i] = s;
                    }
                }
                Ok(SignPattern::Level2 { n, entries })
            }
            _ => Err(Error::InvalidArgument(format!("level must be 1 or 2, got {level}"))),
        }
    }

    /// `η` in feature coordinates (see [`features`]).
    pub fn feature_weights(&self) -> Vec<f64> {
        match self {
            SignPattern::Level1(v) => v.iter().map(|&s| s as f64).collect(),
            SignPattern::Level2 { n, entries } => off_diagonal_pairs(*n).map(|(i, j)| entries[i * n + j] as f64).collect(),
        }
    }
}

fn off_diagonal_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
}

/// Feature dimension: `n` at level 1, `n² - n` at level 2.
pub fn feature_dim(n: usize, level: usize) -> usize {
    if level == 1 {
        n
    } else {
        n * n - n
    }
}

/// Level 1: `x` itself. Level 2: the off-diagonal entries of `x ⊗ x` in
/// row-major order, so inner products and norms agree with the Frobenius
/// ones on zero-diagonal matrices.
pub fn features(x: &[f64], level: usize, out: &mut Vec<f64>) {
    out.clear();
    if level == 1 {
        out.extend_from_slice(x);
    } else {
        out.extend(off_diagonal_pairs(x.len()).map(|(i, j)| x[i] * x[j]));
    }
}

/// Expands off-diagonal features back to a full row-major `n × n` matrix.
pub fn feature_matrix(f: &[f64], n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for (v, (i, j)) in f.iter().zip(off_diagonal_pairs(n)) {
        m[i * n + j] = *v;
    }
    m
}

/// Sign-pattern index of a real point: bit `i` set iff `x_i < 0`.
pub fn pattern_of(x: &[f64]) -> u64 {
    x.iter().enumerate().fold(0, |acc, (i, &v)| if v < 0.0 { acc | 1 << i } else { acc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{maj_xor_protocol, x1y1_protocol};

    #[test]
    fn config_defaults_and_validation() {
        let c = GaussianConfig::level2(5, 3, 0);
        assert!((c.lambda - 3.0 * 5f64.log2().powi(4)).abs() < 1e-12);
        assert!(c.validate().is_ok());
        let bad = GaussianConfig { n_min: 3000, ..GaussianConfig::level1(4, 0) };
        assert!(bad.validate().is_err());
        let bad = GaussianConfig { t: 0.0, ..GaussianConfig::level1(4, 0) };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn truncated_population_stays_in_box() {
        let cfg = GaussianConfig { n_pop: 5000, t: 1.5, ..GaussianConfig::level1(3, 9) };
        let s = sample_truncated_gaussian(&cfg);
        assert_eq!(s.len(), 5000);
        assert!(s.data.iter().all(|v| v.abs() <= 1.5));
        assert_eq!(s, sample_truncated_gaussian(&cfg));
    }

    #[test]
    fn untruncated_flag_allows_large_values() {
        let cfg = GaussianConfig { n_pop: 20000, t: f64::INFINITY, ..GaussianConfig::level1(5, 2) };
        let s = sample_truncated_gaussian(&cfg);
        assert!(s.data.iter().any(|v| v.abs() > 3.0));
    }

    #[test]
    fn fact_check_on_constant_and_x1y1() {
        let c = ProtocolTree::<f64>::constant(2, 2, 1.0).unwrap();
        let r = check_fact_boolean_to_real(&c, &[1], 1000, 0).unwrap();
        assert_eq!(r[0].lhs, 0.0);
        let t = x1y1_protocol::<f64>(2).unwrap();
        let r = check_fact_boolean_to_real(&t, &[1, 2, 3], 200_000, 5).unwrap();
        assert_eq!(r[0].lhs, 1.0);
        assert!((r[0].rhs - 1.0).abs() < 0.02);
        assert!(r.iter().all(|f| f.z.abs() < 5.0));
        assert!(check_fact_boolean_to_real(&t, &[7], 10, 0).is_err());
    }

    #[test]
    fn sign_pattern_from_majority_fiber() {
        let c = maj_xor_protocol::<f64>(3, 4).unwrap();
        assert_eq!(SignPattern::from_fiber(&c, 1).unwrap(), SignPattern::Level1(vec![1, 1, 1, 1]));
        let eta = SignPattern::random(4, 2, 1).unwrap();
        if let SignPattern::Level2 { n, entries } = &eta {
            for i in 0..*n {
                assert_eq!(entries[i * n + i], 0);
                for j in 0..*n {
                    assert_eq!(entries[i * n + j], entries[j * n + i]);
                }
            }
        }
        assert_eq!(eta.feature_weights().len(), 12);
    }

    #[test]
    fn level2_features_match_matrix_inner_products() {
        let x = [1.0, -2.0, 0.5];
        let mut f = Vec::new();
        features(&x, 2, &mut f);
        assert_eq!(f, vec![-2.0, 0.5, -2.0, -1.0, 0.5, -1.0]);
        let m = feature_matrix(&f, 3);
        assert_eq!(m[3 + 2], -1.0);
        assert_eq!(m[4], 0.0);
    }

    #[test]
    fn box_measure_matches_exact() {
        let (emp, exact) = box_measure(5, 2.0, 100_000, 3);
        assert!((emp - exact).abs() < 0.01);
    }
}

//! Batch drivers: the exact coin-problem scan, the Gap-Hamming pipeline,
//! growth tables over protocol corpora, and corpus files.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::boolean::{biased_expectation, l1_level_weight, max_restricted_level1, walsh_hadamard};
use crate::error::{Error, Result};
use crate::fiber::xor_fiber;
use crate::protocol::{maj_xor_protocol, random_protocol, x1y1_protocol, ProtocolTree};
use crate::scalar::{Exact, Scalar};

/// Largest `n` for the coin scan and the Gap-Hamming demo.
pub const MAX_EXPERIMENT_DIM: usize = 12;
/// Largest `n` for the restriction maximum and for direct enumeration.
pub const MAX_RESTRICTION_DIM: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub params: BTreeMap<String, Value>,
    pub outputs: Vec<String>,
}

impl ExperimentSpec {
    pub fn new(name: &str) -> Self {
        Self { name: name.into(), params: BTreeMap::new(), outputs: Vec::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    /// `n ≤ 14`, `d ≤ 2n`, `k ∈ {1, 2}`, `|ρ| < 1`, `N ≤ 10^8`.
    pub fn validate(&self) -> Result<()> {
        let int = |k: &str| self.params.get(k).and_then(Value::as_u64);
        if let Some(n) = int("n") {
            if n > 14 {
                return Err(Error::DimensionTooLarge { n: n as usize, cap: 14 });
            }
            if int("d").is_some_and(|d| d > 2 * n) {
                return Err(Error::InvalidArgument("d exceeds 2n".into()));
            }
        }
        if int("k").is_some_and(|k| !(1..=2).contains(&k)) {
            return Err(Error::InvalidArgument("k must be 1 or 2".into()));
        }
        if int("N").is_some_and(|n| n > 100_000_000) {
            return Err(Error::InvalidArgument("N above 1e8".into()));
        }
        if let Some(Value::Array(rhos)) = self.params.get("rho") {
            if rhos.iter().any(|r| r.as_f64().is_none_or(|r| r.abs() >= 1.0)) {
                return Err(Error::InvalidArgument("rho must lie in (-1, 1)".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("experiment specs serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }
}

fn big(v: &Exact) -> BigRational {
    BigRational::new(BigInt::from(*v.numer()), BigInt::from(*v.denom()))
}

fn big_of_f64(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::InvalidArgument(format!("non-finite value {x}")))
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_nan() || rho.abs() >= 1.0 {
        return Err(Error::InvalidArgument(format!("rho must lie in (-1, 1), got {rho}")));
    }
    Ok(())
}

/// Leaves are read as exact binary fractions.
fn exact_tree(c: &ProtocolTree<f64>) -> Result<ProtocolTree<Exact>> {
    c.map_leaves(&|v| Exact::from_f64(*v))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    /// `|Δ| ≤ t · Σ_{j≤terms} |ρ|^j / j`, a lower bound on `t·ln(1/(1−|ρ|))`.
    Holds { terms: u32 },
    /// `|Δ| > t · (partial sum + geometric tail)`, an upper bound.
    Violated { terms: u32 },
    /// Not decided within the term budget.
    Undecided,
    /// No restriction maximum (`n` above the cap).
    Skipped,
}

impl Certificate {
    pub fn ok(&self) -> bool {
        matches!(self, Certificate::Holds { .. } | Certificate::Skipped)
    }
}

const SERIES_TERMS: u32 = 400;

/// Decides `delta ≤ t·ln(1/(1−a))` for rationals `0 ≤ a < 1` through the
/// series `Σ a^j / j`, whose partial sums bound the logarithm from below and
/// whose tails are at most `a^{J+1}/((J+1)(1−a))`.
pub fn certify_log_bound(delta: &BigRational, t: &BigRational, a: &BigRational) -> Certificate {
    let one = BigRational::one();
    let mut partial = BigRational::zero();
    let mut power = one.clone();
    for j in 1..=SERIES_TERMS {
        power = &power * a;
        partial += &power / BigRational::from_integer(BigInt::from(j));
        if *delta <= t * &partial {
            return Certificate::Holds { terms: j };
        }
        let tail = &power * a / (BigRational::from_integer(BigInt::from(j + 1)) * (&one - a));
        if *delta > t * (&partial + tail) {
            return Certificate::Violated { terms: j };
        }
    }
    Certificate::Undecided
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoinRow {
    pub rho: f64,
    /// `|E_{μ_ρ}[h] − E_{μ_0}[h]|`, rounded from the exact rational.
    pub delta: f64,
    pub ln_factor: f64,
    pub bound: Option<f64>,
    pub certificate: Certificate,
    /// `|Δ| / (|ρ|·√d)`; zero when `Δ = 0`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoinReport {
    pub n: usize,
    pub d: usize,
    /// Exact maximum of `L_{1,1}` over all coordinate restrictions of `h`.
    pub t: Option<f64>,
    pub rows: Vec<CoinRow>,
}

impl CoinReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.certificate.ok())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rho,delta,ln_factor,t,bound,certificate,ratio\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{},{},{},{:.12e}\n",
                r.rho,
                r.delta,
                r.ln_factor,
                self.t.map_or(String::new(), |t| format!("{t:.12e}")),
                r.bound.map_or(String::new(), |b| format!("{b:.12e}")),
                match r.certificate {
                    Certificate::Holds { .. } => "holds",
                    Certificate::Violated { .. } => "violated",
                    Certificate::Undecided => "undecided",
                    Certificate::Skipped => "skipped",
                },
                r.ratio
            ));
        }
        out
    }
}

/// Exact coin-problem advantages of the XOR-fiber `h` of `c`, with the
/// restriction-closed level-one bound certified in rational arithmetic.
pub fn coin_scan(c: &ProtocolTree<f64>, rho_grid: &[f64]) -> Result<CoinReport> {
    let n = c.alice_bits();
    if n != c.bob_bits() {
        return Err(Error::InvalidArgument("coin scan needs equal input widths".into()));
    }
    if n > MAX_EXPERIMENT_DIM {
        return Err(Error::DimensionTooLarge { n, cap: MAX_EXPERIMENT_DIM });
    }
    for &r in rho_grid {
        check_rho(r)?;
    }
    let h = xor_fiber(&exact_tree(c)?)?;
    let spec = walsh_hadamard(&h);
    let coeffs: Vec<BigRational> = spec.coeffs().iter().map(big).collect();
    let t = if n <= MAX_RESTRICTION_DIM { Some(big(&max_restricted_level1(&h)?)) } else { None };
    let d = c.cost();
    let mut rows = Vec::with_capacity(rho_grid.len());
    for &rho in rho_grid {
        let r = big_of_f64(rho)?;
        let powers: Vec<BigRational> = std::iter::successors(Some(BigRational::one()), |p| Some(p * &r)).take(n + 1).collect();
        let mut delta = BigRational::zero();
        for (s, coef) in coeffs.iter().enumerate().skip(1) {
            if !coef.is_zero() {
                delta += coef * &powers[s.count_ones() as usize];
            }
        }
        let delta = delta.abs();
        let a = r.abs();
        let certificate = match &t {
            Some(t) => certify_log_bound(&delta, t, &a),
            None => Certificate::Skipped,
        };
        let delta_f = delta.to_f64().unwrap_or(f64::NAN);
        let ln_factor = -(-rho.abs()).ln_1p();
        let ratio = if delta.is_zero() { 0.0 } else { delta_f / (rho.abs() * (d as f64).sqrt()) };
        rows.push(CoinRow {
            rho,
            delta: delta_f,
            ln_factor,
            bound: t.as_ref().map(|t| t.to_f64().unwrap_or(f64::NAN) * ln_factor),
            certificate,
            ratio,
        });
    }
    Ok(CoinReport { n, d, t: t.map(|t| t.to_f64().unwrap_or(f64::NAN)), rows })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `x ⊙ y ∼ μ_ρ`.
    Plus,
    /// `x ⊙ y ∼ μ_{−ρ}`.
    Minus,
}

/// `σ_{±ρ}`: `x` uniform and `y = x ⊙ z` with `z ∼ μ_{±ρ}`. With `promise`
/// set, `σ_ρ` is conditioned on `⟨x, y⟩ ≥ ⌈√n⌉` and `σ_{−ρ}` on
/// `⟨x, y⟩ ≤ −⌈√n⌉`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelatedPairDistribution {
    pub n: usize,
    pub rho: f64,
    pub side: Side,
    pub promise: bool,
}

/// `⌈√n⌉`.
pub fn promise_threshold(n: usize) -> i64 {
    let mut s = (n as f64).sqrt() as i64;
    while s * s < n as i64 {
        s += 1;
    }
    while s > 0 && (s - 1) * (s - 1) >= n as i64 {
        s -= 1;
    }
    s
}

impl CorrelatedPairDistribution {
    pub fn new(n: usize, rho: f64, side: Side, promise: bool) -> Result<Self> {
        check_rho(rho)?;
        if n == 0 || n > MAX_EXPERIMENT_DIM {
            return Err(Error::DimensionTooLarge { n, cap: MAX_EXPERIMENT_DIM });
        }
        Ok(Self { n, rho, side, promise })
    }

    fn signed_rho(&self) -> f64 {
        match self.side {
            Side::Plus => self.rho,
            Side::Minus => -self.rho,
        }
    }

    fn in_promise(&self, inner: i64) -> bool {
        let s = promise_threshold(self.n);
        match self.side {
            Side::Plus => inner >= s,
            Side::Minus => inner <= -s,
        }
    }

    /// Unconditioned `μ_{±ρ}(z)`; bit `i` of `z` marks `z_{i+1} = −1`.
    fn mu(&self, z: u64) -> f64 {
        let r = self.signed_rho();
        let minus = z.count_ones() as i32;
        ((1.0 + r) / 2.0).powi(self.n as i32 - minus) * ((1.0 - r) / 2.0).powi(minus)
    }

    /// Probability that `z` falls outside the promise set.
    pub fn promise_failure(&self) -> f64 {
        let n = self.n;
        (0..1u64 << n).filter(|&z| !self.in_promise(n as i64 - 2 * z.count_ones() as i64)).map(|z| self.mu(z)).sum()
    }

    /// Law of `z = x ⊙ y`, conditioned when `promise` is set.
    pub fn z_law(&self) -> Vec<f64> {
        let n = self.n;
        let mut p: Vec<f64> = (0..1u64 << n)
            .map(|z| {
                let keep = !self.promise || self.in_promise(n as i64 - 2 * z.count_ones() as i64);
                if keep {
                    self.mu(z)
                } else {
                    0.0
                }
            })
            .collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= total);
        p
    }

    pub fn probability(&self, x: u64, y: u64) -> f64 {
        self.z_law()[(x ^ y) as usize] / (1u64 << self.n) as f64
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> (u64, u64) {
        let n = self.n;
        let x = rng.random_range(0..1u64 << n);
        let p_minus = (1.0 - self.signed_rho()) / 2.0;
        loop {
            let z = (0..n).fold(0u64, |acc, i| acc | ((rng.random::<f64>() < p_minus) as u64) << i);
            if !self.promise || self.in_promise(n as i64 - 2 * z.count_ones() as i64) {
                return (x, x ^ z);
            }
        }
    }

    /// `E[C(x, y)]` through the fiber: `Σ_z law(z)·h(z)`.
    pub fn expectation_via_fiber(&self, c: &ProtocolTree<f64>) -> Result<f64> {
        let h = xor_fiber(c)?;
        Ok(self.z_law().iter().zip(h.values()).map(|(p, v)| p * v).sum())
    }

    /// `E[C(x, y)]` by enumerating every `(x, z)` pair.
    pub fn expectation_direct(&self, c: &ProtocolTree<f64>) -> Result<f64> {
        let n = self.n;
        if n > MAX_RESTRICTION_DIM {
            return Err(Error::DimensionTooLarge { n, cap: MAX_RESTRICTION_DIM });
        }
        let law = self.z_law();
        let compiled = c.compile();
        let mut total = 0.0;
        for x in 0..1u64 << n {
            for (z, p) in law.iter().enumerate() {
                if *p > 0.0 {
                    total += p * compiled.value(x, x ^ z as u64);
                }
            }
        }
        Ok(total / (1u64 << n) as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HoeffdingCheck {
    pub n: usize,
    pub rho: f64,
    pub deviation: f64,
    pub exact: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `Pr_{z∼μ_ρ}[|Σz_i − nρ| ≥ dev]` summed over the binomial law of the
/// number of `−1` entries, against `2·exp(−2·dev²/(4n))`.
pub fn hoeffding_check(n: usize, rho: f64, deviation: f64) -> Result<HoeffdingCheck> {
    check_rho(rho)?;
    let p_minus = (1.0 - rho) / 2.0;
    let mean = n as f64 * rho;
    let mut exact = 0.0;
    let mut binom = 1.0;
    for k in 0..=n {
        if k > 0 {
            binom = binom * (n - k + 1) as f64 / k as f64;
        }
        let sum = n as f64 - 2.0 * k as f64;
        if (sum - mean).abs() >= deviation {
            exact += binom * p_minus.powi(k as i32) * (1.0 - p_minus).powi((n - k) as i32);
        }
    }
    let bound = 2.0 * (-2.0 * deviation * deviation / (4.0 * n as f64)).exp();
    Ok(HoeffdingCheck { n, rho, deviation, exact, bound, holds: exact <= bound })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapHammingReport {
    pub n: usize,
    pub rho: f64,
    pub threshold: i64,
    pub e_plus: f64,
    pub e_minus: f64,
    pub e_plus_promise: f64,
    pub e_minus_promise: f64,
    /// `E_{σ_ρ} − E_{σ_{−ρ}}` from `Σ_S ĥ(S)(ρ^{|S|} − (−ρ)^{|S|})`.
    pub advantage_spectral: f64,
    pub advantage: f64,
    pub advantage_promise: f64,
    /// `|E_{σ_ρ} − E_{σ̃_ρ}|` and `|E_{σ_{−ρ}} − E_{σ̃_{−ρ}}|`.
    pub slack_plus: f64,
    pub slack_minus: f64,
    /// `2·Pr[outside promise]`, which bounds each slack since `|C| ≤ 1`.
    pub slack_bound_plus: f64,
    pub slack_bound_minus: f64,
    /// `|E_{σ_ρ}[C] − Σ_S ĥ(S)ρ^{|S|}|` by direct enumeration; `None` above the cap.
    pub spectral_error: Option<f64>,
    pub hoeffding: HoeffdingCheck,
}

impl GapHammingReport {
    pub fn passed(&self) -> bool {
        self.slack_plus <= self.slack_bound_plus + 1e-12
            && self.slack_minus <= self.slack_bound_minus + 1e-12
            && self.spectral_error.is_none_or(|e| e <= 1e-12)
            && self.hoeffding.holds
    }
}

/// Gap-Hamming advantages of `c` at `ρ = scale/√n`.
pub fn gap_hamming_demo(c: &ProtocolTree<f64>, scale: f64) -> Result<GapHammingReport> {
    let n = c.alice_bits();
    if n != c.bob_bits() || n == 0 {
        return Err(Error::InvalidArgument("Gap-Hamming needs equal nonzero input widths".into()));
    }
    if n > MAX_EXPERIMENT_DIM {
        return Err(Error::DimensionTooLarge { n, cap: MAX_EXPERIMENT_DIM });
    }
    let rho = scale / (n as f64).sqrt();
    check_rho(rho)?;
    let spec = walsh_hadamard(&xor_fiber(c)?);
    let e_plus_spectral = biased_expectation(&spec, &rho)?;
    let e_minus_spectral = biased_expectation(&spec, &-rho)?;
    let dist = |side, promise| CorrelatedPairDistribution::new(n, rho, side, promise);
    let (plus, minus) = (dist(Side::Plus, false)?, dist(Side::Minus, false)?);
    let (plus_p, minus_p) = (dist(Side::Plus, true)?, dist(Side::Minus, true)?);
    let e_plus = plus.expectation_via_fiber(c)?;
    let e_minus = minus.expectation_via_fiber(c)?;
    let e_plus_promise = plus_p.expectation_via_fiber(c)?;
    let e_minus_promise = minus_p.expectation_via_fiber(c)?;
    let spectral_error = if n <= MAX_RESTRICTION_DIM {
        let direct = plus.expectation_direct(c)?;
        Some((direct - e_plus_spectral).abs().max((minus.expectation_direct(c)? - e_minus_spectral).abs()))
    } else {
        None
    };
    let hoeffding = hoeffding_check(n, rho, 5.0 * (n as f64).sqrt())?;
    Ok(GapHammingReport {
        n,
        rho,
        threshold: promise_threshold(n),
        e_plus,
        e_minus,
        e_plus_promise,
        e_minus_promise,
        advantage_spectral: e_plus_spectral - e_minus_spectral,
        advantage: e_plus - e_minus,
        advantage_promise: e_plus_promise - e_minus_promise,
        slack_plus: (e_plus - e_plus_promise).abs(),
        slack_minus: (e_minus - e_minus_promise).abs(),
        slack_bound_plus: 2.0 * plus.promise_failure(),
        slack_bound_minus: 2.0 * minus.promise_failure(),
        spectral_error,
        hoeffding,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthRow {
    pub protocol_id: usize,
    pub n: usize,
    pub d: usize,
    pub l11: f64,
    pub l11_ratio: Option<f64>,
    pub l12: f64,
    pub l12_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthReport {
    pub rows: Vec<GrowthRow>,
    pub max_l11_ratio: f64,
    pub max_l12_ratio: f64,
}

/// `w / scale`, with `0/0 = 0` and `None` for a positive weight over a zero scale.
fn normalized(w: f64, scale: f64) -> Option<f64> {
    if scale > 0.0 {
        Some(w / scale)
    } else if w == 0.0 {
        Some(0.0)
    } else {
        None
    }
}

/// Level-one and level-two growth of the XOR-fiber of each protocol, with
/// `L_{1,1}/√d` and `L_{1,2}/(d^{3/2}·log₂³ n)`.
pub fn growth_report(corpus: &[ProtocolTree<f64>]) -> Result<GrowthReport> {
    let mut rows = Vec::with_capacity(corpus.len());
    for (id, c) in corpus.iter().enumerate() {
        let h = xor_fiber(c)?;
        let spec = walsh_hadamard(&h);
        let n = h.n();
        let d = c.cost();
        let l11 = if n >= 1 { l1_level_weight(&spec, 1)? } else { 0.0 };
        let l12 = if n >= 2 { l1_level_weight(&spec, 2)? } else { 0.0 };
        let df = d as f64;
        rows.push(GrowthRow {
            protocol_id: id,
            n,
            d,
            l11,
            l11_ratio: normalized(l11, df.sqrt()),
            l12,
            l12_ratio: normalized(l12, df.powf(1.5) * (n as f64).log2().powi(3)),
        });
    }
    let max_of = |f: fn(&GrowthRow) -> Option<f64>| rows.iter().filter_map(f).fold(0.0, f64::max);
    let max_l11_ratio = max_of(|r| r.l11_ratio);
    let max_l12_ratio = max_of(|r| r.l12_ratio);
    Ok(GrowthReport { rows, max_l11_ratio, max_l12_ratio })
}

impl GrowthReport {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.12e}"));
        let mut out = String::from("protocol_id,n,d,l11,l11_over_sqrt_d,l12,l12_over_d32_log3n\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.12e},{},{:.12e},{}\n",
                r.protocol_id,
                r.n,
                r.d,
                r.l11,
                opt(r.l11_ratio),
                r.l12,
                opt(r.l12_ratio)
            ));
        }
        out
    }
}

/// Constant, `x_1y_1`, majority protocols and `count` random protocols on `n` bits.
pub fn standard_corpus(n: usize, d: usize, count: usize, seed: u64) -> Result<Vec<ProtocolTree<f64>>> {
    let mut out = vec![ProtocolTree::constant(n, n, 1.0)?, x1y1_protocol(n)?];
    for k in (3..=n).step_by(2) {
        out.push(maj_xor_protocol(k, n)?);
    }
    out.extend(random_corpus(n, d, count, seed, false)?);
    Ok(out)
}

pub fn random_corpus(n: usize, d: usize, count: usize, seed: u64, non_boolean: bool) -> Result<Vec<ProtocolTree<f64>>> {
    (0..count as u64).map(|i| random_protocol(n, d, seed.wrapping_add(i), non_boolean)).collect()
}

/// One protocol JSON object per line.
pub fn corpus_to_jsonl(corpus: &[ProtocolTree<f64>]) -> String {
    let mut out = String::new();
    for c in corpus {
        out.push_str(&c.to_json());
        out.push('\n');
    }
    out
}

pub fn corpus_from_jsonl(s: &str) -> Result<Vec<ProtocolTree<f64>>> {
    s.lines().filter(|l| !l.trim().is_empty()).map(ProtocolTree::from_json).collect()
}

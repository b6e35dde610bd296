//! One random root-to-leaf walk of the clean protocol built from a Boolean
//! protocol run on Gaussian inputs.
//!
//! Each phase of the owner `P` consists of
//! - orthogonalize: reveal the bin of `⟨f(x), a⟩` for `a` the unit part of `η ⊙ (other center)`
//!   orthogonal to `P`'s earlier directions (a zero-direction step when that part vanishes);
//! - original: send the original protocol bit on `sgn(x)`;
//! - cleanup: while the top eigenvalue of `P`'s feature covariance on the complement of
//!   its directions is at least `λ(1 + ε)`, reveal the bin along that eigenvector.
//!
//! `f` is the feature map of [`super::features`]; bins have width `2^-L`.
//! Populations are exact conditional samples given every revealed constraint.

use bitvec::prelude::*;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{feature_dim, features, truncated_point, GaussianConfig, SignPattern};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, orthonormality_error, project_out, top_eigen_restricted, EigenPair, Samples};
use crate::protocol::{Node, Party, ProtocolTree};
use crate::stats::{normal_cdf, normal_quantile, rng_for, truncated_normal, Moments};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Orthogonalize,
    Original,
    Cleanup,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Message {
    /// `trunc_L` value as the integer `k` with message `k·2^-L`.
    Bin(i64),
    Bit(bool),
    /// Zero-direction orthogonalize step.
    Silent,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub phase: usize,
    pub kind: StepKind,
    #[serde(serialize_with = "party_tag")]
    pub owner: Party,
    /// Direction in feature coordinates; all zeros when unused.
    pub direction: Vec<f64>,
    pub message: Message,
    /// Magnitude bits of a real message; 1 for a bit; 0 when silent.
    pub message_bits: u32,
    pub population: usize,
    pub alice_center: Vec<f64>,
    pub bob_center: Vec<f64>,
    pub z: f64,
    pub delta_z: f64,
    /// Top eigenvalue behind a cleanup step.
    pub eigenvalue: Option<f64>,
    /// `2^-L·√k·‖η ⊙ other center‖` on the owner's original and cleanup steps, where `k`
    /// counts the owner's directions; `|ΔZ|` must stay below it.
    pub delta_z_tolerance: Option<f64>,
}

fn party_tag<S: serde::Serializer>(p: &Party, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(match p {
        Party::Alice => "A",
        Party::Bob => "B",
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Leaf { value: f64 },
    Aborted { step: usize, survivors: usize, draws: u64 },
}

/// A revealed constraint `lo ≤ ⟨f(x), dir⟩ < hi`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bin {
    pub dir: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug)]
pub struct PartyState {
    pub input: Vec<f64>,
    pub bins: Vec<Bin>,
    /// Allowed sign patterns of the input, indexed like protocol inputs.
    pub allowed: BitVec<u64, Lsb0>,
    pub population: Option<Samples>,
    /// Feature-space center of mass; analytic zero before any constraint.
    pub center: Vec<f64>,
}

impl PartyState {
    pub fn directions(&self) -> Vec<Vec<f64>> {
        self.bins.iter().map(|b| b.dir.clone()).collect()
    }

    fn constrained(&self) -> bool {
        !self.bins.is_empty() || self.allowed.not_all()
    }
}

#[derive(Clone, Debug)]
pub struct CleanupRun {
    pub level: usize,
    pub n: usize,
    pub cost: usize,
    pub t: f64,
    pub l: u32,
    pub steps: Vec<StepRecord>,
    pub alice: PartyState,
    pub bob: PartyState,
    pub outcome: Outcome,
    /// Checks where `λ ≤ λ_top < λ(1 + ε)`: unclean on the raw estimate only.
    pub raw_only_triggers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunInvariants {
    pub depth: usize,
    pub depth_bound: usize,
    pub gram_error: f64,
    pub max_center_norm: f64,
    pub max_message_bits: u32,
    pub message_bits_bound: f64,
    pub in_box: bool,
    pub max_bin_spread: f64,
    pub step_tolerance_violations: usize,
}

impl RunInvariants {
    /// Depth, orthonormality (1e-8), box, bin spread `< 2^-L` and the
    /// per-step `ΔZ` tolerance. Level 2 adds `‖center‖_F < nT` and the
    /// message length bound.
    pub fn holds(&self, level: usize, n: usize, t: f64, l: u32) -> bool {
        let mut ok = self.depth <= self.depth_bound
            && self.gram_error <= 1e-8
            && self.in_box
            && self.max_bin_spread < (-(l as f64)).exp2()
            && self.step_tolerance_violations == 0;
        if level == 2 {
            ok &= self.max_center_norm < n as f64 * t;
            ok &= self.max_message_bits as f64 <= self.message_bits_bound;
        }
        ok
    }
}

impl CleanupRun {
    pub fn depth(&self) -> usize {
        self.steps.len()
    }

    pub fn delta_z(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.delta_z).collect()
    }

    pub fn quadratic_variation(&self) -> f64 {
        self.steps.iter().map(|s| s.delta_z * s.delta_z).sum()
    }

    pub fn is_aborted(&self) -> bool {
        matches!(self.outcome, Outcome::Aborted { .. })
    }

    /// `Err(PopulationUnderflow)` for aborted runs.
    pub fn into_result(self, n_min: usize) -> Result<Self> {
        match self.outcome {
            Outcome::Aborted { step, survivors, draws } => Err(Error::PopulationUnderflow { step, survivors, n_min, draws }),
            Outcome::Leaf { .. } => Ok(self),
        }
    }

    /// One JSON object per step.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s).expect("step records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn invariants(&self) -> RunInvariants {
        let (n, level) = (self.n, self.level);
        let depth_bound = if level == 1 { 2 * n + 2 * self.cost } else { 2 * n * n };
        let gram_error = orthonormality_error(&self.alice.directions()).max(orthonormality_error(&self.bob.directions()));
        let max_center_norm =
            self.steps.iter().map(|s| norm(&s.alice_center).max(norm(&s.bob_center))).fold(0.0, f64::max);
        let max_message_bits = self.steps.iter().map(|s| s.message_bits).max().unwrap_or(0);
        let message_bits_bound = self.l as f64 + (self.t * n as f64).log2();
        let mut in_box = true;
        let mut max_bin_spread: f64 = 0.0;
        let mut f = Vec::new();
        for p in [&self.alice, &self.bob] {
            let Some(pop) = &p.population else { continue };
            in_box &= pop.data.iter().all(|v| v.abs() <= self.t);
            for b in &p.bins {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for row in pop.rows() {
                    features(row, level, &mut f);
                    let v = dot(&f, &b.dir);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if hi >= lo {
                    max_bin_spread = max_bin_spread.max(hi - lo);
                }
            }
        }
        let step_tolerance_violations = self
            .steps
            .iter()
            .filter(|s| s.delta_z_tolerance.is_some_and(|tol| s.delta_z.abs() > tol))
            .count();
        RunInvariants {
            depth: self.depth(),
            depth_bound,
            gram_error,
            max_center_norm,
            max_message_bits,
            message_bits_bound,
            in_box,
            max_bin_spread,
            step_tolerance_violations,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CleanCheck {
    pub eigen: EigenPair,
    pub clean: bool,
}

/// Top eigenpair of the feature covariance of `population` (raw points) on
/// the orthogonal complement of `directions`; clean iff the eigenvalue is
/// below `lambda`.
pub fn clean_check(population: &Samples, level: usize, directions: &[Vec<f64>], lambda: f64, seed: u64) -> Result<CleanCheck> {
    let feats = feature_samples(population, level)?;
    let cov = feats.covariance();
    let eigen = top_eigen_restricted(&cov, feats.dim, directions, seed)?;
    let clean = eigen.value < lambda;
    Ok(CleanCheck { eigen, clean })
}

fn feature_samples(population: &Samples, level: usize) -> Result<Samples> {
    if population.len() < 2 {
        return Err(Error::DegeneratePopulation(format!("{} points", population.len())));
    }
    if population.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegeneratePopulation("non-finite coordinate".into()));
    }
    let n = population.dim;
    let mut out = Samples::new(feature_dim(n, level));
    let mut f = Vec::new();
    for row in population.rows() {
        features(row, level, &mut f);
        out.push(&f);
    }
    Ok(out)
}

struct Underflow {
    survivors: usize,
    draws: u64,
}

fn satisfies_bins(x: &[f64], bins: &[Bin], level: usize, f: &mut Vec<f64>) -> bool {
    if bins.is_empty() {
        return true;
    }
    features(x, level, f);
    bins.iter().all(|b| {
        let v = dot(f, &b.dir);
        v >= b.lo && v < b.hi
    })
}

/// Exact conditional population given the party's constraints.
///
/// Level 1 with bins: bin coefficients along the orthonormal directions are
/// truncated normals, the orthogonal part is a fresh Gaussian, and the box
/// and sign patterns are enforced by rejection. Otherwise: a uniform allowed
/// sign pattern with truncated half-normal magnitudes, which is exact for
/// the box, and rejection on the remaining bins.
fn refresh(p: &PartyState, level: usize, cfg: &GaussianConfig, rng: &mut ChaCha8Rng) -> std::result::Result<Samples, Underflow> {
    let n = cfg.n;
    let mut pop = Samples::new(n);
    let mut x = vec![0.0; n];
    let mut f = Vec::new();
    let mut draws = 0u64;
    let patterns: Vec<usize> = p.allowed.iter_ones().collect();
    let half_top = normal_cdf(cfg.t);
    let exact_linear = level == 1 && !p.bins.is_empty();
    while pop.len() < cfg.n_pop && draws < cfg.max_draws {
        draws += 1;
        if exact_linear {
            for v in x.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let dirs: Vec<Vec<f64>> = p.bins.iter().map(|b| b.dir.clone()).collect();
            project_out(&mut x, &dirs);
            for b in &p.bins {
                let c = truncated_normal(rng, b.lo, b.hi);
                for (xi, di) in x.iter_mut().zip(&b.dir) {
                    *xi += c * di;
                }
            }
            if x.iter().any(|v| v.abs() > cfg.t) {
                continue;
            }
            if !p.allowed[super::pattern_of(&x) as usize] {
                continue;
            }
            let ok = p.bins.iter().all(|b| {
                let v = dot(&x, &b.dir);
                v >= b.lo && v < b.hi
            });
            if !ok {
                continue;
            }
        } else {
            let Some(&pat) = patterns.choose(rng) else {
                return Err(Underflow { survivors: 0, draws });
            };
            for (i, v) in x.iter_mut().enumerate() {
                let u: f64 = rng.random();
                let mag = if cfg.t.is_finite() { normal_quantile(0.5 + u * (half_top - 0.5)) } else { normal_quantile(0.5 + 0.5 * u) };
                let mag = mag.clamp(0.0, cfg.t);
                *v = if pat >> i & 1 == 1 { -mag } else { mag };
            }
            if !satisfies_bins(&x, &p.bins, level, &mut f) {
                continue;
            }
        }
        pop.push(&x);
    }
    if pop.len() < cfg.n_min {
        return Err(Underflow { survivors: pop.len(), draws });
    }
    Ok(pop)
}

fn bin_of(value: f64, l: u32) -> (i64, f64, f64) {
    let scale = (l as f64).exp2();
    let k = (value * scale).floor();
    (k as i64, k / scale, (k + 1.0) / scale)
}

fn magnitude_bits(k: i64) -> u32 {
    64 - k.unsigned_abs().leading_zeros()
}

fn weighted(eta: &[f64], v: &[f64]) -> Vec<f64> {
    eta.iter().zip(v).map(|(a, b)| a * b).collect()
}

struct Sim<'a> {
    level: usize,
    cfg: &'a GaussianConfig,
    eta: Vec<f64>,
    rng: ChaCha8Rng,
    alice: PartyState,
    bob: PartyState,
    steps: Vec<StepRecord>,
    z: f64,
    phase: usize,
    raw_only: usize,
}

impl Sim<'_> {
    fn party(&mut self, who: Party) -> (&mut PartyState, &PartyState) {
        match who {
            Party::Alice => (&mut self.alice, &self.bob),
            Party::Bob => (&mut self.bob, &self.alice),
        }
    }

    fn current_z(&self) -> f64 {
        dot(&self.alice.center, &weighted(&self.eta, &self.bob.center))
    }

    fn recenter(&mut self, who: Party) -> std::result::Result<(), Underflow> {
        let level = self.level;
        let cfg = self.cfg;
        let mut rng = std::mem::replace(&mut self.rng, rng_for(0, 0));
        let (me, _) = self.party(who);
        let result = if me.constrained() {
            refresh(me, level, cfg, &mut rng).map(|pop| {
                let feats = feature_samples(&pop, level).expect("refresh keeps at least N_min finite points");
                me.center = feats.mean();
                me.population = Some(pop);
            })
        } else {
            Ok(())
        };
        self.rng = rng;
        result
    }

    fn record(&mut self, who: Party, kind: StepKind, direction: Vec<f64>, message: Message, eigenvalue: Option<f64>, tol: Option<f64>) {
        let z = self.current_z();
        let message_bits = match message {
            Message::Bin(k) => magnitude_bits(k),
            Message::Bit(_) => 1,
            Message::Silent => 0,
        };
        let population = match who {
            Party::Alice => &self.alice,
            Party::Bob => &self.bob,
        }
        .population
        .as_ref()
        .map_or(0, |p| p.len());
        self.steps.push(StepRecord {
            step: self.steps.len() + 1,
            phase: self.phase,
            kind,
            owner: who,
            direction,
            message,
            message_bits,
            population,
            alice_center: self.alice.center.clone(),
            bob_center: self.bob.center.clone(),
            z,
            delta_z: z - self.z,
            eigenvalue,
            delta_z_tolerance: tol,
        });
        self.z = z;
    }

    /// Tolerance for `|ΔZ|` on the owner's steps after its orthogonalize step.
    fn tolerance(&mut self, who: Party) -> f64 {
        let eta = self.eta.clone();
        let l = self.cfg.l;
        let (me, other) = self.party(who);
        let k = me.bins.len() as f64;
        (-(l as f64)).exp2() * k.sqrt() * norm(&weighted(&eta, &other.center)) + 1e-12
    }

    fn reveal(&mut self, who: Party, dir: Vec<f64>) -> (i64, std::result::Result<(), Underflow>) {
        let level = self.level;
        let l = self.cfg.l;
        let (me, _) = self.party(who);
        let mut f = Vec::new();
        features(&me.input, level, &mut f);
        let (k, lo, hi) = bin_of(dot(&f, &dir), l);
        me.bins.push(Bin { dir, lo, hi });
        let res = self.recenter(who);
        if res.is_err() {
            // the final population never saw this bin
            self.party(who).0.bins.pop();
        }
        (k, res)
    }

    fn abort(&self, u: Underflow) -> Outcome {
        Outcome::Aborted { step: self.steps.len() + 1, survivors: u.survivors, draws: u.draws }
    }

    fn phase(&mut self, who: Party, msg: &BitSlice<u8, Lsb0>) -> Result<std::result::Result<bool, Outcome>> {
        self.phase += 1;
        let dim = feature_dim(self.cfg.n, self.level);
        // orthogonalize
        let eta = self.eta.clone();
        let (me, other) = self.party(who);
        let target = weighted(&eta, &other.center);
        let mut w = target.clone();
        project_out(&mut w, &me.directions());
        let wn = norm(&w);
        if wn > 1e-9 * norm(&target).max(1e-300) && me.bins.len() < dim {
            let dir: Vec<f64> = w.iter().map(|v| v / wn).collect();
            let (k, res) = self.reveal(who, dir.clone());
            if let Err(u) = res {
                return Ok(Err(self.abort(u)));
            }
            self.record(who, StepKind::Orthogonalize, dir, Message::Bin(k), None, None);
        } else {
            self.record(who, StepKind::Orthogonalize, vec![0.0; dim], Message::Silent, None, None);
        }
        // original bit
        let (me, _) = self.party(who);
        let bit = msg[super::pattern_of(&me.input) as usize];
        for p in 0..me.allowed.len() {
            if msg[p] != bit {
                me.allowed.set(p, false);
            }
        }
        if let Err(u) = self.recenter(who) {
            return Ok(Err(self.abort(u)));
        }
        let tol = self.tolerance(who);
        self.record(who, StepKind::Original, vec![0.0; dim], Message::Bit(bit), None, Some(tol));
        // cleanup
        loop {
            let seed: u64 = self.rng.random();
            let boot_seed: u64 = self.rng.random();
            let level = self.level;
            let (lambda, boot) = (self.cfg.lambda, self.cfg.bootstrap);
            let (me, _) = self.party(who);
            let dirs = me.directions();
            if dirs.len() >= dim {
                break;
            }
            let Some(pop) = &me.population else { break };
            let feats = feature_samples(pop, level)?;
            let eigen = top_eigen_restricted(&feats.covariance(), dim, &dirs, seed)?;
            if eigen.value < lambda {
                break;
            }
            let eps = bootstrap_margin(&feats, &dirs, eigen.value, boot, boot_seed)?;
            if eigen.value < lambda * (1.0 + eps) {
                self.raw_only += 1;
                break;
            }
            let mut dir = eigen.vector.clone();
            project_out(&mut dir, &dirs);
            let dn = norm(&dir);
            dir.iter_mut().for_each(|v| *v /= dn);
            let (k, res) = self.reveal(who, dir.clone());
            if let Err(u) = res {
                return Ok(Err(self.abort(u)));
            }
            let tol = self.tolerance(who);
            self.record(who, StepKind::Cleanup, dir, Message::Bin(k), Some(eigen.value), Some(tol));
        }
        Ok(Ok(bit))
    }
}

/// `3·sd/λ_top` over bootstrap resamples of the population.
fn bootstrap_margin(feats: &Samples, dirs: &[Vec<f64>], top: f64, b: usize, seed: u64) -> Result<f64> {
    if b < 2 || top <= 0.0 {
        return Ok(0.0);
    }
    let mut rng = rng_for(seed, 5);
    let n = feats.len();
    let mut m = Moments::default();
    for _ in 0..b {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let cov = feats.covariance_of(&idx);
        m.push(top_eigen_restricted(&cov, feats.dim, dirs, rng.random())?.value);
    }
    Ok(3.0 * m.variance().sqrt() / top)
}

/// Simulates one walk of the clean protocol for `c` at the given level.
/// Inputs are drawn once from the truncated Gaussian; every message is
/// computed from them. Population underflow ends the run with
/// [`Outcome::Aborted`] and keeps the trace so far.
pub fn run_clean_protocol(c: &ProtocolTree<f64>, level: usize, eta: &SignPattern, cfg: &GaussianConfig) -> Result<CleanupRun> {
    cfg.validate()?;
    let n = cfg.n;
    if c.alice_bits() != n || c.bob_bits() != n {
        return Err(Error::InvalidArgument(format!(
            "protocol widths ({}, {}) differ from n = {n}",
            c.alice_bits(),
            c.bob_bits()
        )));
    }
    let cap = if level == 1 { 12 } else { 6 };
    if !(1..=2).contains(&level) {
        return Err(Error::InvalidArgument(format!("level must be 1 or 2, got {level}")));
    }
    if n > cap {
        return Err(Error::DimensionTooLarge { n, cap });
    }
    if eta.level() != level || eta.n() != n {
        return Err(Error::InvalidArgument("sign pattern does not match level and dimension".into()));
    }
    let mut rng = rng_for(cfg.seed, 6);
    let dim = feature_dim(n, level);
    let input = |rng: &mut ChaCha8Rng| {
        let mut x = vec![0.0; n];
        truncated_point(rng, n, cfg.t, &mut x);
        PartyState { input: x, bins: Vec::new(), allowed: bitvec![u64, Lsb0; 1; 1 << n], population: None, center: vec![0.0; dim] }
    };
    let alice = input(&mut rng);
    let bob = input(&mut rng);
    let mut sim = Sim {
        level,
        cfg,
        eta: eta.feature_weights(),
        rng,
        alice,
        bob,
        steps: Vec::new(),
        z: 0.0,
        phase: 0,
        raw_only: 0,
    };
    let mut node = c.root();
    let outcome = loop {
        match node {
            Node::Leaf(v) => break Outcome::Leaf { value: *v },
            Node::Inner { owner, msg, zero, one } => match sim.phase(*owner, msg)? {
                Ok(bit) => node = if bit { one } else { zero },
                Err(outcome) => break outcome,
            },
        }
    };
    Ok(CleanupRun {
        level,
        n,
        cost: c.cost(),
        t: cfg.t,
        l: cfg.l,
        steps: sim.steps,
        alice: sim.alice,
        bob: sim.bob,
        outcome,
        raw_only_triggers: sim.raw_only,
    })
}

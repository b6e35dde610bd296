//! Monte Carlo checks of Gaussian tail and level-k bounds.
//!
//! Verdicts use Wilson intervals at 99.9% confidence. When a bound sits
//! below the resolution `1/N`, a grid point passes only with zero hits.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, operator_norm};
use crate::stats::{normal_cdf, normal_sf, ols_slope, phi, rng_for, truncated_normal, two_proportion_z, wilson_interval, Moments, Z_999};

pub const CONFIDENCE: f64 = 0.999;
pub const HW_KAPPA: f64 = 56448.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailPoint {
    pub r: f64,
    pub hits: u64,
    pub empirical: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailReport {
    pub m: usize,
    pub n_samples: u64,
    pub confidence: f64,
    pub points: Vec<TailPoint>,
}

impl TailReport {
    fn from_counts(m: usize, n: u64, grid: &[f64], hits: &[u64], bound: impl Fn(f64) -> f64) -> Self {
        let points = grid
            .iter()
            .zip(hits)
            .map(|(&r, &k)| {
                let (ci_low, ci_high) = wilson_interval(k, n, Z_999);
                let b = bound(r);
                let pass = if b < 1.0 / n as f64 { k == 0 } else { ci_high <= b };
                TailPoint { r, hits: k, empirical: k as f64 / n as f64, ci_low, ci_high, bound: b, pass }
            })
            .collect();
        Self { m, n_samples: n, confidence: CONFIDENCE, points }
    }

    pub fn passed(&self) -> bool {
        self.points.iter().all(|p| p.pass)
    }

    /// Empirical tails never increase along increasing thresholds.
    pub fn is_monotone(&self) -> bool {
        let mut pts: Vec<&TailPoint> = self.points.iter().collect();
        pts.sort_by(|a, b| a.r.total_cmp(&b.r));
        pts.windows(2).all(|w| w[1].hits <= w[0].hits)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,empirical,ci_low,ci_high,bound,verdict\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{:.9e},{:.9e},{:.9e},{:.9e},{}\n",
                p.r,
                p.empirical,
                p.ci_low,
                p.ci_high,
                p.bound,
                if p.pass { "PASS" } else { "FAIL" }
            ));
        }
        out
    }
}

/// Counts `stat ≥ r` for every grid threshold over `n` draws.
fn tail_counts(grid: &[f64], n: u64, mut stat: impl FnMut() -> f64) -> Vec<u64> {
    let mut hits = vec![0u64; grid.len()];
    for _ in 0..n {
        let s = stat();
        for (h, &r) in hits.iter_mut().zip(grid) {
            if s >= r {
                *h += 1;
            }
        }
    }
    hits
}

fn check_grid(grid: &[f64], floor: f64) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty threshold grid".into()));
    }
    if let Some(r) = grid.iter().find(|r| r.is_nan() || **r < floor) {
        return Err(Error::InvalidArgument(format!("threshold {r} below {floor}")));
    }
    Ok(())
}

/// `Pr[χ²_m ≥ r]` against `e^{-r/4}` for `r ≥ 2m`, `N ≥ 10^5`.
pub fn chi2_tail_check(m: usize, r_grid: &[f64], n: u64, seed: u64) -> Result<TailReport> {
    check_grid(r_grid, 2.0 * m as f64)?;
    if n < 100_000 {
        return Err(Error::InvalidArgument(format!("need at least 1e5 samples, got {n}")));
    }
    let mut rng = rng_for(seed, 20);
    let hits = tail_counts(r_grid, n, || {
        (0..m)
            .map(|_| {
                let g: f64 = rng.sample(StandardNormal);
                g * g
            })
            .sum()
    });
    Ok(TailReport::from_counts(m, n, r_grid, &hits, |r| (-r / 4.0).exp()))
}

/// `m` matrices of size `n × n`, zero diagonal, orthonormal as `n²`-vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticFormSet {
    n: usize,
    mats: Vec<Vec<f64>>,
}

const QFS_TOL: f64 = 1e-10;

impl QuadraticFormSet {
    pub fn new(n: usize, mats: Vec<Vec<f64>>) -> Result<Self> {
        for (k, m) in mats.iter().enumerate() {
            if m.len() != n * n {
                return Err(Error::InvalidFormSet(format!("matrix {k} has {} entries, expected {}", m.len(), n * n)));
            }
            if let Some(i) = (0..n).find(|&i| m[i * n + i].abs() > QFS_TOL) {
                return Err(Error::InvalidFormSet(format!("matrix {k} has nonzero diagonal entry {i}")));
            }
            for (l, o) in mats.iter().enumerate().take(k + 1) {
                let want = if l == k { 1.0 } else { 0.0 };
                let got = dot(m, o);
                if (got - want).abs() > QFS_TOL {
                    return Err(Error::InvalidFormSet(format!("<M_{k}, M_{l}> = {got}, expected {want}")));
                }
            }
        }
        Ok(Self { n, mats })
    }

    /// `(E_12 + E_21)/√2`, whose statistic is `2x_1²x_2²`.
    pub fn single_pair(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("need n >= 2".into()));
        }
        let mut m = vec![0.0; n * n];
        m[1] = std::f64::consts::FRAC_1_SQRT_2;
        m[n] = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(n, vec![m])
    }

    /// Gram–Schmidt on Gaussian zero-diagonal matrices.
    pub fn random(n: usize, m: usize, seed: u64) -> Result<Self> {
        if m > n * n - n {
            return Err(Error::InvalidArgument(format!("at most {} orthonormal zero-diagonal forms in dimension {n}", n * n - n)));
        }
        let mut rng = rng_for(seed, 21);
        let mut mats: Vec<Vec<f64>> = Vec::with_capacity(m);
        while mats.len() < m {
            let mut v: Vec<f64> = (0..n * n).map(|k| if k / n == k % n { 0.0 } else { rng.sample(StandardNormal) }).collect();
            crate::linalg::project_out(&mut v, &mats);
            let len = norm(&v);
            if len < 1e-6 {
                continue;
            }
            v.iter_mut().for_each(|x| *x /= len);
            mats.push(v);
        }
        Self::new(n, mats)
    }

    /// The set mixed by a random `m × m` orthogonal matrix. The statistic is
    /// unchanged pointwise, so tails must agree.
    pub fn rotated(&self, seed: u64) -> Result<Self> {
        let m = self.mats.len();
        let mut rng = rng_for(seed, 22);
        let mut q: Vec<Vec<f64>> = Vec::with_capacity(m);
        while q.len() < m {
            let mut v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            crate::linalg::project_out(&mut v, &q);
            let len = norm(&v);
            if len < 1e-6 {
                continue;
            }
            v.iter_mut().for_each(|x| *x /= len);
            q.push(v);
        }
        let mats = q
            .iter()
            .map(|row| {
                let mut out = vec![0.0; self.n * self.n];
                for (c, mk) in row.iter().zip(&self.mats) {
                    for (o, v) in out.iter_mut().zip(mk) {
                        *o += c * v;
                    }
                }
                out
            })
            .collect();
        Self::new(self.n, mats)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.mats.len()
    }

    pub fn matrices(&self) -> &[Vec<f64>] {
        &self.mats
    }

    /// `Σ_k ⟨x ⊗̇ x, M_k⟩²`.
    pub fn statistic(&self, x: &[f64]) -> f64 {
        let n = self.n;
        self.mats
            .iter()
            .map(|m| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            s += m[i * n + j] * x[i] * x[j];
                        }
                    }
                }
                s * s
            })
            .sum()
    }
}

pub fn hanson_wright_bound(r: f64, m: usize, kappa: f64) -> f64 {
    (-r / (kappa * (m as f64 + r.sqrt()))).exp()
}

/// `Pr[Σ⟨x ⊗̇ x, M_i⟩² ≥ r]` against `exp(−r/(κ(m+√r)))` for `r ≥ 98m`.
pub fn hanson_wright_check(set: &QuadraticFormSet, r_grid: &[f64], n: u64, kappa: f64, seed: u64) -> Result<TailReport> {
    check_grid(r_grid, 98.0 * set.m() as f64)?;
    if n == 0 || kappa.is_nan() || kappa <= 0.0 {
        return Err(Error::InvalidArgument("need N > 0 and kappa > 0".into()));
    }
    let hits = hw_counts(set, r_grid, n, seed);
    Ok(TailReport::from_counts(set.m(), n, r_grid, &hits, |r| hanson_wright_bound(r, set.m(), kappa)))
}

fn hw_counts(set: &QuadraticFormSet, r_grid: &[f64], n: u64, seed: u64) -> Vec<u64> {
    let mut rng = rng_for(seed, 23);
    let mut x = vec![0.0; set.n];
    tail_counts(r_grid, n, || {
        for v in x.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        set.statistic(&x)
    })
}

/// Two-proportion z-scores between the tails of `set` and of a rotated copy,
/// on independent sample streams.
pub fn rotation_invariance(set: &QuadraticFormSet, r_grid: &[f64], n: u64, seed: u64) -> Result<Vec<f64>> {
    let other = set.rotated(seed)?;
    let a = hw_counts(set, r_grid, n, seed);
    let b = hw_counts(&other, r_grid, n, seed.wrapping_add(1));
    Ok(a.iter().zip(&b).map(|(&ka, &kb)| two_proportion_z(ka, n, kb, n)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FormNormReport {
    pub m: usize,
    pub f: f64,
    pub g: f64,
    pub h: f64,
    /// `‖M‖_op`, an upper bound on `sup_z ‖M(z ⊗ z)‖` over unit `z`.
    pub v_upper: f64,
    pub pass: bool,
}

/// Empirical means of `f(y) = ‖M(y⊗y)‖`, `g(y) = ‖B_y‖_op` with
/// `B_y[k][i] = Σ_j M_k[i][j] y_j`, and `h` the transposed version, against
/// `F ≤ √(2m)`, `G, H ≤ √m`, `V ≤ 1`. Means carry a 3-stderr allowance.
pub fn form_norm_diagnostic(set: &QuadraticFormSet, n_samples: u64, seed: u64) -> Result<FormNormReport> {
    let (n, m) = (set.n, set.m());
    let mut rng = rng_for(seed, 24);
    let mut y = vec![0.0; n];
    let (mut fm, mut gm, mut hm) = (Moments::default(), Moments::default(), Moments::default());
    let mut b = vec![0.0; m * n];
    let mut bt = vec![0.0; m * n];
    for s in 0..n_samples {
        for v in y.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        fm.push(set.statistic(&y).sqrt());
        for (k, mk) in set.mats.iter().enumerate() {
            for i in 0..n {
                b[k * n + i] = (0..n).map(|j| mk[i * n + j] * y[j]).sum();
                bt[k * n + i] = (0..n).map(|j| mk[j * n + i] * y[j]).sum();
            }
        }
        gm.push(rect_op_norm(&b, m, n, s)?);
        hm.push(rect_op_norm(&bt, m, n, s)?);
    }
    let mut flat = Vec::with_capacity(m * n * n);
    for mk in &set.mats {
        flat.extend_from_slice(mk);
    }
    let v_upper = rect_op_norm(&flat, m, n * n, seed)?;
    let mf = m as f64;
    let pass = fm.mean() <= (2.0 * mf).sqrt() + 3.0 * fm.stderr()
        && gm.mean() <= mf.sqrt() + 3.0 * gm.stderr()
        && hm.mean() <= mf.sqrt() + 3.0 * hm.stderr()
        && v_upper <= 1.0 + 1e-9;
    Ok(FormNormReport { m, f: fm.mean(), g: gm.mean(), h: hm.mean(), v_upper, pass })
}

/// Operator norm of a row-major `rows × cols` matrix via `A Aᵀ`.
fn rect_op_norm(a: &[f64], rows: usize, cols: usize, seed: u64) -> Result<f64> {
    if rows == 0 {
        return Ok(0.0);
    }
    let mut aat = vec![0.0; rows * rows];
    for i in 0..rows {
        for j in 0..rows {
            aat[i * rows + j] = dot(&a[i * cols..(i + 1) * cols], &a[j * cols..(j + 1) * cols]);
        }
    }
    Ok(operator_norm(&aat, rows, seed)?.max(0.0).sqrt())
}

/// Measurable sets for the level-k inequality.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GaussianSet {
    /// `⟨w, x⟩ ≥ t` with `w` a unit vector.
    Halfspace { w: Vec<f64>, t: f64 },
    /// Axis box `lo_i ≤ x_i ≤ hi_i`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Intersection of halfspaces `⟨w, x⟩ ≥ t`.
    Polytope { faces: Vec<(Vec<f64>, f64)> },
    /// Points whose sign pattern is allowed; bit `i` of the pattern is `x_{i+1} < 0`.
    Orthants { n: usize, allowed: Vec<bool> },
}

impl GaussianSet {
    pub fn n(&self) -> usize {
        match self {
            GaussianSet::Halfspace { w, .. } => w.len(),
            GaussianSet::Box { lo, .. } => lo.len(),
            GaussianSet::Polytope { faces } => faces.first().map_or(0, |f| f.0.len()),
            GaussianSet::Orthants { n, .. } => *n,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            GaussianSet::Halfspace { w, t } => dot(w, x) >= *t,
            GaussianSet::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| v >= l && v <= h),
            GaussianSet::Polytope { faces } => faces.iter().all(|(w, t)| dot(w, x) >= *t),
            GaussianSet::Orthants { allowed, .. } => allowed[crate::gaussian::pattern_of(x) as usize],
        }
    }

    /// Gaussian measure when it has a closed form.
    pub fn exact_measure(&self) -> Option<f64> {
        match self {
            GaussianSet::Halfspace { w, t } => Some(normal_sf(*t / norm(w))),
            GaussianSet::Box { lo, hi } => Some(lo.iter().zip(hi).map(|(&l, &h)| normal_cdf(h) - normal_cdf(l)).product()),
            GaussianSet::Polytope { .. } => None,
            GaussianSet::Orthants { n, allowed } => {
                Some(allowed.iter().filter(|&&a| a).count() as f64 / (1u64 << n) as f64)
            }
        }
    }

    /// Exact `Σ_{|S|=k} (E[1_A x_S])²` when it has a closed form.
    pub fn exact_level_weight(&self, k: usize) -> Option<f64> {
        match self {
            GaussianSet::Halfspace { w, t } => Some(halfspace_level_weight(w, *t, k)),
            GaussianSet::Box { lo, hi } => {
                // E[1 x_i] = φ(lo) − φ(hi) times the other coordinates' masses
                let mass: Vec<f64> = lo.iter().zip(hi).map(|(&l, &h)| normal_cdf(h) - normal_cdf(l)).collect();
                let first: Vec<f64> = lo.iter().zip(hi).map(|(&l, &h)| phi(l) - phi(h)).collect();
                let total: f64 = mass.iter().product();
                let n = mass.len();
                let ratio = |i: usize| if mass[i] > 0.0 { first[i] / mass[i] } else { 0.0 };
                match k {
                    1 => Some((0..n).map(|i| (total * ratio(i)).powi(2)).sum()),
                    2 => {
                        let mut s = 0.0;
                        for i in 0..n {
                            for j in i + 1..n {
                                s += (total * ratio(i) * ratio(j)).powi(2);
                            }
                        }
                        Some(s)
                    }
                    _ => None,
                }
            }
            GaussianSet::Polytope { .. } => None,
            GaussianSet::Orthants { n, allowed } => {
                // E[1 x_S] = (2/π)^{|S|/2} · 2^{-n} Σ_{allowed} χ_S(pattern)
                let n = *n;
                let sets = subsets_of_size(n, k);
                let scale = (2.0 / std::f64::consts::PI).powf(k as f64 / 2.0) / (1u64 << n) as f64;
                Some(
                    sets.iter()
                        .map(|&s| {
                            let c: i64 = (0..1u64 << n)
                                .filter(|&z| allowed[z as usize])
                                .map(|z| crate::boolean::character(s, z))
                                .sum();
                            (scale * c as f64).powi(2)
                        })
                        .sum(),
                )
            }
        }
    }
}

/// Level-1 weight `φ(t)²` and level-2 weight `t²φ(t)²(1 − Σ w_i⁴)/2` of the
/// halfspace `⟨w, x⟩ ≥ t`, `w` a unit vector.
pub fn halfspace_level_weight(w: &[f64], t: f64, k: usize) -> f64 {
    let p = phi(t);
    match k {
        1 => p * p,
        2 => {
            let quartic: f64 = w.iter().map(|v| v.powi(4)).sum();
            t * t * p * p * (1.0 - quartic) / 2.0
        }
        _ => f64::NAN,
    }
}

pub fn level_k_bound(mu: f64, k: usize) -> f64 {
    let e = std::f64::consts::E;
    2.0 * e * e * mu * mu * (e / mu).ln().powi(k as i32)
}

fn subsets_of_size(n: usize, k: usize) -> Vec<u64> {
    (0..1u64 << n).filter(|s| s.count_ones() as usize == k).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelKRow {
    pub name: String,
    pub k: usize,
    pub mu: f64,
    pub mu_exact: Option<f64>,
    pub lhs: f64,
    pub lhs_exact: Option<f64>,
    pub lhs_error: f64,
    pub bound: f64,
    pub ratio: f64,
    pub ratio_error: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelKReport {
    pub k: usize,
    pub n_samples: u64,
    pub rows: Vec<LevelKRow>,
    pub worst_ratio: f64,
}

impl LevelKReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Monte Carlo `Σ_{|S|=k} (E[1_A x_S])²` for each set, against
/// `2e²μ² ln^k(e/μ)` (exact `μ` when available). A row passes iff
/// `ratio ≤ 1 + 3·ratio_error`, where the error combines the delta-method
/// standard deviation of the squared means with their `Var/N` bias.
pub fn level_k_inequality_check(family: &[(String, GaussianSet)], k: usize, n: u64, seed: u64) -> Result<LevelKReport> {
    if !(1..=2).contains(&k) {
        return Err(Error::InvalidArgument(format!("k must be 1 or 2, got {k}")));
    }
    let mut rows = Vec::with_capacity(family.len());
    for (idx, (name, set)) in family.iter().enumerate() {
        let dim = set.n();
        let subsets = subsets_of_size(dim, k);
        let mut rng = rng_for(seed.wrapping_add(idx as u64), 25);
        let mut x = vec![0.0; dim];
        let mut inside = 0u64;
        let mut sums = vec![0.0; subsets.len()];
        let mut sq = vec![0.0; subsets.len()];
        for _ in 0..n {
            for v in x.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            if !set.contains(&x) {
                continue;
            }
            inside += 1;
            for (si, &s) in subsets.iter().enumerate() {
                let mut p = 1.0;
                for (i, xi) in x.iter().enumerate() {
                    if s >> i & 1 == 1 {
                        p *= xi;
                    }
                }
                sums[si] += p;
                sq[si] += p * p;
            }
        }
        let nf = n as f64;
        let mu_hat = inside as f64 / nf;
        if mu_hat < 10.0 / nf {
            return Err(Error::SetTooSmall { mu: mu_hat, floor: 10.0 / nf });
        }
        let mu_exact = set.exact_measure();
        let mu = mu_exact.unwrap_or(mu_hat);
        let mut lhs = 0.0;
        let mut var_lhs = 0.0;
        let mut bias = 0.0;
        for (s, q) in sums.iter().zip(&sq) {
            let mean = s / nf;
            let var = (q / nf - mean * mean).max(0.0);
            lhs += mean * mean;
            var_lhs += 4.0 * mean * mean * var / nf;
            bias += var / nf;
        }
        let lhs_error = var_lhs.sqrt() + bias;
        let bound = level_k_bound(mu, k);
        let ratio = lhs / bound;
        let ratio_error = lhs_error / bound;
        rows.push(LevelKRow {
            name: name.clone(),
            k,
            mu,
            mu_exact,
            lhs,
            lhs_exact: set.exact_level_weight(k),
            lhs_error,
            bound,
            ratio,
            ratio_error,
            pass: ratio <= 1.0 + 3.0 * ratio_error,
        });
    }
    let worst_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(LevelKReport { k, n_samples: n, rows, worst_ratio })
}

/// Halfspaces, boxes, a polytope and orthant unions in dimension `n`.
pub fn standard_family(n: usize, seed: u64) -> Vec<(String, GaussianSet)> {
    let mut rng = rng_for(seed, 26);
    let mut out = Vec::new();
    let unit = |rng: &mut ChaCha8Rng| {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let l = norm(&v);
        v.into_iter().map(|x| x / l).collect::<Vec<f64>>()
    };
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    for t in [0.0, 1.0, 2.0, 3.0] {
        out.push((format!("halfspace_e1_t{t}"), GaussianSet::Halfspace { w: e1.clone(), t }));
    }
    let diag: Vec<f64> = vec![1.0 / (n as f64).sqrt(); n];
    for t in [0.5, 1.5, 2.5] {
        out.push((format!("halfspace_diag_t{t}"), GaussianSet::Halfspace { w: diag.clone(), t }));
        out.push((format!("halfspace_random_t{t}"), GaussianSet::Halfspace { w: unit(&mut rng), t }));
    }
    out.push(("box_sym_x1".into(), GaussianSet::Box { lo: [vec![-1.0], vec![f64::NEG_INFINITY; n - 1]].concat(), hi: [vec![1.0], vec![f64::INFINITY; n - 1]].concat() }));
    out.push(("box_corner".into(), GaussianSet::Box { lo: vec![0.5; n], hi: vec![f64::INFINITY; n] }));
    out.push(("box_shifted".into(), GaussianSet::Box { lo: vec![-0.5; n], hi: vec![1.5; n] }));
    out.push(("polytope_wedge".into(), GaussianSet::Polytope { faces: vec![(unit(&mut rng), 0.3), (unit(&mut rng), 0.3), (unit(&mut rng), -0.2)] }));
    out.push(("orthant_positive".into(), GaussianSet::Orthants { n, allowed: (0..1usize << n).map(|z| z == 0).collect() }));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TightnessPoint {
    pub d: usize,
    pub threshold: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub exact: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TightnessReport {
    pub c: f64,
    pub n_samples: u64,
    pub points: Vec<TightnessPoint>,
    /// OLS slope of `ln E[q | X]` on `ln d`.
    pub exponent: f64,
}

impl TightnessReport {
    pub fn passed(&self) -> bool {
        (1.7..=2.3).contains(&self.exponent)
    }
}

/// `E[g² | |g| ≥ a]` for a standard normal `g`.
pub fn conditioned_second_moment(a: f64) -> f64 {
    if a <= 0.0 {
        return 1.0;
    }
    1.0 + a * phi(a) / normal_sf(a)
}

/// `E[Σ_{i<j≤√d} x_i² x_j² | |x_i| ≥ c·d^{1/4} for i ≤ √d]`, sampled per
/// coordinate from the two-sided conditioned normal.
pub fn hw_tightness_demo(d: usize, c: f64, n: u64, seed: u64) -> Result<TightnessPoint> {
    let s = (d as f64).sqrt().round() as usize;
    if s * s != d || !(2..=8).contains(&s) {
        return Err(Error::InvalidArgument(format!("d must be a perfect square with 2 <= √d <= 8, got {d}")));
    }
    if c.is_nan() || c < 0.0 || n == 0 {
        return Err(Error::InvalidArgument("need c >= 0 and N > 0".into()));
    }
    let a = c * (d as f64).powf(0.25);
    let mut rng = rng_for(seed, 27);
    let mut sq = vec![0.0; s];
    let mut m = Moments::default();
    for _ in 0..n {
        for v in sq.iter_mut() {
            let g = if a > 0.0 { truncated_normal(&mut rng, a, f64::INFINITY) } else { rng.sample(StandardNormal) };
            *v = g * g;
        }
        let total: f64 = sq.iter().sum();
        let squares: f64 = sq.iter().map(|v| v * v).sum();
        m.push((total * total - squares) / 2.0);
    }
    let pairs = (s * (s - 1) / 2) as f64;
    Ok(TightnessPoint { d, threshold: a, estimate: m.mean(), stderr: m.stderr(), exact: pairs * conditioned_second_moment(a).powi(2) })
}

pub fn hw_tightness_scan(ds: &[usize], c: f64, n: u64, seed: u64) -> Result<TightnessReport> {
    let points = ds
        .iter()
        .enumerate()
        .map(|(i, &d)| hw_tightness_demo(d, c, n, seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = points.iter().map(|p| (p.d as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.estimate.ln()).collect();
    let exponent = if points.len() >= 2 { ols_slope(&xs, &ys) } else { f64::NAN };
    Ok(TightnessReport { c, n_samples: n, points, exponent })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi2_small_m_passes() {
        let r = chi2_tail_check(1, &[2.0, 4.0, 8.0], 200_000, 1).unwrap();
        assert!(r.passed());
        assert!(r.is_monotone());
        let exact = 2.0 * normal_sf(2.0);
        let p = &r.points[1];
        assert!(p.ci_low <= exact && exact <= p.ci_high);
        assert!(r.to_csv().starts_with("r,empirical,ci_low,ci_high,bound,verdict\n"));
        assert!(chi2_tail_check(2, &[3.0], 200_000, 1).is_err());
        assert!(chi2_tail_check(2, &[4.0], 1000, 1).is_err());
    }

    #[test]
    fn tiny_bound_needs_zero_hits() {
        let r = TailReport::from_counts(1, 100, &[1.0, 2.0], &[1, 0], |_| 1e-3);
        assert!(!r.points[0].pass);
        assert!(r.points[1].pass);
    }

    #[test]
    fn quadratic_form_validation() {
        assert!(QuadraticFormSet::new(2, vec![vec![1.0, 0.0, 0.0, 0.0]]).is_err());
        assert!(QuadraticFormSet::new(2, vec![vec![0.0, 1.0, 1.0, 0.0]]).is_err());
        let s = QuadraticFormSet::random(4, 5, 3).unwrap();
        assert_eq!(s.m(), 5);
        let r = s.rotated(9).unwrap();
        let x = [0.3, -1.2, 0.7, 2.0];
        assert!((s.statistic(&x) - r.statistic(&x)).abs() < 1e-10);
        let p = QuadraticFormSet::single_pair(3).unwrap();
        assert!((p.statistic(&[1.5, -2.0, 9.0]) - 2.0 * 2.25 * 4.0).abs() < 1e-12);
        assert!(QuadraticFormSet::random(2, 3, 0).is_err());
    }

    #[test]
    fn empty_form_set_statistic_vanishes() {
        let s = QuadraticFormSet::new(3, vec![]).unwrap();
        let r = hanson_wright_check(&s, &[0.5, 4.0], 1000, HW_KAPPA, 0).unwrap();
        assert!(r.points.iter().all(|p| p.hits == 0 && p.pass));
    }

    #[test]
    fn form_norm_bounds() {
        let s = QuadraticFormSet::random(5, 4, 1).unwrap();
        let r = form_norm_diagnostic(&s, 2000, 2).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.v_upper <= 1.0 + 1e-9);
    }

    #[test]
    fn level_k_trivial_sets() {
        let full = GaussianSet::Box { lo: vec![f64::NEG_INFINITY; 3], hi: vec![f64::INFINITY; 3] };
        assert_eq!(full.exact_level_weight(1), Some(0.0));
        let sym = GaussianSet::Box { lo: vec![-1.0, f64::NEG_INFINITY], hi: vec![1.0, f64::INFINITY] };
        assert!(sym.exact_level_weight(1).unwrap().abs() < 1e-15);
        let h = GaussianSet::Halfspace { w: vec![1.0, 0.0], t: 1.0 };
        assert!((h.exact_level_weight(1).unwrap() - phi(1.0).powi(2)).abs() < 1e-15);
        assert_eq!(h.exact_level_weight(2), Some(0.0));
    }

    #[test]
    fn level_k_family_passes() {
        let fam = standard_family(3, 0);
        for k in [1, 2] {
            let r = level_k_inequality_check(&fam, k, 100_000, 4).unwrap();
            assert!(r.passed(), "{r:?}");
            for row in &r.rows {
                if let Some(ex) = row.lhs_exact {
                    assert!((row.lhs - ex).abs() <= 5.0 * row.lhs_error + 1e-12, "{row:?}");
                }
            }
        }
        let tiny = vec![("far".to_string(), GaussianSet::Halfspace { w: vec![1.0], t: 8.0 })];
        assert!(matches!(level_k_inequality_check(&tiny, 1, 1000, 0), Err(Error::SetTooSmall { .. })));
    }

    #[test]
    fn tightness_without_conditioning() {
        let p = hw_tightness_demo(16, 0.0, 50_000, 1).unwrap();
        assert_eq!(p.exact, 6.0);
        assert!((p.estimate - 6.0).abs() < 4.0 * p.stderr);
        assert!(hw_tightness_demo(5, 1.0, 10, 0).is_err());
        assert!(hw_tightness_demo(100, 1.0, 10, 0).is_err());
    }
}

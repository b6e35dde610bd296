//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! A criterion listed in `EXPECTED_FAILURES` must fail for exactly the
//! recorded reason, which is re-derived here from closed forms. Any other
//! failure makes the suite exit non-zero.

use std::process::ExitCode;
use std::time::Instant;

use fourier_growth::boolean::{l1_level_weight, majority_fn, walsh_hadamard};
use fourier_growth::concentration::{
    chi2_tail_check, halfspace_level_weight, hanson_wright_check, hw_tightness_scan, level_k_inequality_check, standard_family,
    GaussianSet, QuadraticFormSet, HW_KAPPA,
};
use fourier_growth::experiments::{coin_scan, standard_corpus};
use fourier_growth::fiber::{verify_fact_g_fiber_fourier, xor_fiber, LiftedProtocol};
use fourier_growth::gadgets::{
    balance_embed, gadget_fourier, gadget_growth_via_xor, gadget_round_trip, verify_g_to_xor_identity, verify_xor_to_g_identity,
    xor_growth_via_gadget, Gadget,
};
use fourier_growth::gaussian::{
    check_fact_boolean_to_real, martingale_report, run_clean_protocol, run_ensemble, GaussianConfig, SignPattern,
};
use fourier_growth::protocol::{from_parity_dt, maj_xor_protocol, random_protocol, x1y1_protocol, ParityTree, ProtocolTree};
use fourier_growth::stats::rng_for;
use fourier_growth::{Exact, Scalar};
use rand::Rng;

const SEED: u64 = 20_240_601;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Criterion 1: XOR-fibers of parity decision trees reproduce the trees.
fn exact_fiber_identities() -> Verdict {
    let mut worst = 0.0f64;
    let mut rng = rng_for(SEED, 1);
    for i in 0..50u64 {
        let n = rng.random_range(1..=10usize);
        let depth = rng.random_range(0..=4usize);
        let t = ParityTree::<Exact>::random(n, depth, SEED + i).unwrap();
        let h = xor_fiber(&from_parity_dt(&t, n).unwrap()).unwrap();
        for z in 0..1u64 << n {
            worst = worst.max((h.value(z).to_f64() - t.evaluate(z).to_f64()).abs());
            if h.value(z) != &t.evaluate(z) {
                return verdict(false, format!("tree {i} differs at z = {z}"));
            }
        }
    }
    verdict(worst == 0.0, format!("50 trees, max pointwise error {worst}"))
}

/// Criterion 2: majority level-one growth matches brute force and scales like √d.
fn maj_tightness() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in [3usize, 5, 7, 9, 11] {
        let h = xor_fiber(&maj_xor_protocol::<Exact>(d, d).unwrap()).unwrap();
        let got = l1_level_weight(&walsh_hadamard(&h), 1).unwrap();
        // brute-force level-one coefficients of MAJ_d
        let maj = majority_fn::<Exact>(d, d).unwrap();
        let mut brute = Exact::from_i64(0);
        for i in 0..d {
            let mut c = Exact::from_i64(0);
            for z in 0..1u64 << d {
                let v = *maj.value(z);
                c = if z >> i & 1 == 1 { c - v } else { c + v };
            }
            let c = c / Exact::from_i64(1 << d);
            brute = if c < Exact::from_i64(0) { brute - c } else { brute + c };
        }
        let ratio = got.to_f64() / (d as f64).sqrt();
        ok &= got == brute && (0.6..=1.0).contains(&ratio);
        parts.push(format!("d={d}: {:.6}/√d={ratio:.4}", got.to_f64()));
    }
    verdict(ok, parts.join(", "))
}

/// Criterion 3: gadget coefficient identities and growth chains.
fn gadget_identities() -> Verdict {
    let mut rng = rng_for(SEED, 3);
    let mut worst: f64 = 0.0;
    let mut exact_worst = Exact::from_i64(0);
    let mut chains = 0;
    let mut chain_failures = Vec::new();
    for i in 0..20u64 {
        let n = 1 + (i % 2) as usize;
        let d = rng.random_range(0..=3usize).min(2 * n);
        let g = match i % 3 {
            0 => Gadget::named("xor").unwrap(),
            1 => balance_embed(&Gadget::named("and").unwrap()).unwrap(),
            _ => {
                let vals: Vec<i8> = (0..4).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
                balance_embed(&Gadget::new(1, 1, vals).unwrap()).unwrap()
            }
        };
        let h = balance_embed(&Gadget::named("and").unwrap()).unwrap();
        let (m1, m2) = (g.m1(), g.m2());
        let (s, t, _) = gadget_fourier::<f64>(&g).argmax().unwrap();
        let c = random_protocol::<f64>(n, d, SEED + 100 + i, false).unwrap();
        let ce = random_protocol::<Exact>(n, d, SEED + 100 + i, false).unwrap();
        worst = worst.max(verify_xor_to_g_identity(&c, &g, s, t).unwrap());
        exact_worst = Exact::max_of(exact_worst, verify_xor_to_g_identity(&ce, &g, s, t).unwrap());
        let dl = rng.random_range(0..=3usize).min(2 * n * m1);
        let lifted = LiftedProtocol::new(random_protocol::<f64>(n * m1, dl, SEED + 200 + i, false).unwrap(), n, m1, m2).unwrap();
        let lifted_e = LiftedProtocol::new(random_protocol::<Exact>(n * m1, dl, SEED + 200 + i, false).unwrap(), n, m1, m2).unwrap();
        let pairs: Vec<(u64, u64)> = gadget_fourier::<f64>(&g).nonempty_pairs().filter(|p| *p.2 != 0.0).map(|p| (p.0, p.1)).collect();
        let assignment: Vec<(u64, u64)> = (0..n).map(|_| pairs[rng.random_range(0..pairs.len())]).collect();
        worst = worst.max(verify_g_to_xor_identity(&lifted, &assignment).unwrap());
        worst = worst.max(verify_fact_g_fiber_fourier(&lifted, &g).unwrap());
        exact_worst = Exact::max_of(exact_worst, verify_g_to_xor_identity(&lifted_e, &assignment).unwrap());
        for k in 1..=n {
            let up = xor_growth_via_gadget(&c, &g, k).unwrap();
            let down = gadget_growth_via_xor(&lifted, &g, k).unwrap();
            let (tight, loose) = gadget_round_trip(&lifted, &g, &h, k).unwrap();
            for (name, ok) in [("xor<-g", up.holds()), ("g<-xor", down.holds()), ("round trip", tight.holds()), ("width bound", loose.holds())] {
                chains += 1;
                if !ok {
                    chain_failures.push(format!("instance {i} k={k} {name}"));
                }
            }
        }
    }
    let pass = worst <= 1e-10 && exact_worst == Exact::from_i64(0) && chain_failures.is_empty();
    verdict(
        pass,
        format!("20 instances, max identity error {worst:.2e} (exact {}), {chains} chain inequalities, failures {chain_failures:?}", exact_worst.to_f64()),
    )
}

/// Criterion 4: Boolean-to-Gaussian coefficient identity by Monte Carlo.
fn fact_boolean_to_real() -> Verdict {
    let mut protocols: Vec<ProtocolTree<f64>> = vec![maj_xor_protocol(3, 3).unwrap(), x1y1_protocol(4).unwrap()];
    for (i, n) in [3usize, 4, 5, 6, 7, 8, 8, 6].into_iter().enumerate() {
        protocols.push(random_protocol(n, 4, SEED + 400 + i as u64, i % 2 == 1).unwrap());
    }
    let mut tests = 0;
    let mut worst: f64 = 0.0;
    for (i, c) in protocols.iter().enumerate() {
        let n = c.alice_bits();
        let spec = walsh_hadamard(&xor_fiber(c).unwrap());
        let subsets: Vec<u64> = (1..1u64 << n).filter(|s| (1..=2).contains(&s.count_ones()) && spec.coeff(*s).abs() > 1e-15).collect();
        if subsets.is_empty() {
            continue;
        }
        for f in check_fact_boolean_to_real(c, &subsets, 1_000_000, SEED + 500 + i as u64).unwrap() {
            tests += 1;
            worst = worst.max(f.z.abs());
        }
    }
    verdict(worst <= 4.0, format!("10 protocols, {tests} coefficients, max |z| = {worst:.3}"))
}

/// Criterion 5: hard invariants of clean-protocol runs.
fn clean_invariants() -> Verdict {
    let mut failures = Vec::new();
    let mut aborted = (0, 0);
    let mut worst_depth = (0, 0);
    let mut worst_bits = 0;
    let mut worst_gram: f64 = 0.0;
    let mut worst_frob: f64 = 0.0;
    for i in 0..100u64 {
        let c = random_protocol::<f64>(8, 4, SEED + 600 + i, false).unwrap();
        let eta = SignPattern::from_fiber(&c, 1).unwrap();
        let cfg = GaussianConfig::level1(8, SEED + 700 + i);
        let run = run_clean_protocol(&c, 1, &eta, &cfg).unwrap();
        aborted.0 += run.is_aborted() as usize;
        let inv = run.invariants();
        worst_depth.0 = worst_depth.0.max(inv.depth);
        worst_bits = worst_bits.max(inv.max_message_bits);
        worst_gram = worst_gram.max(inv.gram_error);
        if inv.depth > 2 * 8 + 2 * 4 || inv.gram_error > 1e-8 || inv.max_message_bits as f64 > inv.message_bits_bound || !inv.in_box {
            failures.push(format!("level-1 run {i}: {inv:?}"));
        }
    }
    for i in 0..50u64 {
        let c = random_protocol::<f64>(5, 3, SEED + 800 + i, false).unwrap();
        let eta = SignPattern::from_fiber(&c, 2).unwrap();
        let cfg = GaussianConfig { n_pop: 4000, n_min: 400, ..GaussianConfig::level2(5, 3, SEED + 900 + i) };
        let run = run_clean_protocol(&c, 2, &eta, &cfg).unwrap();
        aborted.1 += run.is_aborted() as usize;
        let inv = run.invariants();
        worst_depth.1 = worst_depth.1.max(inv.depth);
        worst_bits = worst_bits.max(inv.max_message_bits);
        worst_gram = worst_gram.max(inv.gram_error);
        worst_frob = worst_frob.max(inv.max_center_norm);
        if inv.depth > 2 * 25 || inv.gram_error > 1e-8 || inv.max_center_norm >= 5.0 * 4.0 || inv.max_message_bits as f64 > inv.message_bits_bound || !inv.in_box {
            failures.push(format!("level-2 run {i}: {inv:?}"));
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "depth max {}/{} (bounds 24/50), Gram error {worst_gram:.1e}, max center norm {worst_frob:.3} < 20, max bits {worst_bits} <= {:.2}, aborted {}/{}{}",
            worst_depth.0,
            worst_depth.1,
            8.0 + (4.0f64 * 5.0).log2(),
            aborted.0,
            aborted.1,
            if failures.is_empty() { String::new() } else { format!(", failures {failures:?}") }
        ),
    )
}

/// Criterion 6: martingale increments are centered and the quadratic
/// variation bounds the level-one growth.
fn martingale() -> Verdict {
    let c = maj_xor_protocol::<f64>(3, 4).unwrap();
    let eta = SignPattern::from_fiber(&c, 1).unwrap();
    let runs = run_ensemble(&c, 1, &eta, &GaussianConfig::level1(4, SEED + 1000), 200).unwrap();
    let r = martingale_report(&runs).unwrap();
    let l11 = l1_level_weight(&walsh_hadamard(&xor_fiber(&c).unwrap()), 1).unwrap();
    let tested = r.per_step.iter().filter(|s| s.pass.is_some()).count();
    let worst = r.per_step.iter().filter(|s| s.pass.is_some()).map(|s| s.studentized.abs()).fold(0.0, f64::max);
    let qv_ok = r.growth_bound >= l11 - 3.0 * r.growth_bound_stderr;
    verdict(
        r.martingale_ok() && qv_ok,
        format!(
            "{tested} step indices, max |mean/stderr| = {worst:.3}; 4√(mean QV) = {:.4} ± {:.4} vs L_{{1,1}} = {l11}",
            r.growth_bound, r.growth_bound_stderr
        ),
    )
}

/// `Pr[χ²_m ≥ r]` for even `m`: `e^{-r/2} Σ_{i<m/2} (r/2)^i / i!`.
fn chi2_even_tail(m: usize, r: f64) -> f64 {
    let half = r / 2.0;
    let mut term = 1.0;
    let mut sum = 0.0;
    for i in 0..m / 2 {
        if i > 0 {
            term *= half / i as f64;
        }
        sum += term;
    }
    (-half).exp() * sum
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Criterion 7: concentration tails and the level-k inequality.
fn concentration() -> (Verdict, Option<String>) {
    let mut failed_points = Vec::new();
    let mut parts = Vec::new();
    for m in [1usize, 4, 16] {
        let mf = m as f64;
        let rep = chi2_tail_check(m, &[2.0 * mf, 4.0 * mf, 8.0 * mf], 1_000_000, SEED + 1100 + m as u64).unwrap();
        for p in &rep.points {
            if !p.pass {
                failed_points.push((format!("chi2 m={m} r={}", p.r), m, p.r, p.empirical, p.bound));
            }
        }
        parts.push(format!("chi2 m={m}: {}", if rep.passed() { "ok" } else { "FAIL" }));
    }
    for m in [1usize, 3] {
        let set = if m == 1 { QuadraticFormSet::single_pair(4).unwrap() } else { QuadraticFormSet::random(4, 3, SEED).unwrap() };
        let mf = m as f64;
        let rep = hanson_wright_check(&set, &[98.0 * mf, 196.0 * mf], 1_000_000, HW_KAPPA, SEED + 1200 + m as u64).unwrap();
        for p in rep.points.iter().filter(|p| !p.pass) {
            failed_points.push((format!("hw m={m} r={}", p.r), 0, p.r, p.empirical, p.bound));
        }
        parts.push(format!("hw m={m}: {}", if rep.passed() { "ok" } else { "FAIL" }));
    }
    let family = standard_family(3, SEED);
    for k in [1usize, 2] {
        let rep = level_k_inequality_check(&family, k, 1_000_000, SEED + 1300 + k as u64).unwrap();
        for row in rep.rows.iter().filter(|r| !r.pass) {
            failed_points.push((format!("level-{k} {}", row.name), 0, 0.0, row.ratio, 1.0));
        }
        parts.push(format!("level-{k} worst ratio {:.4}", rep.worst_ratio));
    }
    // halfspace closed forms against 1-D integrals
    let dens = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut closed_err: f64 = 0.0;
    for (_, set) in family.iter() {
        if let GaussianSet::Halfspace { w, t } = set {
            let first = simpson(|g| g * dens(g), *t, 40.0, 400_000);
            let second = simpson(|g| (g * g - 1.0) * dens(g), *t, 40.0, 400_000);
            let l1: f64 = w.iter().map(|wi| (wi * first).powi(2)).sum();
            let mut l2 = 0.0;
            for i in 0..w.len() {
                for j in i + 1..w.len() {
                    l2 += (w[i] * w[j] * second).powi(2);
                }
            }
            closed_err = closed_err.max((halfspace_level_weight(w, *t, 1) - l1).abs());
            closed_err = closed_err.max((halfspace_level_weight(w, *t, 2) - l2).abs());
        }
    }
    if closed_err > 1e-6 {
        failed_points.push(("halfspace closed form".into(), 0, 0.0, closed_err, 1e-6));
    }
    parts.push(format!("halfspace closed-form error {closed_err:.1e}"));
    let pass = failed_points.is_empty();
    let names: Vec<&str> = failed_points.iter().map(|p| p.0.as_str()).collect();
    let detail = format!("{}; failing points {names:?}", parts.join(", "));
    // The tail bound e^{-r/4} is below the true χ²_16 tail at r = 32.
    let explained = failed_points.len() == 1 && failed_points[0].1 == 16 && failed_points[0].2 == 32.0 && {
        let exact = chi2_even_tail(16, 32.0);
        exact > (-8.0f64).exp()
    };
    let reason = explained.then(|| {
        format!(
            "exact Pr[chi2_16 >= 32] = {:.5} exceeds e^-8 = {:.3e}; the inequality is false at r = 2m for m = 16",
            chi2_even_tail(16, 32.0),
            (-8.0f64).exp()
        )
    });
    (verdict(pass, detail), reason)
}

/// Criterion 8: growth exponent of the conditioned quadratic form.
fn tightness() -> Verdict {
    let rep = hw_tightness_scan(&[4, 16, 36, 64], 1.0, 100_000, SEED + 1400).unwrap();
    let pts: Vec<String> = rep.points.iter().map(|p| format!("d={}: {:.1}", p.d, p.estimate)).collect();
    verdict(rep.passed(), format!("exponent {:.4} in [1.7, 2.3]; {}", rep.exponent, pts.join(", ")))
}

/// Criterion 9: exact coin-problem inequality over a corpus.
fn coin() -> Verdict {
    let grid = [-0.5, -0.3, -0.1, 0.1, 0.3, 0.5];
    let mut corpus = Vec::new();
    for (n, d) in [(4usize, 4usize), (6, 5), (8, 6)] {
        corpus.extend(standard_corpus(n, d, 10, SEED + 1500 + n as u64).unwrap());
    }
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for (i, c) in corpus.iter().enumerate() {
        let rep = coin_scan(c, &grid).unwrap();
        for r in &rep.rows {
            checked += 1;
            if r.bound.is_some_and(|b| b > 0.0) {
                worst_ratio = worst_ratio.max(r.delta / r.bound.unwrap());
            }
            if !matches!(r.certificate, fourier_growth::experiments::Certificate::Holds { .. }) {
                failures.push(format!("protocol {i} rho {}", r.rho));
            }
        }
    }
    verdict(
        failures.is_empty(),
        format!("{} protocols, {checked} exact comparisons, max |Δ|/bound = {worst_ratio:.4}, failures {failures:?}", corpus.len()),
    )
}

fn cli(args: &[&str]) -> (i32, Vec<u8>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["fglab"];
    argv.extend_from_slice(args);
    let code = fglab::run(argv, &mut out, &mut err);
    (code, out)
}

/// Criterion 10: byte-identical reports for identical seeds and flags.
fn determinism() -> Verdict {
    let dir = std::env::temp_dir().join(format!("fglab-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let corpus = dir.join("corpus.jsonl");
    let corpus_s = corpus.to_str().unwrap().to_string();
    let (_, body) = cli(&["--seed", "7", "corpus", "--n", "5", "--d", "4", "--count", "4"]);
    std::fs::write(&corpus, &body).unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec!["--seed", "7", "corpus", "--n", "5", "--d", "4", "--count", "4"],
        vec!["fiber", "--protocol", "maj:5", "--n", "5", "--k", "1"],
        vec!["--seed", "3", "fiber", "--protocol", "random:4", "--n", "6", "--k", "2", "--format", "json"],
        vec!["growth", "--corpus", &corpus_s],
        vec!["--seed", "5", "gadget", "--protocol", "random:3", "--n", "2", "--k", "2"],
        vec!["--seed", "11", "clean-sim", "--protocol", "maj:3", "--n", "4", "--runs", "30", "--pop", "5000"],
        vec!["--seed", "11", "clean-sim", "--protocol", "random:3", "--n", "4", "--level", "2", "--runs", "3", "--pop", "3000", "--n-min", "300", "--trace"],
        vec!["--seed", "2", "concentration", "chi2", "--m", "4", "--n-samples", "200000"],
        vec!["--seed", "2", "concentration", "hw", "--m", "3", "--n-samples", "100000"],
        vec!["--seed", "2", "concentration", "level-k", "--k", "2", "--n-samples", "100000"],
        vec!["--seed", "2", "concentration", "hw-tightness", "--n-samples", "20000", "--format", "json"],
        vec!["--seed", "2", "concentration", "form-norms", "--m", "3", "--n-samples", "2000"],
        vec!["coin", "--protocol", "maj:5", "--n", "5"],
        vec!["--seed", "9", "gap-hamming", "--protocol", "random:5", "--n", "8"],
    ];
    let mut mismatches = Vec::new();
    for cmd in &commands {
        let (c1, o1) = cli(cmd);
        let (c2, o2) = cli(cmd);
        if c1 != c2 || o1 != o2 || o1.is_empty() {
            mismatches.push(cmd.join(" "));
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    verdict(mismatches.is_empty(), format!("{} commands rerun, mismatches {mismatches:?}", commands.len()))
}

/// Criteria whose failure is recorded as unattainable.
const EXPECTED_FAILURES: &[usize] = &[7];

fn main() -> ExitCode {
    let mut unexpected = Vec::new();
    let mut report = |id: usize, name: &str, f: &dyn Fn() -> (Verdict, Option<String>)| {
        let start = Instant::now();
        let (v, reason) = f();
        let secs = start.elapsed().as_secs_f64();
        println!("criterion {id:>2} [{name}]: {} ({:.1} s) {}", if v.pass { "PASS" } else { "FAIL" }, secs, v.detail);
        if !v.pass {
            match reason {
                Some(r) if EXPECTED_FAILURES.contains(&id) => println!("             expected failure: {r}"),
                _ => unexpected.push(id),
            }
        }
    };
    let plain = |f: fn() -> Verdict| move || (f(), None);
    report(1, "exact fiber identities", &plain(exact_fiber_identities));
    report(2, "majority tightness", &plain(maj_tightness));
    report(3, "gadget identities", &plain(gadget_identities));
    report(4, "Boolean-to-Gaussian coefficients", &plain(fact_boolean_to_real));
    report(5, "clean-protocol invariants", &plain(clean_invariants));
    report(6, "martingale property", &plain(martingale));
    report(7, "concentration tails", &concentration);
    report(8, "tightness exponent", &plain(tightness));
    report(9, "coin inequality", &plain(coin));
    report(10, "determinism", &plain(determinism));
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}

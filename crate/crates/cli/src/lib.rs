//! `fglab`: command-line drivers over the `fourier-growth` library.
//!
//! Every report is deterministic given `--seed` and the flags. Reports with a
//! PASS/FAIL verdict exit with status 1 when anything fails; usage errors and
//! library errors exit with status 2.

use std::fs;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use fourier_growth::boolean::{l1_level_weight, walsh_hadamard};
use fourier_growth::concentration::{
    chi2_tail_check, form_norm_diagnostic, hanson_wright_check, hw_tightness_scan, level_k_inequality_check, standard_family,
    QuadraticFormSet, HW_KAPPA,
};
use fourier_growth::experiments::{
    coin_scan, corpus_from_jsonl, corpus_to_jsonl, gap_hamming_demo, growth_report, random_corpus, standard_corpus,
};
use fourier_growth::fiber::xor_fiber;
use fourier_growth::gadgets::{balance_embed, check_balanced, gadget_fourier, gadget_round_trip, gadget_growth_via_xor, xor_growth_via_gadget, xor_to_g_protocol, Gadget};
use fourier_growth::gaussian::{martingale_report, run_ensemble, GaussianConfig, SignPattern};
use fourier_growth::protocol::{maj_xor_protocol, random_protocol, x1y1_protocol, ProtocolTree};
use fourier_growth::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "fglab", version, about = "Fourier growth laboratory for two-party protocols")]
pub struct Cli {
    /// Base seed for every random choice.
    #[arg(long, global = true, env = "FGLAB_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

/// Protocol specs: `maj:D`, `const:V`, `x1y1`, `random:D` (seeded by
/// `--seed`), `file:PATH` (protocol JSON). All use `--n` bits per party.
#[derive(Debug, Args)]
pub struct ProtocolArgs {
    #[arg(long)]
    pub protocol: String,
    #[arg(long)]
    pub n: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// L_{1,k} of the XOR-fiber. CSV: protocol,n,d,k,l1k.
    Fiber {
        #[command(flatten)]
        p: ProtocolArgs,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Growth table over a corpus. CSV: protocol_id,n,d,l11,l11_over_sqrt_d,l12,l12_over_d32_log3n.
    Growth {
        /// JSON-lines corpus file.
        #[arg(long)]
        corpus: String,
    },
    /// Gadget growth inequalities for a protocol lifted through the argmax
    /// coefficient of the gadget. CSV: check,k,lhs,rhs,holds.
    Gadget {
        #[command(flatten)]
        p: ProtocolArgs,
        /// xor, and, and± or ip2; `balanced:NAME` multiplies NAME by a fresh XOR bit.
        #[arg(long, default_value = "balanced:and")]
        gadget: String,
        /// Second gadget of the round trip; defaults to the first.
        #[arg(long)]
        target: Option<String>,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Ensemble of clean-protocol runs. CSV: one row per run, then per-step
    /// martingale statistics.
    CleanSim(CleanSimArgs),
    /// Gaussian concentration checks.
    Concentration {
        #[command(subcommand)]
        check: ConcentrationCommand,
    },
    /// Exact coin-problem scan. CSV: rho,delta,ln_factor,t,bound,certificate,ratio.
    Coin {
        #[command(flatten)]
        p: ProtocolArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-0.5, -0.3, -0.1, 0.1, 0.3, 0.5])]
        rho: Vec<f64>,
    },
    /// Gap-Hamming advantages at rho = scale/sqrt(n). CSV: field,value.
    GapHamming {
        #[command(flatten)]
        p: ProtocolArgs,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Seeded protocol corpus as JSON lines.
    Corpus {
        #[arg(long, value_enum, default_value_t = CorpusKind::Standard)]
        kind: CorpusKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Leaves on the 2^-8 grid of [-1, 1] instead of ±1.
        #[arg(long)]
        non_boolean: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CorpusKind {
    Standard,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EtaChoice {
    Fiber,
    Random,
}

#[derive(Debug, Args)]
pub struct CleanSimArgs {
    #[command(flatten)]
    pub p: ProtocolArgs,
    #[arg(long, default_value_t = 1)]
    pub level: usize,
    #[arg(long, default_value_t = 30)]
    pub runs: usize,
    /// Cleanup threshold; 100 at level 1 and d·log₂⁴n at level 2 by default.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 4.0)]
    pub t: f64,
    #[arg(long, default_value_t = 8)]
    pub l: u32,
    #[arg(long, default_value_t = 20_000)]
    pub pop: usize,
    #[arg(long, default_value_t = 500)]
    pub n_min: usize,
    #[arg(long, value_enum, default_value_t = EtaChoice::Fiber)]
    pub eta: EtaChoice,
    /// Emit every step of every run as JSON lines instead of the summary.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Subcommand)]
pub enum ConcentrationCommand {
    /// Chi-squared tails against e^{-r/4}. CSV: r,empirical,ci_low,ci_high,bound,verdict.
    Chi2 {
        #[arg(long)]
        m: usize,
        /// Thresholds; 2m,4m,8m by default.
        #[arg(long, value_delimiter = ',')]
        r: Vec<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        n_samples: u64,
    },
    /// Orthonormal quadratic-form tails against exp(-r/(κ(m+√r))).
    Hw {
        #[arg(long)]
        m: usize,
        /// Gaussian dimension.
        #[arg(long, default_value_t = 4)]
        dim: usize,
        /// Thresholds; 98m,196m by default.
        #[arg(long, value_delimiter = ',')]
        r: Vec<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        n_samples: u64,
        #[arg(long, default_value_t = HW_KAPPA)]
        kappa: f64,
    },
    /// Level-k inequality over halfspaces, boxes, a polytope and an orthant.
    /// CSV: name,k,mu,lhs,lhs_exact,bound,ratio,ratio_error,verdict.
    LevelK {
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 1_000_000)]
        n_samples: u64,
    },
    /// Growth of E[q | X] on the tightness example. CSV: d,threshold,estimate,stderr,exact.
    HwTightness {
        #[arg(long, value_delimiter = ',', default_values_t = [4, 16, 36, 64])]
        d: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 100_000)]
        n_samples: u64,
    },
    /// Norm diagnostics of a random form set against their dimension bounds.
    FormNorms {
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long, default_value_t = 10_000)]
        n_samples: u64,
    },
}

/// Parses a protocol spec; see [`ProtocolArgs`].
pub fn parse_protocol(spec: &str, n: usize, seed: u64) -> Result<ProtocolTree<f64>, Error> {
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let num = |a: &str| a.parse::<usize>().map_err(|_| Error::InvalidArgument(format!("bad number in protocol spec {spec:?}")));
    match kind {
        "maj" => maj_xor_protocol(num(arg)?, n),
        "const" => {
            let v: f64 = arg.parse().map_err(|_| Error::InvalidArgument(format!("bad constant in {spec:?}")))?;
            ProtocolTree::constant(n, n, v)
        }
        "x1y1" => x1y1_protocol(n),
        "random" => random_protocol(n, num(arg)?, seed, false),
        "file" => {
            let c = ProtocolTree::from_json(fs::read_to_string(arg)?.trim())?;
            if c.alice_bits() != n || c.bob_bits() != n {
                return Err(Error::InvalidArgument(format!("protocol in {arg} has widths ({}, {}), not {n}", c.alice_bits(), c.bob_bits())));
            }
            Ok(c)
        }
        _ => Err(Error::InvalidArgument(format!("unknown protocol spec {spec:?}"))),
    }
}

pub fn parse_gadget(name: &str) -> Result<Gadget, Error> {
    match name.strip_prefix("balanced:") {
        Some(inner) => balance_embed(&Gadget::named(inner)?),
        None => Gadget::named(name),
    }
}

struct Report {
    body: String,
    pass: bool,
}

impl Report {
    fn info(body: String) -> Self {
        Self { body, pass: true }
    }
}

fn json_body(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn execute(cli: &Cli) -> Result<Report, Error> {
    let fmt = cli.format;
    let seed = cli.seed;
    match &cli.command {
        Command::Fiber { p, k } => {
            let c = parse_protocol(&p.protocol, p.n, seed)?;
            let spec = walsh_hadamard(&xor_fiber(&c)?);
            let w = l1_level_weight(&spec, *k)?;
            Ok(Report::info(match fmt {
                Format::Csv => format!("protocol,n,d,k,l1k\n{},{},{},{},{:.15e}\n", p.protocol, p.n, c.cost(), k, w),
                Format::Json => json_body(&json!({"protocol": p.protocol, "n": p.n, "d": c.cost(), "k": k, "l1k": w})),
            }))
        }
        Command::Growth { corpus } => {
            let corpus = corpus_from_jsonl(&fs::read_to_string(corpus)?)?;
            let r = growth_report(&corpus)?;
            Ok(Report::info(match fmt {
                Format::Csv => r.to_csv(),
                Format::Json => json_body(&r),
            }))
        }
        Command::Gadget { p, gadget, target, k } => {
            let c = parse_protocol(&p.protocol, p.n, seed)?;
            let g = parse_gadget(gadget)?;
            let h = parse_gadget(target.as_deref().unwrap_or(gadget))?;
            let mut rows: Vec<(String, f64, f64, bool)> = Vec::new();
            let up = xor_growth_via_gadget(&c, &g, *k)?;
            rows.push(("xor_via_gadget".into(), up.lhs, up.rhs, up.holds()));
            if check_balanced(&g) && check_balanced(&h) {
                let (s, t, _) = gadget_fourier::<f64>(&g).argmax()?;
                let lifted = xor_to_g_protocol(&c, &g, s, t)?;
                let down = gadget_growth_via_xor(&lifted, &g, *k)?;
                rows.push(("gadget_via_xor".into(), down.lhs, down.rhs, down.holds()));
                let (tight, loose) = gadget_round_trip(&lifted, &g, &h, *k)?;
                rows.push(("round_trip".into(), tight.lhs, tight.rhs, tight.holds()));
                rows.push(("round_trip_width_bound".into(), loose.lhs, loose.rhs, loose.holds()));
            }
            let pass = rows.iter().all(|r| r.3);
            let body = match fmt {
                Format::Csv => {
                    let mut s = String::from("check,k,lhs,rhs,holds\n");
                    for (name, l, r, ok) in &rows {
                        s.push_str(&format!("{name},{k},{l:.15e},{r:.15e},{}\n", verdict(*ok)));
                    }
                    s
                }
                Format::Json => json_body(
                    &rows.iter().map(|(name, l, r, ok)| json!({"check": name, "k": k, "lhs": l, "rhs": r, "holds": ok})).collect::<Vec<Value>>(),
                ),
            };
            Ok(Report { body, pass })
        }
        Command::CleanSim(a) => clean_sim(a, seed, fmt),
        Command::Concentration { check } => concentration(check, seed, fmt),
        Command::Coin { p, rho } => {
            let c = parse_protocol(&p.protocol, p.n, seed)?;
            let r = coin_scan(&c, rho)?;
            let pass = r.passed();
            Ok(Report {
                body: match fmt {
                    Format::Csv => r.to_csv(),
                    Format::Json => json_body(&r),
                },
                pass,
            })
        }
        Command::GapHamming { p, scale } => {
            let c = parse_protocol(&p.protocol, p.n, seed)?;
            let r = gap_hamming_demo(&c, *scale)?;
            let pass = r.passed();
            let body = match fmt {
                Format::Json => json_body(&r),
                Format::Csv => {
                    let Value::Object(map) = serde_json::to_value(&r)? else { unreachable!("reports serialize to objects") };
                    let mut s = String::from("field,value\n");
                    for (key, v) in map {
                        match v {
                            Value::Object(inner) => {
                                for (k2, v2) in inner {
                                    s.push_str(&format!("{key}.{k2},{v2}\n"));
                                }
                            }
                            other => s.push_str(&format!("{key},{other}\n")),
                        }
                    }
                    s
                }
            };
            Ok(Report { body, pass })
        }
        Command::Corpus { kind, n, d, count, non_boolean } => {
            let corpus = match kind {
                CorpusKind::Standard => standard_corpus(*n, *d, *count, seed)?,
                CorpusKind::Random => random_corpus(*n, *d, *count, seed, *non_boolean)?,
            };
            Ok(Report::info(corpus_to_jsonl(&corpus)))
        }
    }
}

fn clean_sim(a: &CleanSimArgs, seed: u64, fmt: Format) -> Result<Report, Error> {
    let c = parse_protocol(&a.p.protocol, a.p.n, seed)?;
    let base = match a.level {
        1 => GaussianConfig::level1(a.p.n, seed),
        2 => GaussianConfig::level2(a.p.n, c.cost(), seed),
        l => return Err(Error::InvalidArgument(format!("level must be 1 or 2, got {l}"))),
    };
    let cfg = GaussianConfig { t: a.t, l: a.l, n_pop: a.pop, n_min: a.n_min, lambda: a.lambda.unwrap_or(base.lambda), ..base };
    let eta = match a.eta {
        EtaChoice::Fiber => SignPattern::from_fiber(&c, a.level)?,
        EtaChoice::Random => SignPattern::random(a.p.n, a.level, seed)?,
    };
    let runs = run_ensemble(&c, a.level, &eta, &cfg, a.runs)?;
    if a.trace {
        let mut body = String::new();
        for (i, r) in runs.iter().enumerate() {
            for line in r.to_json_lines().lines() {
                body.push_str(&format!("{{\"run\":{i},\"record\":{line}}}\n"));
            }
        }
        return Ok(Report::info(body));
    }
    let invariants: Vec<_> = runs.iter().map(|r| r.invariants()).collect();
    let inv_ok = invariants.iter().all(|inv| inv.holds(a.level, a.p.n, cfg.t, cfg.l));
    let mart = if runs.len() >= 30 { Some(martingale_report(&runs)?) } else { None };
    let pass = inv_ok && mart.as_ref().is_none_or(|m| m.martingale_ok());
    let body = match fmt {
        Format::Json => json_body(&json!({
            "runs": runs.iter().zip(&invariants).enumerate().map(|(i, (r, inv))| json!({
                "run": i,
                "seed": cfg.seed.wrapping_add(i as u64),
                "outcome": r.outcome,
                "quadratic_variation": r.quadratic_variation(),
                "raw_only_triggers": r.raw_only_triggers,
                "invariants": inv,
            })).collect::<Vec<Value>>(),
            "martingale": mart,
            "verdict": verdict(pass),
        })),
        Format::Csv => {
            let mut s = String::from("run,seed,outcome,depth,depth_bound,quadratic_variation,gram_error,max_center_norm,max_message_bits,raw_only_triggers,invariants\n");
            for (i, (r, inv)) in runs.iter().zip(&invariants).enumerate() {
                let outcome = match &r.outcome {
                    fourier_growth::gaussian::Outcome::Leaf { value } => format!("leaf:{value}"),
                    fourier_growth::gaussian::Outcome::Aborted { step, .. } => format!("aborted:{step}"),
                };
                s.push_str(&format!(
                    "{i},{},{outcome},{},{},{:.9e},{:.3e},{:.6},{},{},{}\n",
                    cfg.seed.wrapping_add(i as u64),
                    inv.depth,
                    inv.depth_bound,
                    r.quadratic_variation(),
                    inv.gram_error,
                    inv.max_center_norm,
                    inv.max_message_bits,
                    r.raw_only_triggers,
                    verdict(inv.holds(a.level, a.p.n, cfg.t, cfg.l))
                ));
            }
            if let Some(m) = &mart {
                s.push('\n');
                s.push_str(&m.to_csv());
                s.push_str(&format!("\nmean_qv,{:.9e}\ngrowth_bound,{:.9e}\ngrowth_bound_stderr,{:.9e}\n", m.mean_qv, m.growth_bound, m.growth_bound_stderr));
            }
            s
        }
    };
    Ok(Report { body, pass })
}

fn concentration(check: &ConcentrationCommand, seed: u64, fmt: Format) -> Result<Report, Error> {
    match check {
        ConcentrationCommand::Chi2 { m, r, n_samples } => {
            let grid = if r.is_empty() { vec![2.0 * *m as f64, 4.0 * *m as f64, 8.0 * *m as f64] } else { r.clone() };
            let rep = chi2_tail_check(*m, &grid, *n_samples, seed)?;
            Ok(Report {
                pass: rep.passed(),
                body: match fmt {
                    Format::Csv => rep.to_csv(),
                    Format::Json => json_body(&rep),
                },
            })
        }
        ConcentrationCommand::Hw { m, dim, r, n_samples, kappa } => {
            let set = if *m == 1 { QuadraticFormSet::single_pair(*dim)? } else { QuadraticFormSet::random(*dim, *m, seed)? };
            let grid = if r.is_empty() { vec![98.0 * *m as f64, 196.0 * *m as f64] } else { r.clone() };
            let rep = hanson_wright_check(&set, &grid, *n_samples, *kappa, seed)?;
            Ok(Report {
                pass: rep.passed(),
                body: match fmt {
                    Format::Csv => rep.to_csv(),
                    Format::Json => json_body(&rep),
                },
            })
        }
        ConcentrationCommand::LevelK { k, dim, n_samples } => {
            let rep = level_k_inequality_check(&standard_family(*dim, seed), *k, *n_samples, seed)?;
            let body = match fmt {
                Format::Json => json_body(&rep),
                Format::Csv => {
                    let mut s = String::from("name,k,mu,lhs,lhs_exact,bound,ratio,ratio_error,verdict\n");
                    for r in &rep.rows {
                        s.push_str(&format!(
                            "{},{},{:.9e},{:.9e},{},{:.9e},{:.6},{:.6},{}\n",
                            r.name,
                            r.k,
                            r.mu,
                            r.lhs,
                            r.lhs_exact.map_or(String::new(), |v| format!("{v:.9e}")),
                            r.bound,
                            r.ratio,
                            r.ratio_error,
                            verdict(r.pass)
                        ));
                    }
                    s
                }
            };
            Ok(Report { pass: rep.passed(), body })
        }
        ConcentrationCommand::HwTightness { d, c, n_samples } => {
            let rep = hw_tightness_scan(d, *c, *n_samples, seed)?;
            let body = match fmt {
                Format::Json => json_body(&rep),
                Format::Csv => {
                    let mut s = String::from("d,threshold,estimate,stderr,exact\n");
                    for p in &rep.points {
                        s.push_str(&format!("{},{:.6},{:.9e},{:.9e},{:.9e}\n", p.d, p.threshold, p.estimate, p.stderr, p.exact));
                    }
                    s.push_str(&format!("\nexponent,{:.6},{}\n", rep.exponent, verdict(rep.passed())));
                    s
                }
            };
            Ok(Report { pass: rep.passed(), body })
        }
        ConcentrationCommand::FormNorms { m, dim, n_samples } => {
            let set = QuadraticFormSet::random(*dim, *m, seed)?;
            let rep = form_norm_diagnostic(&set, *n_samples, seed)?;
            let body = match fmt {
                Format::Json => json_body(&rep),
                Format::Csv => format!(
                    "m,f,g,h,v_upper,verdict\n{},{:.9e},{:.9e},{:.9e},{:.9e},{}\n",
                    rep.m,
                    rep.f,
                    rep.g,
                    rep.h,
                    rep.v_upper,
                    verdict(rep.pass)
                ),
            };
            Ok(Report { pass: rep.pass, body })
        }
    }
}

/// Runs the CLI on `argv` (including the program name). Exit status 0 on
/// success, 1 when a report contains FAIL, 2 on usage or library errors.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            let _ = if code == 0 { out.write_all(rendered.as_bytes()) } else { err.write_all(rendered.as_bytes()) };
            return if code == 0 { 0 } else { 2 };
        }
    };
    let report = match execute(&cli) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 2;
        }
    };
    let written = match &cli.out {
        Some(path) => fs::write(path, &report.body),
        None => out.write_all(report.body.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: {e}");
        return 2;
    }
    if report.pass {
        0
    } else {
        1
    }
}

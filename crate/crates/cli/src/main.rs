use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crochet_core::biset::{validate, SearchBudget, WreathRecursion};
use crochet_core::cactoid::{
    build_correspondence, certify_expansion, decomposition_correspondence, iterate_correspondence, quotient_report,
    CactoidCorrespondence, CollapsingData, CollapsingSpec, QuotientKind, TOLERANCE,
};
use crochet_core::clusters::stabilize;
use crochet_core::decomposer::{crochet_algorithm, mate, tune, CrochetDecomposition, SmallMapType, TuneSpec};
use crochet_core::multicurve::{generate_invariant, lift_entries, CurveLiftGraph, MultiCurve};
use crochet_core::words::{conj_class, ConjClass};
use crochet_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "crochet", version, about = "Crochet decomposition of Thurston maps given as wreath recursions")]
struct Cli {
    /// Default budget as `L[,N]`.
    #[arg(long, env = "CROCHET_BUDGET", global = true)]
    budget: Option<String>,
    /// Maximum iteration depth N.
    #[arg(long, global = true)]
    max_depth: Option<usize>,
    /// Maximum word length L.
    #[arg(long, global = true)]
    length_bound: Option<usize>,
    #[arg(long, value_enum, default_value_t = Emit::Text, global = true)]
    emit: Emit,
    /// Worker threads for the parallel searches.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Emit {
    Json,
    Dot,
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the recursion and print the induced dynamics on punctures.
    Validate { path: PathBuf },
    /// Lift a curve, e.g. `"x1 x2"` or `"1,-3"`.
    LiftCurve { path: PathBuf, curve: String },
    /// Invariant multicurve generated by the given curves.
    InvariantMc { path: PathBuf, curves: Vec<String> },
    /// Clusters of touching Fatou components.
    Clusters { path: PathBuf },
    /// Run the crochet algorithm.
    Decompose { path: PathBuf },
    /// Cactoid correspondence and expansion certificate.
    Cactoid {
        path: PathBuf,
        /// Collapsing data to use instead of the canonical one (JSON).
        #[arg(long)]
        collapse: Option<PathBuf>,
        /// Level of the iterated correspondence to report.
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Tune a plug into a host, or mate two maps, and print the recursion.
    Amalgam {
        host: PathBuf,
        plug: PathBuf,
        /// Host puncture replaced by the plug.
        #[arg(long)]
        at: usize,
        /// Plug puncture glued to the host.
        #[arg(long)]
        inf: usize,
        /// Plug puncture receiving host preimages of `at`.
        #[arg(long)]
        target: Option<usize>,
        #[arg(long, default_value = "p_")]
        prefix: String,
        /// Mate along `at` and `inf` instead of tuning.
        #[arg(long)]
        mate: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn budget(cli: &Cli) -> Result<SearchBudget> {
    let mut b = match &cli.budget {
        Some(s) => SearchBudget::parse(s)?,
        None => SearchBudget::default(),
    };
    if let Some(l) = cli.length_bound {
        b.max_len = l;
    }
    if let Some(n) = cli.max_depth {
        b.max_depth = n;
    }
    SearchBudget::new(b.max_len, b.max_depth)
}

fn load(path: &Path) -> Result<WreathRecursion> {
    WreathRecursion::load(path)
}

/// Parses letters such as `x1 x2^-1 -3` into a word of the sphere group.
fn parse_curve(r: &WreathRecursion, s: &str) -> Result<ConjClass> {
    let bad = || Error::Shape(format!("cannot read curve `{s}`"));
    let mut letters = Vec::new();
    for tok in s.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
        let (body, inv) = match tok.strip_suffix("^-1") {
            Some(b) => (b, true),
            None => (tok, false),
        };
        let (neg, body) = match body.strip_prefix('-') {
            Some(b) => (true, b),
            None => (false, body),
        };
        let g: i32 = body.trim_start_matches('x').parse().map_err(|_| bad())?;
        letters.push(if neg ^ inv { -g } else { g });
    }
    Ok(conj_class(&r.base.to_free(&letters)?))
}

fn curve_list(c: &MultiCurve) -> String {
    if c.is_empty() {
        return "∅".into();
    }
    let words: Vec<String> = c.curves().iter().map(|g| g.word().to_string()).collect();
    format!("{{{}}}", words.join(", "))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn to_value<T: serde::Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("serializable")
}

fn run(cli: &Cli) -> Result<String> {
    if let Some(t) = cli.threads {
        crochet_core::set_threads(t);
    }
    let budget = budget(cli)?;
    match &cli.command {
        Command::Validate { path } => {
            let r = load(path)?;
            let dy = validate(&r)?;
            Ok(match cli.emit {
                Emit::Json => pretty(&json!({ "punctures": r.base.punctures(), "dynamics": to_value(&dy) })),
                _ => {
                    let mut s = format!("valid: degree {}, {} punctures\n", r.degree, r.n());
                    for a in 1..=r.n() {
                        s.push_str(&format!(
                            "  {} -> {} (local degree {}){}\n",
                            r.base.name(a),
                            r.base.name(dy.image(a)),
                            dy.local_degree(a),
                            if dy.a_inf.contains(&a) { ", periodic critical orbit" } else { "" }
                        ));
                    }
                    s
                }
            })
        }
        Command::LiftCurve { path, curve } => {
            let r = load(path)?;
            validate(&r)?;
            let c = parse_curve(&r, curve)?;
            let lifts = lift_entries(&r, &c)?;
            Ok(match cli.emit {
                Emit::Json => pretty(&json!({ "curve": c.word().to_string(), "lifts": to_value(&lifts) })),
                _ => {
                    let mut s = format!("curve {}\n", c.word());
                    for l in &lifts {
                        let tag = if l.essential { "essential" } else { "inessential" };
                        s.push_str(&format!("  {} degree {} {tag}\n", l.class.word(), l.degree));
                    }
                    s
                }
            })
        }
        Command::InvariantMc { path, curves } => {
            let r = load(path)?;
            validate(&r)?;
            let seed = MultiCurve::new(&r.base, curves.iter().map(|s| parse_curve(&r, s)).collect::<Result<Vec<_>>>()?)?;
            let c = generate_invariant(&r, &seed, &budget)?;
            let g = CurveLiftGraph::build(&r, &c)?;
            Ok(match cli.emit {
                Emit::Json => pretty(&json!({ "budget": to_value(&budget), "multicurve": c.to_arrays(), "graph": to_value(&g) })),
                Emit::Dot => g.to_dot(),
                Emit::Text => format!("C = {}\n", curve_list(&c)),
            })
        }
        Command::Clusters { path } => {
            let r = load(path)?;
            let dy = validate(&r)?;
            let k = stabilize(&r, &dy, &budget)?;
            let parts = k.state.clusters();
            Ok(match cli.emit {
                Emit::Json => pretty(&json!({ "budget": to_value(&budget), "clusters": to_value(&k) })),
                _ => {
                    let mut s = format!("stable from level {}\n", k.stable_level);
                    for p in parts {
                        let names: Vec<&str> = p.iter().map(|&a| r.base.name(a)).collect();
                        s.push_str(&format!("  {{{}}}\n", names.join(", ")));
                    }
                    s
                }
            })
        }
        Command::Decompose { path } => {
            let r = load(path)?;
            let dec = crochet_algorithm(&r, &budget)?;
            let q = quotient_report(&r, &dec, &[], &budget)?;
            Ok(match cli.emit {
                Emit::Json => pretty(&json!({
                    "budget": to_value(&budget),
                    "decomposition": to_value(&dec),
                    "quotient": to_value(&q),
                })),
                Emit::Dot => format!("{}{}", dec.graph.to_dot(), q.cactoid.to_dot()),
                Emit::Text => decomposition_text(&r, &dec, q.kind, &budget),
            })
        }
        Command::Cactoid { path, collapse, levels } => {
            let r = load(path)?;
            let corr = match collapse {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
                    let spec: CollapsingSpec =
                        serde_json::from_str(&text).map_err(|e| Error::Shape(format!("collapsing data: {e}")))?;
                    validate(&r)?;
                    build_correspondence(&r, &CollapsingData::from_spec(&r, &spec)?, &budget)?
                }
                None => decomposition_correspondence(&r, &crochet_algorithm(&r, &budget)?)?,
            };
            Ok(cactoid_output(cli.emit, &corr, *levels, &budget))
        }
        Command::Amalgam { host, plug, at, inf, target, prefix, mate: mating } => {
            let h = load(host)?;
            let p = load(plug)?;
            validate(&h)?;
            validate(&p)?;
            let out = if *mating {
                mate(&h, *at, &p, *inf)?
            } else {
                tune(&h, &p, &TuneSpec { at: *at, inf: *inf, target: *target, prefix: prefix.clone(), rotation: None })?
            };
            validate(&out)?;
            let mut s = out.to_json();
            s.push('\n');
            Ok(s)
        }
    }
}

fn decomposition_text(r: &WreathRecursion, dec: &CrochetDecomposition, kind: QuotientKind, budget: &SearchBudget) -> String {
    let verdict = if dec.is_crochet() {
        "crochet".to_string()
    } else if !dec.unresolved.is_empty() {
        "not within budget".to_string()
    } else if dec.c_dec.is_empty() {
        "sierpinski".to_string()
    } else {
        format!("amalgam of {} crochet and {} sierpinski small maps", dec.i_bullet.len(), dec.i_circ.len())
    };
    let quotient = match kind {
        QuotientKind::Point => "point",
        QuotientKind::Dendrite => "dendrite",
        QuotientKind::Cactoid => "cactoid",
    };
    let mut s = format!("C_dec = {}; classification: {verdict}; quotient: {quotient}\n", curve_list(&dec.c_dec));
    s.push_str(&format!("C_Sie = {}\nC_bi = {}\n", curve_list(&dec.c_sie), curve_list(&dec.c_bi)));
    for c in &dec.classes {
        let names: Vec<&str> = dec.complex.nodes[c.node].punctures.iter().map(|&a| r.base.name(a)).collect();
        let kind = match c.kind {
            SmallMapType::Crochet => "crochet",
            SmallMapType::Sierpinski => "sierpinski",
            SmallMapType::NotWithinBudget => "not within budget",
        };
        s.push_str(&format!("  node {} [{}]: {kind}\n", c.node, names.join(", ")));
    }
    s.push_str(&format!("budget: L={}, N={}\n", budget.max_len, budget.max_depth));
    s
}

fn cactoid_output(emit: Emit, corr: &CactoidCorrespondence, levels: usize, budget: &SearchBudget) -> String {
    let cert = certify_expansion(corr, TOLERANCE);
    let level = iterate_correspondence(corr, levels);
    match emit {
        Emit::Json => {
            let (certificate, failure) = match &cert {
                Ok(c) => (to_value(c), Value::Null),
                Err(f) => (Value::Null, to_value(f)),
            };
            pretty(&json!({
                "budget": to_value(budget),
                "correspondence": to_value(corr),
                "certificate": certificate,
                "failure": failure,
                "level": to_value(&level),
            }))
        }
        Emit::Dot => corr.x1.to_dot(),
        Emit::Text => {
            let x = &corr.x1;
            let mut s = if x.is_point() {
                "cactoid: single point\n".to_string()
            } else {
                format!("cactoid: {} points, {} spheres, {} segments\n", x.points.len(), x.spheres.len(), x.segments.len())
            };
            match &cert {
                Ok(c) => {
                    s.push_str("certificate: expanding\n");
                    for b in &c.blocks {
                        s.push_str(&format!("  segments {:?}: lambda in [{}, {}]\n", b.segments, b.lower, b.upper));
                    }
                }
                Err(f) => {
                    s.push_str("certificate: failed\n");
                    for r in &f.reasons {
                        s.push_str(&format!("  {r}\n"));
                    }
                }
            }
            s.push_str(&format!("level {}: segment cells {:?}\n", level.level, level.segment_cells));
            s
        }
    }
}

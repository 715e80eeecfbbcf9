//! Command-line front end for `rpqwidth`.
//!
//! Every subcommand produces a [`Report`]; text and JSON renderings are
//! generated from the same list of facts.

use std::ffi::OsString;
use std::io::Read;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use rpqwidth::approximation::{minimize_union, mua_hom_bounded, union_bound, ApproxError, ApproxLimits, WidthClass};
use rpqwidth::decomposition::{query_width, DecompositionError, WidthKind, PATHWIDTH_CAP, TREEWIDTH_CAP};
use rpqwidth::evaluation::{
    evaluate_naive, evaluate_pathwidth, evaluate_treewidth, optimal_decomposition, EvalError, ResultSet, MATERIALIZATION_CAP,
};
use rpqwidth::graphdb::load_db;
use rpqwidth::query_model::{enumerate_expansions, enumerate_refinements, is_sre, parse_union, render_query, render_union, Uc2rpq};
use rpqwidth::semantics::{contained_bounded, decide_semantic_width, sre_word_bound, SemanticsError, Verdict};
use rpqwidth::DecompositionKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CAP: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "rpqwidth", version, about = "Width analysis, approximation and evaluation of UC2RPQs")]
pub struct Cli {
    /// Render the report as JSON.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads for enumeration-heavy commands (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Exact widths of every disjunct.
    Width {
        /// Query file, or `-` for stdin.
        query: String,
    },
    /// Union of width-bounded homomorphic images of bounded refinements.
    Approx {
        query: String,
        #[command(flatten)]
        class: ClassArgs,
        /// Refinement length [default: min(completeness bound, 3)].
        #[arg(long)]
        m: Option<usize>,
        /// Keep only hom-maximal disjuncts.
        #[arg(long)]
        minimize: bool,
        /// Write the union here and the provenance to `<out>.prov`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        limits: LimitArgs,
    },
    /// Bounded decision of semantic width.
    Decide {
        query: String,
        #[command(flatten)]
        class: ClassArgs,
        /// Refinement length [default: min(completeness bound, 3)].
        #[arg(long)]
        m: Option<usize>,
        /// Per-atom word length for counterexample search [default: max(8, SRE bound)].
        #[arg(long)]
        word_bound: Option<usize>,
        /// Use the one-way contracted variant of the class.
        #[arg(long)]
        one_way: bool,
        #[command(flatten)]
        limits: LimitArgs,
    },
    /// Evaluate a query on a graph database.
    Eval {
        query: String,
        db: String,
        #[arg(long, value_enum, default_value_t = Mode::Naive)]
        mode: Mode,
        /// Largest decomposition width accepted by the tw and pw engines.
        #[arg(long, default_value_t = 3)]
        k_cap: usize,
        /// Largest bag relation the tw engine may materialize.
        #[arg(long, default_value_t = MATERIALIZATION_CAP)]
        cell_cap: u128,
    },
    /// Bounded containment of the first query in the second.
    Contain {
        left: String,
        right: String,
        #[arg(long, default_value_t = 8)]
        word_bound: usize,
    },
    /// List expansions with per-atom word length at most `--bound`.
    Expand {
        query: String,
        #[arg(long, default_value_t = 2)]
        bound: usize,
        /// Most queries printed.
        #[arg(long, default_value_t = 1000)]
        limit: usize,
    },
    /// List refinements of length at most `--m`.
    Refine {
        query: String,
        #[arg(long, default_value_t = 2)]
        m: usize,
        /// Most queries printed.
        #[arg(long, default_value_t = 1000)]
        limit: usize,
    },
}

#[derive(Args, Debug, Clone)]
pub struct ClassArgs {
    /// Width measure.
    #[arg(long, value_enum, default_value_t = Kind::Tw)]
    pub class: Kind,
    /// Width bound.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
}

#[derive(Args, Debug, Clone)]
pub struct LimitArgs {
    /// Most refinements enumerated per split disjunct.
    #[arg(long, default_value_t = ApproxLimits::default().max_refinements)]
    pub max_refinements: usize,
    /// Most non-isomorphic images kept.
    #[arg(long, default_value_t = ApproxLimits::default().max_images)]
    pub max_images: usize,
}

impl LimitArgs {
    fn limits(&self) -> ApproxLimits {
        ApproxLimits { max_refinements: self.max_refinements, max_images: self.max_images }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Tw,
    Pw,
    Ctw,
    Cpw,
    Ctw1,
    Cpw1,
}

impl Kind {
    fn width_kind(self, one_way: bool) -> WidthKind {
        match (self, one_way) {
            (Kind::Tw, false) => WidthKind::TreeWidth,
            (Kind::Pw, false) => WidthKind::PathWidth,
            (Kind::Ctw, false) => WidthKind::ContractedTreeWidth,
            (Kind::Cpw, false) => WidthKind::ContractedPathWidth,
            (Kind::Tw | Kind::Ctw | Kind::Ctw1, _) => WidthKind::OneWayContractedTreeWidth,
            (Kind::Pw | Kind::Cpw | Kind::Cpw1, _) => WidthKind::OneWayContractedPathWidth,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Naive,
    Tw,
    Pw,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("cap exceeded: {0}")]
    Cap(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse(_) => EXIT_USAGE,
            CliError::Cap(_) => EXIT_CAP,
        }
    }
}

impl From<DecompositionError> for CliError {
    fn from(e: DecompositionError) -> Self {
        match e {
            DecompositionError::TooLarge { .. } => CliError::Cap(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<ApproxError> for CliError {
    fn from(e: ApproxError) -> Self {
        match e {
            ApproxError::Width(w) => w.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<SemanticsError> for CliError {
    fn from(e: SemanticsError) -> Self {
        match e {
            SemanticsError::Approx(a) => a.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Decomposition(d) => d.into(),
            EvalError::TooLarge { .. } => CliError::Cap(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

/// A named input and the SHA-256 of its bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

/// The outcome of one command.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub command: String,
    pub inputs: Vec<InputDigest>,
    /// Every cap in force, with its value.
    pub caps: Vec<(String, Value)>,
    /// Caps that cut the computation short.
    pub caps_hit: Vec<String>,
    /// Ordered result facts.
    pub facts: Vec<(String, Value)>,
}

impl Report {
    fn new(command: String) -> Report {
        Report { command, inputs: Vec::new(), caps: Vec::new(), caps_hit: Vec::new(), facts: Vec::new() }
    }

    fn cap(&mut self, name: &str, v: impl Into<Value>) {
        self.caps.push((name.to_string(), v.into()));
    }

    fn fact(&mut self, name: &str, v: impl Into<Value>) {
        self.facts.push((name.to_string(), v.into()));
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.facts.iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }

    pub fn exit_code(&self) -> i32 {
        if self.caps_hit.is_empty() {
            EXIT_OK
        } else {
            EXIT_CAP
        }
    }

    pub fn to_json(&self) -> Value {
        let obj = |pairs: &[(String, Value)]| Value::Object(pairs.iter().cloned().collect::<Map<_, _>>());
        json!({
            "command": self.command,
            "inputs": self.inputs.iter().map(|i| json!({"name": i.name, "sha256": i.sha256})).collect::<Vec<_>>(),
            "caps": obj(&self.caps),
            "caps_hit": self.caps_hit,
            "result": obj(&self.facts),
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("command: {}\n", self.command);
        for i in &self.inputs {
            out.push_str(&format!("input: {} sha256={}\n", i.name, i.sha256));
        }
        let caps: Vec<String> = self.caps.iter().map(|(k, v)| format!("{k}={}", inline(v))).collect();
        out.push_str(&format!("caps: {}\n", caps.join(" ")));
        let hit = if self.caps_hit.is_empty() { "none".to_string() } else { self.caps_hit.join(", ") };
        out.push_str(&format!("caps_hit: {hit}\n"));
        for (k, v) in &self.facts {
            match v {
                Value::Array(items) => {
                    out.push_str(&format!("{k}: {} item(s)\n", items.len()));
                    for item in items {
                        for (n, line) in inline(item).lines().enumerate() {
                            let lead = if n == 0 { "  - " } else { "    " };
                            out.push_str(&format!("{lead}{line}\n"));
                        }
                    }
                }
                Value::String(s) if s.contains('\n') => {
                    out.push_str(&format!("{k}:\n"));
                    for line in s.lines() {
                        out.push_str(&format!("  {line}\n"));
                    }
                }
                _ => out.push_str(&format!("{k}: {}\n", inline(v))),
            }
        }
        out
    }

    pub fn render(&self, json: bool) -> String {
        if json {
            serde_json::to_string_pretty(&self.to_json()).expect("report serializes") + "\n"
        } else {
            self.to_text()
        }
    }
}

fn inline(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "null".into(),
        Value::Object(m) => m.iter().map(|(k, v)| format!("{k}={}", inline(v))).collect::<Vec<_>>().join(" "),
        Value::Array(a) => format!("[{}]", a.iter().map(inline).collect::<Vec<_>>().join(", ")),
        other => other.to_string(),
    }
}

struct Inputs {
    stdin_used: bool,
}

impl Inputs {
    fn read(&mut self, name: &str, report: &mut Report) -> Result<String, CliError> {
        let text = if name == "-" {
            if self.stdin_used {
                return Err(CliError::Usage("stdin can be read only once".into()));
            }
            self.stdin_used = true;
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(|e| CliError::Usage(format!("stdin: {e}")))?;
            s
        } else {
            std::fs::read_to_string(name).map_err(|e| CliError::Usage(format!("{name}: {e}")))?
        };
        let sha256 = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
        report.inputs.push(InputDigest { name: name.to_string(), sha256 });
        Ok(text)
    }

    fn query(&mut self, name: &str, report: &mut Report) -> Result<Uc2rpq, CliError> {
        let text = self.read(name, report)?;
        parse_union(&text).map_err(|e| CliError::Parse(format!("{name}: {e}")))
    }
}

fn verdict_facts(report: &mut Report, v: &Verdict) {
    report.fact("verdict", v.label());
    report.fact("exact", v.exact);
    if let Some(w) = &v.witness {
        report.fact("witness", render_query(&w.query));
        let words: Vec<Value> = w.words.iter().map(|w| rpqwidth::automata::word_to_string(w).into()).collect();
        report.fact("witness_words", words);
    }
    report.fact("notes", v.notes.iter().cloned().map(Value::from).collect::<Vec<_>>());
}

fn default_m(gamma: &Uc2rpq, cls: WidthClass) -> usize {
    let ell = union_bound(gamma, cls);
    let ell = usize::try_from(ell).unwrap_or(usize::MAX);
    ell.clamp(1, 3)
}

fn tuple_text(t: &[String]) -> String {
    format!("({})", t.join(", "))
}

fn result_facts(report: &mut Report, r: &ResultSet) {
    report.fact("arity", r.arity);
    if r.arity == 0 {
        report.fact("satisfied", if r.is_empty() { "UNSAT" } else { "SAT" });
    }
    report.fact("count", r.len());
    report.fact("tuples", r.tuples.iter().map(|t| Value::from(tuple_text(t))).collect::<Vec<_>>());
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli, echo: String) -> Result<Report, CliError> {
    let mut report = Report::new(echo);
    let mut inputs = Inputs { stdin_used: false };
    report.cap("jobs", rayon::current_num_threads());
    match &cli.command {
        Command::Width { query } => {
            let gamma = inputs.query(query, &mut report)?;
            report.cap("treewidth_vertices", TREEWIDTH_CAP);
            report.cap("pathwidth_vertices", PATHWIDTH_CAP);
            let mut rows = Vec::new();
            for d in &gamma.disjuncts {
                let mut row = Map::new();
                row.insert("name".into(), d.name.clone().into());
                row.insert("atoms".into(), d.num_atoms().into());
                for kind in WidthKind::ALL {
                    let v = match query_width(d, kind) {
                        Ok(w) => Value::from(w),
                        Err(DecompositionError::TooLarge { .. }) => {
                            let hit = format!("{} of {}", kind.name(), d.name);
                            report.caps_hit.push(hit);
                            Value::from("unknown: cap")
                        }
                        Err(e) => return Err(e.into()),
                    };
                    row.insert(kind.name().into(), v);
                }
                rows.push(Value::Object(row));
            }
            report.fact("disjuncts", rows);
        }
        Command::Approx { query, class, m, minimize, out, limits } => {
            let gamma = inputs.query(query, &mut report)?;
            let cls = WidthClass::new(class.class.width_kind(false), class.k)?;
            let m = m.unwrap_or_else(|| default_m(&gamma, cls));
            let limits = limits.limits();
            report.cap("m", m);
            report.cap("max_refinements", limits.max_refinements);
            report.cap("max_images", limits.max_images);
            let app = mua_hom_bounded(&gamma, cls, m, limits)?;
            if !app.exhaustive {
                report.caps_hit.push("max_refinements or max_images".into());
            }
            report.fact("class", cls.to_string());
            report.fact("m", m);
            report.fact("completeness_bound", union_bound(&gamma, cls).to_string());
            report.fact("complete", app.complete);
            report.fact("exhaustive", app.exhaustive);
            let stamp = if app.complete && app.exhaustive { "EXHAUSTIVE" } else { "BOUNDED" };
            report.fact("stamp", stamp);
            report.fact("refinements", app.stats.refinements);
            report.fact("images", app.stats.images);
            report.fact("admitted", app.stats.admitted);
            report.fact("disjuncts", app.union.disjuncts.len());
            let mut provenance = app.provenance();
            let union = if *minimize {
                let min = minimize_union(&app.union);
                let keep: std::collections::BTreeSet<&str> = min.disjuncts.iter().map(|d| d.name.as_str()).collect();
                provenance = app
                    .union
                    .disjuncts
                    .iter()
                    .zip(provenance)
                    .filter(|(d, _)| keep.contains(d.name.as_str()))
                    .map(|(_, p)| p)
                    .collect();
                report.fact("minimized_disjuncts", min.disjuncts.len());
                min
            } else {
                app.union.clone()
            };
            let mut text = format!("# {stamp} {cls} m={m}\n");
            text.push_str(&render_union(&union));
            text.push('\n');
            match out {
                Some(path) => {
                    let prov = path.with_extension(match path.extension() {
                        Some(e) => format!("{}.prov", e.to_string_lossy()),
                        None => "prov".into(),
                    });
                    let write = |p: &PathBuf, body: String| {
                        std::fs::write(p, body).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
                    };
                    write(path, text)?;
                    write(&prov, provenance.join("\n") + "\n")?;
                    report.fact("output", path.display().to_string());
                    report.fact("provenance_file", prov.display().to_string());
                }
                None => {
                    report.fact("query", text);
                    report.fact("provenance", provenance.into_iter().map(Value::from).collect::<Vec<_>>());
                }
            }
        }
        Command::Decide { query, class, m, word_bound, one_way, limits } => {
            let gamma = inputs.query(query, &mut report)?;
            let cls = WidthClass::new(class.class.width_kind(*one_way), class.k)?;
            let m = m.unwrap_or_else(|| default_m(&gamma, cls));
            let sre = if is_sre(&gamma) { gamma.disjuncts.iter().map(sre_word_bound).max().unwrap_or(0) } else { 0 };
            let word_bound = word_bound.unwrap_or(sre.max(8));
            let limits = limits.limits();
            report.cap("m", m);
            report.cap("word_bound", word_bound);
            report.cap("max_refinements", limits.max_refinements);
            report.cap("max_images", limits.max_images);
            let d = decide_semantic_width(&gamma, cls, m, word_bound, limits)?;
            if !d.approximation.exhaustive {
                report.caps_hit.push("max_refinements or max_images".into());
            }
            report.fact("requested_class", d.requested.to_string());
            report.fact("class", d.class.to_string());
            report.fact("approximation_disjuncts", d.approximation.union.disjuncts.len());
            report.fact("approximation_complete", d.approximation.complete);
            report.fact("approximation_exhaustive", d.approximation.exhaustive);
            report.fact("exact_vs_approximation", d.exact_vs_approximation);
            report.fact("exact_vs_semantic_width", d.exact_vs_semantic_width);
            verdict_facts(&mut report, &d.verdict);
        }
        Command::Eval { query, db, mode, k_cap, cell_cap } => {
            let gamma = inputs.query(query, &mut report)?;
            let text = inputs.read(db, &mut report)?;
            let g = load_db(&text).map_err(|e| CliError::Parse(format!("{db}: {e}")))?;
            report.cap("k_cap", *k_cap);
            report.cap("cell_cap", cell_cap.to_string());
            report.fact("mode", format!("{mode:?}").to_lowercase());
            let result = match mode {
                Mode::Naive => evaluate_naive(&gamma, &g),
                Mode::Tw | Mode::Pw => {
                    let kind = if *mode == Mode::Tw { DecompositionKind::Tree } else { DecompositionKind::Path };
                    let mut all = ResultSet { arity: gamma.arity, ..Default::default() };
                    let mut widths = Vec::new();
                    let mut largest = 0usize;
                    for d in &gamma.disjuncts {
                        let (q, ttd) = optimal_decomposition(d, kind)?;
                        let w = ttd.dec.width();
                        if w > *k_cap {
                            return Err(CliError::Cap(format!("{} has width {w}, above --k-cap {k_cap}", d.name)));
                        }
                        widths.push(Value::from(w));
                        let (r, stats) = match kind {
                            DecompositionKind::Tree => evaluate_treewidth(&q, &g, &ttd, *cell_cap)?,
                            DecompositionKind::Path => evaluate_pathwidth(&q, &g, &ttd)?,
                        };
                        largest = largest.max(stats.max_relation);
                        all.tuples.extend(r.tuples);
                    }
                    report.fact("widths", widths);
                    report.fact("largest_relation", largest);
                    all
                }
            };
            result_facts(&mut report, &result);
        }
        Command::Contain { left, right, word_bound } => {
            let a = inputs.query(left, &mut report)?;
            let b = inputs.query(right, &mut report)?;
            report.cap("word_bound", *word_bound);
            let v = contained_bounded(&a, &b, *word_bound)?;
            verdict_facts(&mut report, &v);
        }
        Command::Expand { query, bound, limit } => {
            let gamma = inputs.query(query, &mut report)?;
            report.cap("bound", *bound);
            report.cap("limit", *limit);
            let mut out = Vec::new();
            'all: for d in &gamma.disjuncts {
                for e in enumerate_expansions(d, *bound) {
                    if out.len() == *limit {
                        report.caps_hit.push("limit".into());
                        break 'all;
                    }
                    out.push(Value::from(render_query(&e.query)));
                }
            }
            report.fact("count", out.len());
            report.fact("queries", out);
        }
        Command::Refine { query, m, limit } => {
            let gamma = inputs.query(query, &mut report)?;
            if *m == 0 {
                return Err(CliError::Usage("--m must be positive".into()));
            }
            report.cap("m", *m);
            report.cap("limit", *limit);
            let mut out = Vec::new();
            'all: for d in &gamma.disjuncts {
                let it = enumerate_refinements(d, *m);
                for i in 0..it.total() {
                    if out.len() == *limit {
                        report.caps_hit.push("limit".into());
                        break 'all;
                    }
                    let r = it.get(i).expect("index below total");
                    out.push(Value::from(render_query(&r.result)));
                }
            }
            report.fact("count", out.len());
            report.fact("queries", out);
        }
    }
    Ok(report)
}

/// Rendered output of one invocation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub output: String,
    pub code: i32,
    /// The output is an error message rather than a report.
    pub is_error: bool,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            return Outcome { output: e.render().to_string(), code, is_error: code != EXIT_OK };
        }
    };
    if cli.jobs > 0 {
        // the global pool can be built once per process; later calls keep it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global();
    }
    let echo = args.iter().map(|a| a.to_string_lossy().into_owned()).collect::<Vec<_>>().join(" ");
    match execute(&cli, echo) {
        Ok(r) => Outcome { output: r.render(cli.json), code: r.exit_code(), is_error: false },
        Err(e) => {
            let msg = if cli.json {
                serde_json::to_string_pretty(&json!({"error": e.to_string(), "exit_code": e.exit_code()})).expect("json") + "\n"
            } else {
                format!("error: {e}\n")
            };
            Outcome { output: msg, code: e.exit_code(), is_error: true }
        }
    }
}

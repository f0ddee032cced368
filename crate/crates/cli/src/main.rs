use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use reflspan_core::algebra::{
    core_to_refl_with, eval_core_capped, fuse_relation, parse_fusions, quasi_disjoint_normal_form,
    quasi_disjoint_normal_form_with, refl_to_core, rel_project, render_fusions, CoreExpr,
};
use reflspan_core::analysis::{contains_capped, equivalent, satisfiable_witness, spanner_functional, spanner_hierarchical};
use reflspan_core::classify::{classify, normalized_order, suggest_partition, Check, VariablePartition};
use reflspan_core::eval::{evaluate_capped, nonempty_capped, test_tuple_witness, TestMode, DEFAULT_MAX_CONFIGS};
use reflspan_core::nfa::{DEFAULT_MAX_STATES, DEFAULT_MAX_SUBSETS};
use reflspan_core::refx::parse_refx;
use reflspan_core::transform::normalize_capped;
use reflspan_core::word::render_word;
use reflspan_core::{demo, Error, Nfa, SpanTuple, ValidOrder};

#[derive(Parser)]
#[command(name = "reflspan", version, about = "Document spanners defined by regular ref-languages")]
struct Cli {
    /// Print structured JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Cap on configurations explored during evaluation.
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_CONFIGS)]
    max_configs: usize,
    /// Cap on states (or subsets) built by automaton constructions.
    #[arg(long, global = true)]
    max_states: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Well-formedness and property report.
    Classify {
        #[arg(short, long)]
        spanner: PathBuf,
        /// Comma-separated properties that must hold (exit 1 otherwise).
        #[arg(long, value_delimiter = ',')]
        require: Vec<String>,
    },
    /// Normalize marker blocks for a valid order.
    Normalize {
        #[arg(short, long)]
        spanner: PathBuf,
        /// `x,y,z` or an explicit marker list such as `<x,<y,x>,y>`.
        #[arg(long)]
        order: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Evaluate a spanner (or a core expression) on a document.
    Eval {
        #[arg(short, long, required_unless_present = "expr")]
        spanner: Option<PathBuf>,
        #[arg(short, long, conflicts_with = "spanner")]
        expr: Option<PathBuf>,
        #[arg(short, long)]
        doc: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Tuples)]
        format: Format,
    },
    /// Decide whether a tuple belongs to the spanner's output.
    Test {
        #[arg(short, long)]
        spanner: PathBuf,
        #[arg(short, long)]
        doc: PathBuf,
        /// Tuple as JSON, e.g. '{"x":[1,3]}'.
        #[arg(short, long)]
        tuple: String,
        #[arg(long, value_enum, default_value_t = Mode::General)]
        mode: Mode,
        #[arg(long)]
        order: Option<String>,
    },
    /// Decide whether the output on a document is non-empty.
    Nonempty {
        #[arg(short, long)]
        spanner: PathBuf,
        #[arg(short, long)]
        doc: PathBuf,
    },
    /// Satisfiability.
    Sat {
        #[arg(short, long)]
        spanner: PathBuf,
    },
    /// Hierarchicality.
    Hier {
        #[arg(short, long)]
        spanner: PathBuf,
    },
    /// Functionality.
    Funct {
        #[arg(short, long)]
        spanner: PathBuf,
    },
    /// Containment of strongly reference extracting spanners.
    Contains(Pair),
    /// Equivalence of strongly reference extracting spanners.
    Equiv(Pair),
    /// Compilers between core spanners and refl-spanners.
    Compile {
        #[command(subcommand)]
        dir: CompileDir,
    },
    /// Quasi-disjoint normal form of a core expression.
    Qdnf {
        #[arg(short, long)]
        expr: PathBuf,
        #[arg(long)]
        width: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Evaluate a spanner and fuse columns, e.g. --fuse "x,y->u".
    Fuse {
        #[arg(short, long)]
        spanner: PathBuf,
        #[arg(short, long)]
        doc: PathBuf,
        #[arg(long)]
        fuse: String,
        #[arg(long, value_delimiter = ',')]
        project: Option<Vec<String>>,
    },
    /// Worked examples.
    Demo {
        #[command(subcommand)]
        which: DemoKind,
    },
}

#[derive(clap::Args)]
struct Pair {
    #[arg(short = 's', long)]
    left: PathBuf,
    #[arg(short = 'S', long)]
    right: PathBuf,
    /// Partition file with lines `ref x` and `extractor y of x`.
    #[arg(long)]
    partition: Option<PathBuf>,
    #[arg(long)]
    order: Option<String>,
}

#[derive(Subcommand)]
enum CompileDir {
    /// Core expression to refl-spanner plus fusion and projection.
    ToRefl {
        #[arg(short, long)]
        expr: PathBuf,
        /// Write the automaton here and print only fusion and projection.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Reference-bounded refl-spanner to core expression.
    ToCore {
        #[arg(short, long)]
        spanner: PathBuf,
        /// Write the configuration here (automaton next to it).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DemoKind {
    /// Repeat authors with Berlin addresses in a `#`-separated corpus.
    Email {
        #[arg(long)]
        doc: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tuples,
    Count,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    General,
    Functional,
    Normalized,
}

/// A usage problem found after argument parsing.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn read_text(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_spanner(path: &Path) -> Result<Nfa> {
    let text = read_text(path)?;
    let m = if path.extension().is_some_and(|e| e == "refx") {
        parse_refx(&text)?.compile()?
    } else {
        Nfa::from_file_str(&text)?
    };
    Ok(m)
}

fn load_expr(path: &Path) -> Result<CoreExpr> {
    let text = read_text(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(CoreExpr::from_config(&text, base)?)
}

/// Reads a document; a final line break is dropped unless it is a terminal.
fn load_doc(path: &Path, sigma: &[char]) -> Result<String> {
    let mut doc = read_text(path)?;
    if !sigma.contains(&'\n') {
        if doc.ends_with('\n') {
            doc.pop();
        }
        if doc.ends_with('\r') && !sigma.contains(&'\r') {
            doc.pop();
        }
    }
    Ok(doc)
}

fn parse_order(text: Option<&str>, m: &Nfa) -> Result<ValidOrder> {
    Ok(match text {
        Some(t) => ValidOrder::parse(t, m.alphabet())?,
        None => ValidOrder::default_for(m.num_vars()),
    })
}

struct Out {
    text: String,
    code: u8,
}

impl Out {
    fn ok(text: String) -> Out {
        Out { text, code: 0 }
    }

    fn verdict(holds: bool, text: String) -> Out {
        Out {
            text,
            code: if holds { 0 } else { 1 },
        }
    }
}

fn pretty(v: &Value) -> String {
    format!("{}\n", serde_json::to_string_pretty(v).expect("json"))
}

fn check_out(c: &Check, m: &Nfa, json: bool) -> Out {
    let text = if json {
        pretty(&json!({
            "holds": c.holds,
            "witness": c.witness.as_ref().map(|w| render_word(w, m.alphabet())),
            "reason": c.reason,
        }))
    } else {
        let mut s = format!("{}\n", c.holds);
        if let Some(d) = c.describe(m.alphabet()) {
            s.push_str(&d);
            s.push('\n');
        }
        s
    };
    Out::verdict(c.holds, text)
}

fn witness_text(holds: bool, w: Option<&(String, SpanTuple)>, vars: &[String]) -> String {
    let mut s = format!("{holds}\n");
    if let Some((doc, t)) = w {
        s.push_str(&format!("document: {doc}\ntuple: {}\n", t.render(vars)));
    }
    s
}

fn witness_json(key: &str, holds: bool, w: Option<&(String, SpanTuple)>, vars: &[String]) -> String {
    pretty(&json!({
        key: holds,
        "document": w.map(|(d, _)| d.clone()),
        "tuple": w.map(|(_, t)| t.to_json(vars)),
    }))
}

fn partition_for(p: Option<&Path>, m: &Nfa) -> Result<VariablePartition> {
    match p {
        Some(path) => Ok(VariablePartition::parse(&read_text(path)?)?),
        None => suggest_partition(m).ok_or_else(|| {
            Usage("no --partition given and none could be derived from the left spanner".into()).into()
        }),
    }
}

fn core_json(e: &CoreExpr) -> Value {
    let nfa: Value = serde_json::from_str(&e.nfa.to_file_string()).expect("automaton json");
    json!({
        "nfa": nfa,
        "select": e.select.iter().map(|c| c.iter().cloned().collect::<Vec<_>>()).collect::<Vec<_>>(),
        "fuse": render_fusions(&e.fuse),
        "project": e.project,
    })
}

/// Writes `e` as a configuration at `path` with its automaton beside it.
fn write_core(e: &CoreExpr, path: &Path) -> Result<String> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("core");
    let nfa_name = format!("{stem}.nfa.json");
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::write(dir.join(&nfa_name), e.nfa.to_file_string())?;
    let cfg = e.render_config(&nfa_name);
    fs::write(path, &cfg)?;
    Ok(cfg)
}

fn core_out(e: &CoreExpr, output: Option<&Path>, json: bool) -> Result<Out> {
    match output {
        Some(path) => {
            let cfg = write_core(e, path)?;
            Ok(Out::ok(if json { pretty(&json!({ "config": cfg })) } else { cfg }))
        }
        None => Ok(Out::ok(pretty(&core_json(e)))),
    }
}

fn run(cli: Cli) -> Result<Out> {
    let json = cli.json;
    let states = cli.max_states.unwrap_or(DEFAULT_MAX_STATES);
    match cli.cmd {
        Cmd::Classify { spanner, require } => {
            let m = load_spanner(&spanner)?;
            let r = classify(&m)?;
            let text = if json { pretty(&r.to_json(m.alphabet())) } else { r.render(m.alphabet()) };
            if !r.is_ref_language {
                return Ok(Out { text, code: 3 });
            }
            let mut holds = true;
            for p in &require {
                match r.property(p) {
                    Some(b) => holds &= b,
                    None => bail!(Usage(format!("unknown property {p:?}"))),
                }
            }
            Ok(Out::verdict(holds, text))
        }
        Cmd::Normalize { spanner, order, output } => {
            let m = load_spanner(&spanner)?;
            let ord = parse_order(order.as_deref(), &m)?;
            let n = normalize_capped(&m, &ord, states)?;
            let body = n.to_file_string();
            match output {
                Some(p) => {
                    fs::write(&p, &body)?;
                    Ok(Out::ok(String::new()))
                }
                None => Ok(Out::ok(body)),
            }
        }
        Cmd::Eval { spanner, expr, doc, format } => {
            let rel = match (spanner, expr) {
                (Some(s), _) => {
                    let m = load_spanner(&s)?;
                    let d = load_doc(&doc, &m.alphabet().sigma)?;
                    evaluate_capped(&m, &d, cli.max_configs)?
                }
                (None, Some(e)) => {
                    let e = load_expr(&e)?;
                    let d = load_doc(&doc, &e.nfa.alphabet().sigma)?;
                    eval_core_capped(&e, &d, cli.max_configs)?
                }
                (None, None) => bail!(Usage("eval needs --spanner or --expr".into())),
            };
            let text = match (format, json) {
                (Format::Tuples, false) => rel.render(),
                (Format::Tuples, true) => pretty(&rel.to_json()),
                (Format::Count, false) => format!("{}\n", rel.len()),
                (Format::Count, true) => pretty(&json!({ "count": rel.len() })),
            };
            Ok(Out::ok(text))
        }
        Cmd::Test { spanner, doc, tuple, mode, order } => {
            let m = load_spanner(&spanner)?;
            let d = load_doc(&doc, &m.alphabet().sigma)?;
            let t = SpanTuple::parse_json(&tuple)?;
            let mode = match mode {
                Mode::General => TestMode::General,
                Mode::Functional => TestMode::Functional,
                Mode::Normalized => TestMode::Normalized(match order {
                    Some(o) => ValidOrder::parse(&o, m.alphabet())?,
                    None => normalized_order(&m)
                        .ok_or_else(|| Error::Precondition("the language is not normalized for any order".into()))?,
                }),
            };
            let w = test_tuple_witness(&m, &d, &t, &mode)?;
            let text = if json {
                pretty(&json!({
                    "member": w.is_some(),
                    "witness": w.as_ref().map(|v| render_word(v, m.alphabet())),
                }))
            } else {
                let mut s = format!("{}\n", w.is_some());
                if let Some(v) = &w {
                    s.push_str(&format!("witness: {}\n", render_word(v, m.alphabet())));
                }
                s
            };
            Ok(Out::verdict(w.is_some(), text))
        }
        Cmd::Nonempty { spanner, doc } => {
            let m = load_spanner(&spanner)?;
            let d = load_doc(&doc, &m.alphabet().sigma)?;
            let b = nonempty_capped(&m, &d, cli.max_configs)?;
            let text = if json { pretty(&json!({ "nonempty": b })) } else { format!("{b}\n") };
            Ok(Out::verdict(b, text))
        }
        Cmd::Sat { spanner } => {
            let m = load_spanner(&spanner)?;
            let w = satisfiable_witness(&m)?;
            let text = if json {
                witness_json("satisfiable", w.is_some(), w.as_ref(), m.vars())
            } else {
                witness_text(w.is_some(), w.as_ref(), m.vars())
            };
            Ok(Out::verdict(w.is_some(), text))
        }
        Cmd::Hier { spanner } => {
            let m = load_spanner(&spanner)?;
            Ok(check_out(&spanner_hierarchical(&m)?, &m, json))
        }
        Cmd::Funct { spanner } => {
            let m = load_spanner(&spanner)?;
            Ok(check_out(&spanner_functional(&m)?, &m, json))
        }
        Cmd::Contains(p) => {
            let m1 = load_spanner(&p.left)?;
            let m2 = load_spanner(&p.right)?;
            let part = partition_for(p.partition.as_deref(), &m1)?;
            let ord = parse_order(p.order.as_deref(), &m1)?;
            let cap = cli.max_states.unwrap_or(DEFAULT_MAX_SUBSETS);
            let c = contains_capped(&m1, &m2, &part, &ord, cap)?;
            let text = if json {
                witness_json("contained", c.holds, c.witness.as_ref(), m1.vars())
            } else {
                witness_text(c.holds, c.witness.as_ref(), m1.vars())
            };
            Ok(Out::verdict(c.holds, text))
        }
        Cmd::Equiv(p) => {
            let m1 = load_spanner(&p.left)?;
            let m2 = load_spanner(&p.right)?;
            let part = partition_for(p.partition.as_deref(), &m1)?;
            let ord = parse_order(p.order.as_deref(), &m1)?;
            let (eq, w) = equivalent(&m1, &m2, &part, &ord)?;
            let text = if json {
                pretty(&json!({
                    "equivalent": eq,
                    "only_in": w.as_ref().map(|(left, _, _)| if *left { "left" } else { "right" }),
                    "document": w.as_ref().map(|(_, d, _)| d.clone()),
                    "tuple": w.as_ref().map(|(_, _, t)| t.to_json(m1.vars())),
                }))
            } else {
                let mut s = format!("{eq}\n");
                if let Some((left, d, t)) = &w {
                    let side = if *left { "left" } else { "right" };
                    s.push_str(&format!("only in {side}: document: {d}\ntuple: {}\n", t.render(m1.vars())));
                }
                s
            };
            Ok(Out::verdict(eq, text))
        }
        Cmd::Compile { dir: CompileDir::ToRefl { expr, output } } => {
            let e = load_expr(&expr)?;
            let f = core_to_refl_with(&e, states)?;
            let fuse = render_fusions(&f.fuse);
            match output {
                Some(path) => {
                    fs::write(&path, f.nfa.to_file_string())?;
                    let text = if json {
                        pretty(&json!({ "fuse": fuse, "project": f.project }))
                    } else {
                        format!("fuse={fuse}\nproject={}\n", f.project.join(","))
                    };
                    Ok(Out::ok(text))
                }
                None => {
                    let nfa: Value = serde_json::from_str(&f.nfa.to_file_string())?;
                    Ok(Out::ok(pretty(&json!({ "nfa": nfa, "fuse": fuse, "project": f.project }))))
                }
            }
        }
        Cmd::Compile { dir: CompileDir::ToCore { spanner, output } } => {
            let m = load_spanner(&spanner)?;
            let e = refl_to_core(&m)?;
            core_out(&e, output.as_deref(), json)
        }
        Cmd::Qdnf { expr, width, output } => {
            let e = load_expr(&expr)?;
            let q = match width {
                Some(w) => quasi_disjoint_normal_form_with(&e, w)?,
                None => quasi_disjoint_normal_form(&e)?,
            };
            core_out(&q, output.as_deref(), json)
        }
        Cmd::Fuse { spanner, doc, fuse, project } => {
            let m = load_spanner(&spanner)?;
            let d = load_doc(&doc, &m.alphabet().sigma)?;
            let plan = parse_fusions(&fuse)?;
            let mut rel = fuse_relation(&evaluate_capped(&m, &d, cli.max_configs)?, &plan)?;
            if let Some(keep) = project {
                rel = rel_project(&rel, &keep);
            }
            Ok(Out::ok(if json { pretty(&rel.to_json()) } else { rel.render() }))
        }
        Cmd::Demo { which: DemoKind::Email { doc } } => {
            let text = match doc {
                Some(p) => load_doc(&p, &demo::email_sigma())?,
                None => demo::SAMPLE_CORPUS.to_string(),
            };
            let names = demo::repeat_authors(&text)?;
            Ok(Out::ok(if json {
                pretty(&json!(names))
            } else {
                names.iter().map(|n| format!("{n}\n")).collect()
            }))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Usage>().is_some() || e.downcast_ref::<std::io::Error>().is_some() {
        return 2;
    }
    match e.downcast_ref::<Error>() {
        Some(Error::Resource(_)) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{}", out.text);
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

//! `omq`: command-line access to classification, chase, rewriting,
//! evaluation, containment and distribution.
//!
//! Exit codes: 0 for success and positive verdicts, 1 for negative
//! verdicts, 2 for errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use omq_core::apps::{distributes, distribution_counterexample, DisjunctWitness};
use omq_core::chase::{chase, chase_nr};
use omq_core::classify::classify;
use omq_core::contain::{brute_force_contains, contains, exact_oracle_bounds, is_unsatisfiable, Counterexample};
use omq_core::eval::{certain_answers, eval_membership, Strategy};
use omq_core::parser::{format_atom, format_constant, format_cq, format_facts, format_tgd, parse_program, serialize_omq, Program};
use omq_core::rewrite::{xrewrite_with, RewriteOptions, DEFAULT_BUDGET};
use omq_core::testkit::{random_omq, sticky_family, GeneratorConfig, TargetClass};
use omq_core::{Constant, Cq, Database, Omq, Tgd};
use serde_json::{json, Value};

const VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "omq", version, about = "Reasoning about ontology-mediated queries over tgds")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct BudgetArg {
    /// Maximum number of rewriting steps.
    #[arg(long, env = "OMQ_BUDGET", default_value_t = DEFAULT_BUDGET)]
    budget: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Auto,
    Chase,
    Rewriting,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Auto => Strategy::Auto,
            StrategyArg::Chase => Strategy::Chase,
            StrategyArg::Rewriting => Strategy::Rewriting,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Report the syntactic classes of a tgd set (always exits 0).
    Classify {
        program: PathBuf,
        /// Classify one tgd block instead of every tgd of the program.
        #[arg(long)]
        tgds: Option<String>,
    },
    /// Chase a database of the program (exit 1 if the result is incomplete).
    Chase {
        program: PathBuf,
        database: String,
        /// Tgd block to chase with; defaults to every tgd.
        #[arg(long)]
        tgds: Option<String>,
        /// Stop after this many levels when the tgds are recursive.
        #[arg(long)]
        max_level: Option<usize>,
        /// Fail unless the tgds are non-recursive.
        #[arg(long)]
        require_termination: bool,
    },
    /// Compute the UCQ rewriting of a query.
    Rewrite {
        program: PathBuf,
        query: String,
        #[command(flatten)]
        budget: BudgetArg,
        /// Emit every rewriting and factorization step as a JSON line.
        #[arg(long)]
        trace: bool,
    },
    /// Certain answers, or membership of one tuple (exit 1 if not a member).
    Eval {
        program: PathBuf,
        query: String,
        database: String,
        /// Comma-separated constants; an empty string is the empty tuple.
        #[arg(long)]
        tuple: Option<String>,
        #[arg(long, value_enum, default_value_t = StrategyArg::Auto)]
        strategy: StrategyArg,
    },
    /// Decide Q1 ⊆ Q2 (exit 1 if not contained).
    Contains {
        program: PathBuf,
        left: String,
        right: String,
        #[command(flatten)]
        budget: BudgetArg,
        /// Cross-check against exhaustive enumeration of small databases.
        #[arg(long)]
        oracle: bool,
        /// Oracle constants; defaults to the least exact bound.
        #[arg(long, requires = "oracle")]
        max_constants: Option<usize>,
        /// Oracle database size; defaults to the least exact bound.
        #[arg(long, requires = "oracle")]
        max_atoms: Option<usize>,
    },
    /// Decide distribution over components (exit 1 if it does not distribute).
    Distributes {
        program: PathBuf,
        query: String,
        #[command(flatten)]
        budget: BudgetArg,
        /// Cross-check on every small database.
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value_t = 3, requires = "verify")]
        max_constants: usize,
        #[arg(long, default_value_t = 4, requires = "verify")]
        max_atoms: usize,
    },
    /// Decide unsatisfiability (exit 0 if unsatisfiable, 1 if satisfiable).
    Unsat {
        program: PathBuf,
        query: String,
        #[command(flatten)]
        budget: BudgetArg,
    },
    /// Generate a program.
    Gen {
        /// The sticky lower-bound family, e.g. `sticky-3`.
        #[arg(long, conflicts_with = "random")]
        family: Option<String>,
        /// A random OMQ.
        #[arg(long, requires = "seed")]
        random: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Target class: L, NR, S, F or any.
        #[arg(long, default_value = "any")]
        class: TargetClass,
    },
}

/// The result of a command: an exit code, a JSON object and its text form.
struct Report {
    code: u8,
    json: Value,
    text: String,
}

impl Report {
    fn ok(json: Value, text: String) -> Self {
        Report { code: 0, json, text }
    }

    fn verdict(positive: bool, json: Value, text: String) -> Self {
        Report {
            code: if positive { 0 } else { 1 },
            json,
            text,
        }
    }
}

fn load(path: &Path) -> Result<Program> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_program(&text).map_err(|e| anyhow!("{}:{e}", path.display()))
}

fn omq_of(p: &Program, name: &str) -> Result<Omq> {
    Ok(p.omq(name)?)
}

fn database_of<'a>(p: &'a Program, name: &str) -> Result<&'a Database> {
    p.database(name).ok_or_else(|| anyhow!("no database named {name}"))
}

fn tgds_of(p: &Program, block: Option<&str>) -> Result<Vec<Tgd>> {
    match block {
        None => Ok(p.tgds()),
        Some(b) => Ok(p.tgd_block(b).ok_or_else(|| anyhow!("no tgd block named {b}"))?.to_vec()),
    }
}

fn parse_tuple(s: &str) -> Vec<Constant> {
    if s.trim().is_empty() {
        return Vec::new();
    }
    s.split(',').map(|c| Constant::new(c.trim().trim_matches('"'))).collect()
}

fn tuple_json(t: &[Constant]) -> Value {
    t.iter().map(|c| Value::String(c.name().to_string())).collect()
}

fn tuple_text(t: &[Constant]) -> String {
    let parts: Vec<String> = t.iter().map(format_constant).collect();
    format!("({})", parts.join(", "))
}

fn disjuncts(cqs: &[Cq]) -> Vec<String> {
    cqs.iter().map(|q| format_cq("q", q)).collect()
}

fn counterexample_json(cx: &Counterexample) -> Value {
    json!({
        "database": format_facts(cx.database.iter()),
        "tuple": tuple_json(&cx.tuple),
    })
}

fn run_classify(program: &Path, block: Option<&str>) -> Result<Report> {
    let p = load(program)?;
    let tgds = tgds_of(&p, block)?;
    let r = classify(&tgds);
    let json = json!({
        "tgds": tgds.len(),
        "flags": {
            "linear": r.linear,
            "guarded": r.guarded,
            "nonRecursive": r.non_recursive,
            "sticky": r.sticky,
            "full": r.full,
            "factFree": r.fact_free,
            "constantFree": r.constant_free,
            "ucqRewritable": r.ucq_rewritable,
        },
        "witnesses": serde_json::to_value(&r.witnesses)?,
    });
    let text = [
        ("linear", r.linear),
        ("guarded", r.guarded),
        ("non-recursive", r.non_recursive),
        ("sticky", r.sticky),
        ("full", r.full),
        ("fact-free", r.fact_free),
        ("constant-free", r.constant_free),
        ("ucq-rewritable", r.ucq_rewritable),
    ]
    .iter()
    .map(|(k, v)| format!("{k}: {v}"))
    .collect::<Vec<_>>()
    .join("\n");
    Ok(Report::ok(json, text))
}

fn run_chase(
    program: &Path,
    database: &str,
    block: Option<&str>,
    max_level: Option<usize>,
    require_termination: bool,
) -> Result<Report> {
    let p = load(program)?;
    let tgds = tgds_of(&p, block)?;
    let d = database_of(&p, database)?;
    let r = if require_termination {
        chase_nr(d, &tgds)?
    } else {
        chase(d, &tgds, max_level)
    };
    let facts = format_facts(r.instance.iter());
    let json = json!({
        "instance": facts,
        "atoms": r.instance.len(),
        "steps": r.steps,
        "complete": r.complete,
        "maxLevel": r.max_level(),
    });
    Ok(Report::verdict(r.complete, json, facts))
}

fn run_rewrite(program: &Path, query: &str, budget: usize, trace: bool) -> Result<Report> {
    let p = load(program)?;
    let omq = omq_of(&p, query)?;
    let r = xrewrite_with(&omq, RewriteOptions { budget, trace })?;
    if trace {
        for step in &r.trace {
            let line = json!({
                "version": VERSION,
                "step": step.kind,
                "from": format_cq("q", &r.queries[step.from].cq),
                "atoms": step.atoms.iter().map(format_atom).collect::<Vec<_>>(),
                "tgd": format_tgd(&r.tgds[step.tgd]),
                "result": format_cq("q", &step.result),
                "added": step.added.is_some(),
            });
            emit(&line.to_string());
        }
    }
    let ds = disjuncts(r.ucq.disjuncts());
    let json = json!({
        "disjuncts": ds,
        "steps": r.steps,
        "generated": r.generated,
        "terminationGuaranteed": r.termination_guaranteed,
    });
    Ok(Report::ok(json, ds.join("\n")))
}

fn run_eval(
    program: &Path,
    query: &str,
    database: &str,
    tuple: Option<&str>,
    strategy: Strategy,
) -> Result<Report> {
    let p = load(program)?;
    let omq = omq_of(&p, query)?;
    let d = database_of(&p, database)?;
    match tuple {
        Some(t) => {
            let t = parse_tuple(t);
            if t.len() != omq.arity() {
                bail!("query {query} has arity {} but the tuple has {} constants", omq.arity(), t.len());
            }
            let holds = match strategy {
                Strategy::Auto => eval_membership(&omq, d, &t)?,
                s => certain_answers(&omq, d, s)?.contains(&t),
            };
            let json = json!({ "tuple": tuple_json(&t), "holds": holds });
            Ok(Report::verdict(holds, json, holds.to_string()))
        }
        None => {
            let answers = certain_answers(&omq, d, strategy)?;
            let json = json!({
                "arity": omq.arity(),
                "answers": answers.iter().map(|t| tuple_json(t)).collect::<Vec<_>>(),
            });
            let text = answers.iter().map(|t| tuple_text(t)).collect::<Vec<_>>().join("\n");
            Ok(Report::ok(json, text))
        }
    }
}

fn run_contains(
    program: &Path,
    left: &str,
    right: &str,
    budget: usize,
    oracle: bool,
    max_constants: Option<usize>,
    max_atoms: Option<usize>,
) -> Result<Report> {
    let p = load(program)?;
    let q1 = omq_of(&p, left)?;
    let q2 = omq_of(&p, right)?;
    let v = contains(&q1, &q2, budget)?;
    let mut json = json!({
        "contained": v.contained,
        "counterexample": v.counterexample.as_ref().map(counterexample_json),
    });
    let mut text = if v.contained {
        format!("{left} is contained in {right}")
    } else {
        format!("{left} is not contained in {right}")
    };
    if let Some(cx) = &v.counterexample {
        text.push_str(&format!("\ncounterexample tuple {}:\n{}", tuple_text(&cx.tuple), format_facts(cx.database.iter())));
    }
    if oracle {
        let (k, m) = exact_oracle_bounds(&q1, &q2)?;
        let k = max_constants.unwrap_or(k);
        let m = max_atoms.unwrap_or(m);
        let b = brute_force_contains(&q1, &q2, k, m)?;
        let agrees = b.verdict.contained == v.contained;
        json["oracleAgrees"] = json!(agrees);
        json["oracle"] = json!({
            "contained": b.verdict.contained,
            "exact": b.exact,
            "maxConstants": k,
            "maxAtoms": m,
            "databasesChecked": b.databases_checked,
            "counterexample": b.verdict.counterexample.as_ref().map(counterexample_json),
        });
        text.push_str(&format!(
            "\noracle ({} databases, {} constants, up to {} atoms, exact: {}): {}",
            b.databases_checked,
            k,
            m,
            b.exact,
            if agrees { "agrees" } else { "disagrees" }
        ));
        if !agrees {
            return Err(anyhow!("containment and oracle disagree\n{text}"));
        }
    }
    Ok(Report::verdict(v.contained, json, text))
}

fn run_distributes(
    program: &Path,
    query: &str,
    budget: usize,
    verify: bool,
    max_constants: usize,
    max_atoms: usize,
) -> Result<Report> {
    let p = load(program)?;
    let omq = omq_of(&p, query)?;
    let v = distributes(&omq, budget)?;
    let witnesses: Vec<Value> = v
        .witnesses
        .iter()
        .map(|w| match w {
            None => Value::Null,
            Some(DisjunctWitness::Unsatisfiable) => json!({ "kind": "unsatisfiable" }),
            Some(DisjunctWitness::Component(c)) => json!({ "kind": "component", "query": format_cq("q", c) }),
        })
        .collect();
    let mut json = json!({
        "distributes": v.distributes,
        "witnesses": witnesses,
        "unsafeComponents": v.unsafe_components,
    });
    let mut text = format!("distributes: {}", v.distributes);
    for (i, w) in v.witnesses.iter().enumerate() {
        let line = match w {
            None => "no witness".to_string(),
            Some(DisjunctWitness::Unsatisfiable) => "unsatisfiable".to_string(),
            Some(DisjunctWitness::Component(c)) => format!("component {}", format_cq("q", c)),
        };
        text.push_str(&format!("\ndisjunct {i}: {line}"));
    }
    if verify {
        let cx = distribution_counterexample(&omq, max_constants, max_atoms)?;
        let agrees = v.distributes == cx.is_none();
        json["verified"] = json!({
            "agrees": agrees,
            "maxConstants": max_constants,
            "maxAtoms": max_atoms,
            "counterexample": cx.as_ref().map(|d| format_facts(d.iter())),
        });
        if !agrees {
            return Err(anyhow!("characterization and enumeration disagree\n{text}"));
        }
        text.push_str(&format!("\nverified on databases with up to {max_atoms} atoms over {max_constants} constants"));
    }
    Ok(Report::verdict(v.distributes, json, text))
}

fn run_unsat(program: &Path, query: &str, budget: usize) -> Result<Report> {
    let p = load(program)?;
    let omq = omq_of(&p, query)?;
    let unsat = is_unsatisfiable(&omq, budget)?;
    Ok(Report::verdict(unsat, json!({ "unsatisfiable": unsat }), format!("unsatisfiable: {unsat}")))
}

fn run_gen(family: Option<&str>, random: bool, seed: Option<u64>, class: TargetClass) -> Result<Report> {
    let omq = match (family, random) {
        (Some(f), _) => {
            let n: usize = f
                .strip_prefix("sticky-")
                .and_then(|n| n.parse().ok())
                .filter(|&n| n >= 2)
                .ok_or_else(|| anyhow!("unknown family {f}; expected sticky-N with N >= 2"))?;
            sticky_family(n)
        }
        (None, true) => random_omq(&GeneratorConfig::new(seed.expect("clap requires a seed"), class)),
        (None, false) => bail!("pass --family sticky-N or --random --seed S"),
    };
    let text = serialize_omq(&omq);
    Ok(Report::ok(json!({ "program": text }), text))
}

/// Writes one line to stdout; a closed pipe is not an error.
fn emit(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn run(cli: &Cli) -> Result<Report> {
    match &cli.command {
        Command::Classify { program, tgds } => run_classify(program, tgds.as_deref()),
        Command::Chase { program, database, tgds, max_level, require_termination } => {
            run_chase(program, database, tgds.as_deref(), *max_level, *require_termination)
        }
        Command::Rewrite { program, query, budget, trace } => run_rewrite(program, query, budget.budget, *trace),
        Command::Eval { program, query, database, tuple, strategy } => {
            run_eval(program, query, database, tuple.as_deref(), (*strategy).into())
        }
        Command::Contains { program, left, right, budget, oracle, max_constants, max_atoms } => {
            run_contains(program, left, right, budget.budget, *oracle, *max_constants, *max_atoms)
        }
        Command::Distributes { program, query, budget, verify, max_constants, max_atoms } => {
            run_distributes(program, query, budget.budget, *verify, *max_constants, *max_atoms)
        }
        Command::Unsat { program, query, budget } => run_unsat(program, query, budget.budget),
        Command::Gen { family, random, seed, class } => run_gen(family.as_deref(), *random, *seed, *class),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Classify { .. } => "classify",
        Command::Chase { .. } => "chase",
        Command::Rewrite { .. } => "rewrite",
        Command::Eval { .. } => "eval",
        Command::Contains { .. } => "contains",
        Command::Distributes { .. } => "distributes",
        Command::Unsat { .. } => "unsat",
        Command::Gen { .. } => "gen",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let command = command_name(&cli.command);
    match run(&cli) {
        Ok(report) => {
            match cli.format {
                Format::Json => {
                    let mut out = json!({ "version": VERSION, "command": command });
                    if let (Value::Object(out), Value::Object(body)) = (&mut out, report.json) {
                        out.extend(body);
                    }
                    emit(&out.to_string());
                }
                Format::Text => {
                    if !report.text.is_empty() {
                        emit(&report.text);
                    }
                }
            }
            ExitCode::from(report.code)
        }
        Err(e) => {
            if cli.format == Format::Json {
                emit(&json!({ "version": VERSION, "command": command, "error": format!("{e:#}") }).to_string());
            }
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

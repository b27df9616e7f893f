use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

use omq_core::eval::eval_membership;
use omq_core::parser::{parse_program, parse_program_with, ParseOptions};
use omq_core::Constant;
use serde_json::Value;
use tempfile::NamedTempFile;

const PROGRAM: &str = "
schema { P/1, R/2, T/1 }
data { P, T }
tgds sigma {
    P(x) -> exists y . R(x, y).
    R(x, y) -> P(y).
    T(x) -> P(x).
}
tgds none { }
query sigma/q(x) :- R(x, y), P(y).
query none/u(x) :- P(x).
query none/u(x) :- T(x).
query none/p(x) :- P(x).
query none/split() :- P(x), T(y).
database d { T(a). P(b). }
";

fn program(text: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn omq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_omq"))
        .args(args)
        .env_remove("OMQ_BUDGET")
        .output()
        .unwrap()
}

fn run(file: &Path, args: &[&str]) -> (i32, Value) {
    let mut all = vec![args[0], file.to_str().unwrap()];
    all.extend_from_slice(&args[1..]);
    let out = omq(&all);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let last = stdout.lines().last().unwrap_or_else(|| panic!("no output for {args:?}"));
    (out.status.code().unwrap(), serde_json::from_str(last).unwrap())
}

#[test]
fn rewrite_running_example() {
    let f = program(PROGRAM);
    let (code, v) = run(f.path(), &["rewrite", "q"]);
    assert_eq!(code, 0);
    assert_eq!(v["version"], 1);
    assert_eq!(v["disjuncts"], serde_json::json!(["q(x) :- P(x).", "q(x) :- T(x)."]));
}

#[test]
fn trace_lines_are_json() {
    let f = program(PROGRAM);
    let out = omq(&["rewrite", f.path().to_str().unwrap(), "q", "--trace"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines.len() > 2);
    assert!(lines[..lines.len() - 1].iter().all(|l| l["step"] == "rewrite" || l["step"] == "factorize"));
    assert!(lines.iter().any(|l| l["step"] == "factorize"));
}

#[test]
fn containment_with_oracle() {
    let f = program(PROGRAM);
    for (l, r) in [("q", "u"), ("u", "q")] {
        let (code, v) = run(f.path(), &["contains", l, r, "--oracle"]);
        assert_eq!(code, 0, "{l} {r}: {v}");
        assert_eq!(v["contained"], true);
        assert_eq!(v["oracleAgrees"], true);
        assert_eq!(v["oracle"]["exact"], true);
    }
}

#[test]
fn counterexample_reparses_and_separates() {
    let f = program(PROGRAM);
    let (code, v) = run(f.path(), &["contains", "q", "p", "--oracle"]);
    assert_eq!(code, 1);
    assert_eq!(v["contained"], false);
    assert_eq!(v["oracleAgrees"], true);
    let facts = v["counterexample"]["database"].as_str().unwrap();
    let tuple: Vec<Constant> = v["counterexample"]["tuple"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| Constant::new(c.as_str().unwrap()))
        .collect();
    let text = format!("{PROGRAM}\ndatabase cx {{ {facts} }}");
    let p = parse_program_with(&text, ParseOptions { allow_frozen: true }).unwrap();
    let d = p.database("cx").unwrap();
    assert!(eval_membership(&p.omq("q").unwrap(), d, &tuple).unwrap());
    assert!(!eval_membership(&p.omq("p").unwrap(), d, &tuple).unwrap());
}

#[test]
fn empty_block_has_every_flag() {
    let f = program("schema { P/1 } tgds none { } query q(x) :- P(x).");
    let (code, v) = run(f.path(), &["classify", "--tgds", "none"]);
    assert_eq!(code, 0);
    for (_, flag) in v["flags"].as_object().unwrap() {
        assert_eq!(flag, true);
    }
    let f = program(PROGRAM);
    let (_, v) = run(f.path(), &["classify", "--tgds", "sigma"]);
    assert_eq!(v["flags"]["nonRecursive"], false);
    assert!(v["witnesses"]["nonRecursive"]["detail"].as_str().unwrap().contains("cycle"));
}

#[test]
fn evaluation() {
    let f = program(PROGRAM);
    let (code, v) = run(f.path(), &["eval", "q", "d"]);
    assert_eq!(code, 0);
    assert_eq!(v["answers"], serde_json::json!([["a"], ["b"]]));
    let (code, v) = run(f.path(), &["eval", "q", "d", "--tuple", "a", "--strategy", "rewriting"]);
    assert_eq!((code, &v["holds"]), (0, &Value::Bool(true)));
    let (code, _) = run(f.path(), &["eval", "q", "d", "--tuple", "c"]);
    assert_eq!(code, 1);
    let (code, _) = run(f.path(), &["eval", "q", "d", "--tuple", "a,b"]);
    assert_eq!(code, 2);
}

#[test]
fn chase_levels() {
    let f = program(PROGRAM);
    let (code, v) = run(f.path(), &["chase", "d", "--tgds", "sigma", "--max-level", "2"]);
    assert_eq!(code, 1);
    assert_eq!(v["complete"], false);
    assert!(v["instance"].as_str().unwrap().contains("_:"));
    let (code, _) = run(f.path(), &["chase", "d", "--tgds", "sigma", "--require-termination"]);
    assert_eq!(code, 2);
    let (code, v) = run(f.path(), &["chase", "d", "--tgds", "none"]);
    assert_eq!((code, v["atoms"].as_u64()), (0, Some(2)));
}

#[test]
fn distribution_and_unsat() {
    let f = program(PROGRAM);
    let (code, v) = run(f.path(), &["distributes", "q", "--verify"]);
    assert_eq!(code, 0);
    assert_eq!(v["witnesses"][0]["kind"], "component");
    assert_eq!(v["verified"]["agrees"], true);
    let (code, v) = run(f.path(), &["distributes", "split", "--verify", "--max-constants", "2", "--max-atoms", "2"]);
    assert_eq!(code, 1);
    assert!(v["verified"]["counterexample"].is_string());
    let (code, v) = run(f.path(), &["unsat", "q"]);
    assert_eq!((code, &v["unsatisfiable"]), (1, &Value::Bool(false)));
    let g = program("schema { P/1, H/1 } data { P } query q() :- P(x), H(x).");
    let (code, _) = run(g.path(), &["unsat", "q"]);
    assert_eq!(code, 0);
}

#[test]
fn generated_programs_parse() {
    let out = omq(&["--format", "text", "gen", "--family", "sticky-3"]);
    assert!(out.status.success());
    let p = parse_program(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(p.omq("q").unwrap().tgds().len(), 5);
    let out = omq(&["gen", "--random", "--seed", "7", "--class", "NR"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    parse_program(v["program"].as_str().unwrap()).unwrap();
    assert_eq!(omq(&["gen", "--family", "dense-3"]).status.code(), Some(2));
}

#[test]
fn output_is_deterministic() {
    let f = program(PROGRAM);
    let path = f.path().to_str().unwrap();
    for args in [
        vec!["rewrite", path, "q", "--trace"],
        vec!["contains", path, "q", "p", "--oracle"],
        vec!["gen", "--random", "--seed", "3"],
    ] {
        assert_eq!(omq(&args).stdout, omq(&args).stdout);
    }
}

#[test]
fn errors_exit_two() {
    let f = program(PROGRAM);
    let (code, v) = run(f.path(), &["rewrite", "missing"]);
    assert_eq!(code, 2);
    assert!(v["error"].as_str().unwrap().contains("missing"));
    let bad = program("schema { P/1 } query q(x) :- P(x, y).");
    let (code, v) = run(bad.path(), &["rewrite", "q"]);
    assert_eq!(code, 2);
    assert!(v["error"].as_str().unwrap().contains(":1:"));
    let out = Command::new(env!("CARGO_BIN_EXE_omq"))
        .args(["rewrite", f.path().to_str().unwrap(), "q"])
        .env("OMQ_BUDGET", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(omq(&["bogus"]).status.code(), Some(2));
}

//! Browser bindings: classify, rewrite and chase a program given as text.
//!
//! Every export returns a JSON string. Failures come back as
//! `{"error": "..."}` so the page never has to catch exceptions.

use omq_core::chase::chase;
use omq_core::classify::classify;
use omq_core::parser::{format_cq, format_facts, parse_program, Program};
use omq_core::rewrite::{xrewrite_with, RewriteOptions};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Rewriting budget used by the page; small enough to keep the tab live.
pub const WEB_BUDGET: usize = 100_000;

/// Chase depth used when the tgds are recursive.
pub const WEB_MAX_LEVEL: usize = 8;

fn load(text: &str) -> Result<Program, String> {
    parse_program(text).map_err(|e| e.to_string())
}

fn respond(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

pub fn classify_json(text: &str) -> String {
    respond(load(text).map(|p| {
        let r = classify(&p.tgds());
        json!({
            "linear": r.linear,
            "guarded": r.guarded,
            "nonRecursive": r.non_recursive,
            "sticky": r.sticky,
            "full": r.full,
            "ucqRewritable": r.ucq_rewritable,
            "witnesses": serde_json::to_value(&r.witnesses).unwrap_or(Value::Null),
        })
    }))
}

pub fn rewrite_json(text: &str, query: &str) -> String {
    respond(load(text).and_then(|p| {
        let omq = p.omq(query).map_err(|e| e.to_string())?;
        let r = xrewrite_with(&omq, RewriteOptions { budget: WEB_BUDGET, trace: false })
            .map_err(|e| e.to_string())?;
        let disjuncts: Vec<String> = r.ucq.disjuncts().iter().map(|q| format_cq(query, q)).collect();
        Ok(json!({ "disjuncts": disjuncts, "steps": r.steps, "generated": r.generated }))
    }))
}

pub fn chase_json(text: &str, database: &str) -> String {
    respond(load(text).and_then(|p| {
        let d = p.database(database).ok_or_else(|| format!("no database named {database}"))?;
        let r = chase(d, &p.tgds(), Some(WEB_MAX_LEVEL));
        Ok(json!({
            "instance": format_facts(r.instance.iter()),
            "complete": r.complete,
            "steps": r.steps,
        }))
    }))
}

#[wasm_bindgen(js_name = classify)]
pub fn classify_wasm(text: &str) -> String {
    classify_json(text)
}

#[wasm_bindgen(js_name = rewrite)]
pub fn rewrite_wasm(text: &str, query: &str) -> String {
    rewrite_json(text, query)
}

#[wasm_bindgen(js_name = chase)]
pub fn chase_wasm(text: &str, database: &str) -> String {
    chase_json(text, database)
}

//! UCQ rewriting by resolution (XRewrite), with the unification,
//! applicability and factorizability machinery it rests on, and the
//! witness-size bounds of the rewritable classes.
//!
//! Tgds are brought into normal form first (one head atom, at most one
//! occurrence of an existential variable). Queries are processed in FIFO
//! order, tgds in program order, and candidate atom sets in
//! size-then-lexicographic order, so runs are reproducible.
//!
//! A query produced by a rewriting step is discarded when it is
//! isomorphic to an `r`-labeled query already present; a query produced by
//! a factorization step is discarded when it is isomorphic to any query
//! already present. The result consists of the `r`-labeled queries that
//! mention data predicates only.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::ops::ControlFlow;

use serde::Serialize;
use thiserror::Error;

use crate::chase::{existential_position, is_normal, normalize_tgds_avoiding};
use crate::classify::{
    is_linear_modulo_facts, is_non_recursive, is_sticky, is_ucq_rewritable, RewritableClass,
};
use crate::homomorphism::Matcher;
use crate::model::{Atom, Cq, Omq, Predicate, Substitution, Term, Tgd, Ucq, Variable};

pub const DEFAULT_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("rewriting budget of {budget} steps exhausted with {} queries generated", partial.generated)]
    BudgetExhausted {
        budget: usize,
        partial: Box<Rewriting>,
    },
    #[error("tgd set is not linear, non-recursive or sticky: {0}")]
    UnsupportedClass(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotUnifiable;

impl std::fmt::Display for NotUnifiable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("atoms do not unify")
    }
}

impl std::error::Error for NotUnifiable {}

// ---------------------------------------------------------------------------
// unification

/// Most general unifier with a ranking on variables: a class of unified
/// variables is represented by its lowest-ranked member, ties broken by
/// name. A class containing a constant or null is represented by it.
fn mgu_ranked(atoms: &[&Atom], rank: &dyn Fn(&Variable) -> u8) -> Option<Substitution> {
    let first = atoms.first()?;
    if atoms.iter().any(|a| a.predicate() != first.predicate()) {
        return None;
    }
    let mut ids: BTreeMap<&Term, usize> = BTreeMap::new();
    let mut terms: Vec<&Term> = Vec::new();
    for a in atoms {
        for t in a.args() {
            ids.entry(t).or_insert_with(|| {
                terms.push(t);
                terms.len() - 1
            });
        }
    }
    let mut parent: Vec<usize> = (0..terms.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for k in 0..first.arity() {
        let a = ids[&first.args()[k]];
        for other in &atoms[1..] {
            let b = ids[&other.args()[k]];
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
            }
        }
    }
    let mut classes: BTreeMap<usize, Vec<&Term>> = BTreeMap::new();
    for (i, t) in terms.iter().enumerate() {
        let r = find(&mut parent, i);
        classes.entry(r).or_default().push(t);
    }
    let mut map = BTreeMap::new();
    for members in classes.values() {
        let mut fixed = members.iter().filter(|t| !t.is_variable());
        let rep: Term = match (fixed.next(), fixed.next()) {
            (Some(_), Some(_)) => return None,
            (Some(c), None) => (*c).clone(),
            (None, _) => {
                let v = members
                    .iter()
                    .filter_map(|t| t.as_variable())
                    .min_by(|a, b| (rank(a), *a).cmp(&(rank(b), *b)))
                    .expect("class without a fixed term holds a variable");
                Term::Variable(v.clone())
            }
        };
        for t in members {
            if let Term::Variable(v) = t {
                if Term::Variable(v.clone()) != rep {
                    map.insert(v.clone(), rep.clone());
                }
            }
        }
    }
    Some(Substitution::from_bindings(map))
}

/// Most general unifier of a set of atoms. Unified variables are
/// represented by the lexicographically smallest one; constants are never
/// replaced.
pub fn mgu(atoms: &[Atom]) -> Result<Substitution, NotUnifiable> {
    let refs: Vec<&Atom> = atoms.iter().collect();
    mgu_ranked(&refs, &|_| 0).ok_or(NotUnifiable)
}

// ---------------------------------------------------------------------------
// applicability and factorizability

fn occurrences(q: &Cq) -> BTreeMap<&Variable, usize> {
    let mut n = BTreeMap::new();
    for a in q.body() {
        for v in a.variables() {
            *n.entry(v).or_insert(0) += 1;
        }
    }
    n
}

/// Answer variables and variables occurring more than once in the body.
pub fn shared_variables(q: &Cq) -> BTreeSet<Variable> {
    let mut out = q.answer_variables();
    out.extend(
        occurrences(q)
            .into_iter()
            .filter(|(_, n)| *n >= 2)
            .map(|(v, _)| v.clone()),
    );
    out
}

fn rename_apart(t: &Tgd, taken: &BTreeSet<Variable>, suffix: usize) -> Tgd {
    t.rename_variables(|v| {
        let mut name = format!("{}'{suffix}", v.name());
        while taken.contains(&Variable::new(&name)) {
            name.push('\'');
        }
        Variable::new(name)
    })
}

fn applicable_in(
    t: &Tgd,
    s: &[&Atom],
    shared: &BTreeSet<Variable>,
    pos: Option<usize>,
) -> bool {
    let head = &t.head()[0];
    if s.is_empty() || s.iter().any(|a| a.predicate() != head.predicate()) {
        return false;
    }
    if let Some(p) = pos {
        for a in s {
            match &a.args()[p] {
                Term::Variable(v) if !shared.contains(v) => {}
                _ => return false,
            }
        }
    }
    let mut all: Vec<&Atom> = s.to_vec();
    all.push(head);
    mgu_ranked(&all, &|_| 0).is_some()
}

/// Whether the normal tgd `t` can resolve the atoms `s` of `q`: `s` unifies
/// with the head of `t`, and no atom of `s` carries a constant or a shared
/// variable at the existential position of `t`.
pub fn is_applicable(t: &Tgd, s: &[Atom], q: &Cq) -> bool {
    assert!(is_normal(t), "tgd must be in normal form");
    let t = rename_apart(t, &q.variables(), 0);
    let refs: Vec<&Atom> = s.iter().collect();
    applicable_in(&t, &refs, &shared_variables(q), existential_position(&t))
}

fn factorizable_in(q: &Cq, s: &[&Atom], head: &Predicate, pos: Option<usize>) -> bool {
    let Some(p) = pos else { return false };
    if s.len() < 2 || s.iter().any(|a| a.predicate() != head) {
        return false;
    }
    if mgu_ranked(s, &|_| 0).is_none() {
        return false;
    }
    let rest: BTreeSet<&Variable> = q
        .body()
        .iter()
        .filter(|a| !s.contains(a))
        .flat_map(|a| a.variables())
        .collect();
    let candidate = match &s[0].args()[p] {
        Term::Variable(v) => v,
        _ => return false,
    };
    !rest.contains(candidate)
        && s.iter().all(|a| {
            a.args().iter().enumerate().all(|(k, t)| {
                let here = t.as_variable() == Some(candidate);
                here == (k == p)
            })
        })
}

/// Whether `s` (at least two atoms of `q`) is factorizable with respect to
/// the normal tgd `t`: `s` unifies, `t` has an existential position, and
/// some variable outside the rest of `q` occurs in every atom of `s`
/// exactly at that position.
pub fn is_factorizable(s: &[Atom], t: &Tgd, q: &Cq) -> bool {
    assert!(is_normal(t), "tgd must be in normal form");
    let refs: Vec<&Atom> = s.iter().collect();
    factorizable_in(q, &refs, t.head()[0].predicate(), existential_position(t))
}

/// Ranks used when choosing representatives: answer variables, then the
/// variables of the input query, then other query variables, then the
/// variables of the renamed tgd.
struct Ranking<'a> {
    answer: BTreeSet<Variable>,
    original: &'a BTreeSet<Variable>,
    current: BTreeSet<Variable>,
}

impl<'a> Ranking<'a> {
    fn new(q: &Cq, original: &'a BTreeSet<Variable>) -> Self {
        Ranking {
            answer: q.answer_variables(),
            original,
            current: q.variables(),
        }
    }

    fn rank(&self, v: &Variable) -> u8 {
        if self.answer.contains(v) {
            0
        } else if self.original.contains(v) {
            1
        } else if self.current.contains(v) {
            2
        } else {
            3
        }
    }
}

fn resolve(q: &Cq, s: &[&Atom], renamed: &Tgd, ranking: &Ranking) -> Cq {
    let mut all: Vec<&Atom> = s.to_vec();
    all.push(&renamed.head()[0]);
    let gamma = mgu_ranked(&all, &|v| ranking.rank(v)).expect("applicability implies unification");
    let mut body: Vec<Atom> = q.body().iter().filter(|a| !s.contains(a)).cloned().collect();
    body.extend(renamed.body().iter().cloned());
    let answer = q.answer().iter().map(|t| gamma.apply_term(t)).collect();
    Cq::new(answer, gamma.apply_atoms(&body)).expect("resolution keeps answer variables safe")
}

fn factorize(q: &Cq, s: &[&Atom], ranking: &Ranking) -> Cq {
    let gamma = mgu_ranked(s, &|v| ranking.rank(v)).expect("factorizable implies unification");
    gamma.apply_cq(q)
}

/// `γ(q[S/body(σ^i)])` where `σ^i` renames every variable of `t` apart
/// with index `i`, and `γ` unifies `S` with the head of `σ^i`.
pub fn rewrite_step(q: &Cq, s: &[Atom], t: &Tgd, i: usize) -> Cq {
    let original = q.variables();
    let renamed = rename_apart(t, &original, i);
    let refs: Vec<&Atom> = s.iter().collect();
    resolve(q, &refs, &renamed, &Ranking::new(q, &original))
}

/// Drops every atom that equals another atom of `q` once the variables
/// occurring exactly once in `q` (and not in the answer) are treated as
/// anonymous. The result is equivalent to `q`; without this merge the
/// rewriting step can add copies of an atom that differ only in fresh
/// singleton variables forever.
pub fn merge_unshared(q: &Cq) -> Cq {
    let answer = q.answer_variables();
    let mut body: Vec<Atom> = q.body().iter().cloned().collect();
    loop {
        let mut count: HashMap<&Variable, usize> = HashMap::new();
        for a in &body {
            for v in a.variables() {
                *count.entry(v).or_default() += 1;
            }
        }
        let key = |a: &Atom| -> (Predicate, Vec<Option<Term>>) {
            let args = a
                .args()
                .iter()
                .map(|t| match t.as_variable() {
                    Some(v) if count[v] == 1 && !answer.contains(v) => None,
                    _ => Some(t.clone()),
                })
                .collect();
            (a.predicate().clone(), args)
        };
        let mut seen = HashSet::new();
        let drop = body.iter().position(|a| !seen.insert(key(a)));
        match drop {
            Some(i) => {
                body.remove(i);
            }
            None => break,
        }
    }
    if body.len() == q.len() {
        return q.clone();
    }
    Cq::new(q.answer().to_vec(), body).expect("merging keeps one atom per key")
}

/// `γ_S(q)`.
pub fn factorize_step(q: &Cq, s: &[Atom]) -> Cq {
    let original = q.variables();
    let refs: Vec<&Atom> = s.iter().collect();
    factorize(q, &refs, &Ranking::new(q, &original))
}

// ---------------------------------------------------------------------------
// isomorphism modulo variable renaming

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Fingerprint {
    answer: Vec<Option<Term>>,
    predicates: Vec<(Predicate, usize)>,
    variables: usize,
}

fn fingerprint(q: &Cq) -> Fingerprint {
    let mut counts: BTreeMap<Predicate, usize> = BTreeMap::new();
    for a in q.body() {
        *counts.entry(a.predicate().clone()).or_default() += 1;
    }
    Fingerprint {
        answer: q
            .answer()
            .iter()
            .map(|t| if t.is_variable() { None } else { Some(t.clone()) })
            .collect(),
        predicates: counts.into_iter().collect(),
        variables: q.variables().len(),
    }
}

/// Whether a bijective variable renaming maps `a` onto `b`, answer tuple
/// included.
pub fn isomorphic(a: &Cq, b: &Cq) -> bool {
    if a.arity() != b.arity() || a.len() != b.len() {
        return false;
    }
    let (va, vb) = (a.variables(), b.variables());
    if va.len() != vb.len() {
        return false;
    }
    let mut bound: BTreeMap<Variable, Term> = BTreeMap::new();
    for (x, y) in a.answer().iter().zip(b.answer()) {
        match (x, y) {
            (Term::Variable(v), Term::Variable(w)) => match bound.get(v) {
                Some(prev) if prev != y => return false,
                Some(_) => {}
                None => {
                    bound.insert(v.clone(), Term::Variable(w.clone()));
                }
            },
            (x, y) if !x.is_variable() && x == y => {}
            _ => return false,
        }
    }
    let images: BTreeSet<&Term> = bound.values().collect();
    if images.len() != bound.len() {
        return false;
    }
    let m = Matcher::with_bound(a.body(), &bound);
    m.for_each(b.body(), |found| {
        let distinct: BTreeSet<&Term> = found.iter().collect();
        let ok = distinct.len() == found.len()
            && found
                .iter()
                .all(|t| t.is_variable() && !images.contains(t));
        if ok {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })
    .is_break()
}

// ---------------------------------------------------------------------------
// the rewriting loop

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    /// Produced by a rewriting step, or an input disjunct.
    R,
    /// Produced by a factorization step.
    F,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledCq {
    pub cq: Cq,
    pub label: Label,
    pub explored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Rewrite,
    Factorize,
}

/// One generated query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub kind: StepKind,
    /// Index of the query the step started from.
    pub from: usize,
    pub atoms: Vec<Atom>,
    /// Index into [`Rewriting::tgds`].
    pub tgd: usize,
    pub result: Cq,
    /// Index of the new query, or `None` when it was a duplicate.
    pub added: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct RewriteOptions {
    pub budget: usize,
    pub trace: bool,
}

impl Default for RewriteOptions {
    fn default() -> Self {
        RewriteOptions {
            budget: DEFAULT_BUDGET,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rewriting {
    pub ucq: Ucq,
    /// The normalized tgds the rewriting ran with.
    pub tgds: Vec<Tgd>,
    /// Every query generated, in generation order.
    pub queries: Vec<LabeledCq>,
    /// Number of rewriting and factorization steps performed.
    pub steps: usize,
    pub generated: usize,
    pub trace: Vec<TraceStep>,
    /// Whether the tgd set lies in a class on which the loop terminates.
    pub termination_guaranteed: bool,
}

struct State {
    entries: Vec<LabeledCq>,
    buckets: HashMap<Fingerprint, Vec<usize>>,
}

impl State {
    fn find(&self, q: &Cq, any_label: bool) -> Option<usize> {
        self.buckets.get(&fingerprint(q))?.iter().copied().find(|&i| {
            (any_label || self.entries[i].label == Label::R) && isomorphic(&self.entries[i].cq, q)
        })
    }

    fn push(&mut self, cq: Cq, label: Label) -> usize {
        let i = self.entries.len();
        self.buckets.entry(fingerprint(&cq)).or_default().push(i);
        self.entries.push(LabeledCq {
            cq,
            label,
            explored: false,
        });
        i
    }
}

/// Nonempty subsets of `atoms`, smallest first, lexicographic within a
/// size.
fn subsets<'a>(atoms: &[&'a Atom], min: usize) -> Vec<Vec<&'a Atom>> {
    let n = atoms.len();
    let mut out = Vec::new();
    for size in min.max(1)..=n {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(idx.iter().map(|&i| atoms[i]).collect());
            let mut k = size;
            while k > 0 && idx[k - 1] == n - size + k - 1 {
                k -= 1;
            }
            if k == 0 {
                break;
            }
            idx[k - 1] += 1;
            for j in k..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    out
}

fn reserved_names(omq: &Omq) -> BTreeSet<String> {
    let mut names: BTreeSet<String> = omq
        .full_schema()
        .predicates()
        .map(|p| p.name().to_string())
        .collect();
    names.extend(omq.query().predicates().iter().map(|p| p.name().to_string()));
    names
}

pub fn xrewrite(omq: &Omq) -> Result<Rewriting, RewriteError> {
    xrewrite_with(omq, RewriteOptions::default())
}

pub fn xrewrite_with(omq: &Omq, options: RewriteOptions) -> Result<Rewriting, RewriteError> {
    let tgds = normalize_tgds_avoiding(omq.tgds(), &reserved_names(omq));
    let original: BTreeSet<Variable> = omq
        .query()
        .disjuncts()
        .iter()
        .flat_map(|q| q.variables())
        .collect();
    let mut state = State {
        entries: Vec::new(),
        buckets: HashMap::new(),
    };
    for q in omq.query().disjuncts() {
        if state.find(q, false).is_none() {
            state.push(q.clone(), Label::R);
        }
    }
    let mut steps = 0usize;
    let mut counter = 0usize;
    let mut trace = Vec::new();
    let mut truth = omq
        .query()
        .disjuncts()
        .iter()
        .any(|q| q.is_truth() && q.is_boolean());
    let mut next = 0usize;
    let positions: Vec<Option<usize>> = tgds.iter().map(existential_position).collect();
    'outer: while next < state.entries.len() && !truth {
        let q = state.entries[next].cq.clone();
        let ranking = Ranking::new(&q, &original);
        let shared = shared_variables(&q);
        let taken = q.variables();
        for (ti, t) in tgds.iter().enumerate() {
            let head = t.head()[0].predicate();
            let candidates: Vec<&Atom> = q.body().iter().filter(|a| a.predicate() == head).collect();
            if candidates.is_empty() {
                continue;
            }
            let all_subsets = subsets(&candidates, 1);
            for s in &all_subsets {
                let probe = rename_apart(t, &taken, counter + 1);
                if !applicable_in(&probe, s, &shared, positions[ti]) {
                    continue;
                }
                counter += 1;
                steps += 1;
                let result = merge_unshared(&resolve(&q, s, &probe, &ranking));
                let added = if state.find(&result, false).is_none() {
                    if result.is_truth() && result.is_boolean() {
                        truth = true;
                    }
                    Some(state.push(result.clone(), Label::R))
                } else {
                    None
                };
                if options.trace {
                    trace.push(TraceStep {
                        kind: StepKind::Rewrite,
                        from: next,
                        atoms: s.iter().map(|a| (*a).clone()).collect(),
                        tgd: ti,
                        result,
                        added,
                    });
                }
                if truth {
                    break 'outer;
                }
                if steps >= options.budget {
                    return Err(budget_exhausted(omq, tgds, state, steps, trace, options.budget));
                }
            }
            for s in all_subsets.iter().filter(|s| s.len() >= 2) {
                if !factorizable_in(&q, s, head, positions[ti]) {
                    continue;
                }
                steps += 1;
                let result = merge_unshared(&factorize(&q, s, &ranking));
                let added = if state.find(&result, true).is_none() {
                    Some(state.push(result.clone(), Label::F))
                } else {
                    None
                };
                if options.trace {
                    trace.push(TraceStep {
                        kind: StepKind::Factorize,
                        from: next,
                        atoms: s.iter().map(|a| (*a).clone()).collect(),
                        tgd: ti,
                        result,
                        added,
                    });
                }
                if steps >= options.budget {
                    return Err(budget_exhausted(omq, tgds, state, steps, trace, options.budget));
                }
            }
        }
        state.entries[next].explored = true;
        next += 1;
    }
    Ok(finish(omq, tgds, state, steps, trace, truth))
}

fn final_ucq(omq: &Omq, entries: &[LabeledCq], truth: bool) -> Ucq {
    if truth {
        return Ucq::from(Cq::truth());
    }
    let data = omq.data_schema();
    let disjuncts: Vec<Cq> = entries
        .iter()
        .filter(|e| e.label == Label::R && e.explored)
        .filter(|e| e.cq.body().iter().all(|a| data.contains(a.predicate())))
        .map(|e| e.cq.clone())
        .collect();
    if disjuncts.is_empty() {
        Ucq::empty(omq.arity())
    } else {
        Ucq::new(disjuncts).expect("disjuncts share the answer arity")
    }
}

fn finish(
    omq: &Omq,
    tgds: Vec<Tgd>,
    state: State,
    steps: usize,
    trace: Vec<TraceStep>,
    truth: bool,
) -> Rewriting {
    Rewriting {
        ucq: final_ucq(omq, &state.entries, truth),
        termination_guaranteed: is_ucq_rewritable(omq.tgds()),
        tgds,
        generated: state.entries.len(),
        queries: state.entries,
        steps,
        trace,
    }
}

fn budget_exhausted(
    omq: &Omq,
    tgds: Vec<Tgd>,
    state: State,
    steps: usize,
    trace: Vec<TraceStep>,
    budget: usize,
) -> RewriteError {
    RewriteError::BudgetExhausted {
        budget,
        partial: Box::new(finish(omq, tgds, state, steps, trace, false)),
    }
}

// ---------------------------------------------------------------------------
// witness bounds

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WitnessBound {
    pub value: u64,
    pub formula: RewritableClass,
}

fn sat_pow(base: u64, exp: usize) -> u64 {
    let mut out: u64 = 1;
    for _ in 0..exp {
        out = out.saturating_mul(base);
    }
    out
}

/// The bound of each applicable class, in class order.
pub fn witness_bounds(omq: &Omq) -> Vec<WitnessBound> {
    let tgds = omq.tgds();
    let disjuncts = omq.query().disjuncts();
    let q_len = disjuncts.iter().map(Cq::len).max().unwrap_or(0) as u64;
    let mut out = Vec::new();
    if is_linear_modulo_facts(tgds) {
        out.push(WitnessBound {
            value: q_len.max(1),
            formula: RewritableClass::Linear,
        });
    }
    if is_non_recursive(tgds) {
        let max_body = tgds.iter().map(|t| t.body().len()).max().unwrap_or(1).max(1) as u64;
        let sch: BTreeSet<&str> = tgds
            .iter()
            .flat_map(|t| t.body().iter().chain(t.head()))
            .map(|a| a.predicate().name())
            .collect();
        out.push(WitnessBound {
            value: q_len.saturating_mul(sat_pow(max_body, sch.len())).max(1),
            formula: RewritableClass::NonRecursive,
        });
    }
    if is_sticky(tgds) {
        let s = omq.data_schema();
        let terms = disjuncts.iter().map(|q| q.terms().len()).max().unwrap_or(0) as u64;
        let consts = tgds
            .iter()
            .flat_map(|t| t.constants())
            .collect::<BTreeSet<_>>()
            .len() as u64;
        let value = (s.len() as u64).saturating_mul(sat_pow(terms + consts + 1, s.max_arity()));
        out.push(WitnessBound {
            value: value.max(1),
            formula: RewritableClass::Sticky,
        });
    }
    out
}

/// The tightest applicable bound on the size of a database witnessing
/// non-containment with `omq` on the left.
pub fn witness_bound(omq: &Omq) -> Result<WitnessBound, RewriteError> {
    witness_bounds(omq)
        .into_iter()
        .min_by_key(|b| b.value)
        .ok_or_else(|| RewriteError::UnsupportedClass(classes_summary(omq.tgds())))
}

pub(crate) fn classes_summary(tgds: &[Tgd]) -> String {
    crate::classify::sticky_witness(tgds)
        .map(|w| w.detail)
        .unwrap_or_else(|| "no applicable class".to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_cq, parse_program, parse_tgds};

    fn a(text: &str) -> Atom {
        let q = parse_cq(&format!("q() :- {text}")).unwrap();
        q.body().iter().next().unwrap().clone()
    }

    fn tgd(text: &str) -> Tgd {
        parse_tgds(text).unwrap().remove(0)
    }

    fn cq(text: &str) -> Cq {
        parse_cq(text).unwrap()
    }

    fn v(name: &str) -> Term {
        Term::variable(name)
    }

    #[test]
    fn mgu_examples() {
        let g = mgu(&[a("R(x,y)"), a("R(z,z)")]).unwrap();
        let images: BTreeSet<Term> = ["x", "y", "z"].iter().map(|n| g.apply_term(&v(n))).collect();
        assert_eq!(images.len(), 1);
        assert_eq!(images.into_iter().next(), Some(v("x")));

        assert_eq!(mgu(&[a("P(a)"), a("P(b)")]), Err(NotUnifiable));

        let g = mgu(&[a("R(x,a)"), a("R(b,y)")]).unwrap();
        assert_eq!(g.apply_atom(&a("R(x,a)")), a("R(b,a)"));
        assert_eq!(g.apply_atom(&a("R(b,y)")), a("R(b,a)"));
        assert_eq!(mgu(&[a("R(x,y)"), a("S(x,y)")]), Err(NotUnifiable));
    }

    #[test]
    fn applicability_examples() {
        let q = cq("q(x) :- R(x,y), P(y).");
        assert!(is_applicable(&tgd("R(x,y) -> P(y)."), &[a("P(y)")], &q));

        let sigma = tgd("P(u,v) -> exists w . R(w,u).");
        let q = cq("q() :- R(x,y), R(x,z).");
        assert!(!is_applicable(&sigma, &[a("R(x,y)")], &q));
        let q = cq("q() :- R(x,y).");
        assert!(is_applicable(&sigma, &[a("R(x,y)")], &q));
    }

    #[test]
    fn factorizability_examples() {
        let sigma = tgd("P(u,v) -> exists w . R(w,u).");
        let q = cq("q() :- R(x,y), R(x,z).");
        let s = [a("R(x,y)"), a("R(x,z)")];
        assert!(is_factorizable(&s, &sigma, &q));
        assert!(!is_factorizable(&s, &tgd("P(u,v) -> R(u,v)."), &q));
        let q = cq("q() :- R(x,y), R(y,z).");
        assert!(!is_factorizable(&[a("R(x,y)"), a("R(y,z)")], &sigma, &q));
    }

    #[test]
    fn rewrite_step_examples() {
        let q = cq("q(x) :- R(x,y), P(y).");
        let out = rewrite_step(&q, &[a("P(y)")], &tgd("R(x,y) -> P(y)."), 1);
        assert!(isomorphic(&out, &cq("q(x) :- R(x,y), R(z,y).")));

        let q = cq("q(x) :- P(x).");
        let out = rewrite_step(&q, &[a("P(x)")], &tgd("T(x) -> P(x)."), 3);
        assert!(isomorphic(&out, &cq("q(x) :- T(x).")));

        let q = cq("q() :- P(y).");
        let out = rewrite_step(&q, &[a("P(y)")], &tgd("true -> exists z . P(z)."), 1);
        assert!(out.is_truth());
    }

    #[test]
    fn factorize_step_examples() {
        let q = cq("q() :- R(x,y), R(x,z).");
        let out = factorize_step(&q, &[a("R(x,y)"), a("R(x,z)")]);
        assert!(isomorphic(&out, &cq("q() :- R(x,y).")));

        let q = cq("q() :- R(x,y).");
        assert_eq!(factorize_step(&q, &[a("R(x,y)"), a("R(x,y)")]), q);

        let q = cq("q(w) :- R(x,w), R(x,y).");
        let out = factorize_step(&q, &[a("R(x,w)"), a("R(x,y)")]);
        assert_eq!(out, cq("q(w) :- R(x,w)."));
    }

    #[test]
    fn isomorphism_respects_answers_and_bijectivity() {
        assert!(isomorphic(&cq("q(x) :- R(x,y)."), &cq("q(u) :- R(u,v).")));
        assert!(!isomorphic(&cq("q(x) :- R(x,y)."), &cq("q(v) :- R(u,v).")));
        assert!(!isomorphic(&cq("q() :- R(x,y)."), &cq("q() :- R(x,x).")));
        assert!(!isomorphic(&cq("q() :- R(x,y), R(y,z)."), &cq("q() :- R(x,y), R(z,y).")));
        assert!(isomorphic(&cq("q(a) :- R(a,y)."), &cq("q(a) :- R(a,z).")));
        assert!(!isomorphic(&cq("q(x,y) :- R(x,y)."), &cq("q(x,x) :- R(x,x).")));
    }

    fn running() -> Omq {
        parse_program(
            "schema { P/1, R/2, T/1 } data { P, T } tgds t { P(x) -> exists y . R(x,y). R(x,y) -> P(y). T(x) -> P(x). } query q(x) :- R(x,y), P(y).",
        )
        .unwrap()
        .omq("q")
        .unwrap()
    }

    #[test]
    fn running_example_rewrites_to_two_disjuncts() {
        let r = xrewrite(&running()).unwrap();
        assert_eq!(r.ucq.len(), 2);
        let expected = [cq("q(x) :- P(x)."), cq("q(x) :- T(x).")];
        for e in &expected {
            assert!(r.ucq.disjuncts().iter().any(|d| isomorphic(d, e)), "{e} missing");
        }
        assert!(r.termination_guaranteed);
    }

    #[test]
    fn empty_tgd_set_returns_the_query() {
        let p = parse_program("schema { R/2 } tgds none { } query q(x) :- R(x,y).").unwrap();
        let r = xrewrite(&p.omq("q").unwrap()).unwrap();
        assert_eq!(r.ucq.disjuncts(), &[cq("q(x) :- R(x,y).")]);
    }

    #[test]
    fn single_step_rewriting() {
        let p = parse_program("schema { A/1, B/1 } tgds t { A(x) -> B(x). } query q(x) :- B(x).").unwrap();
        let r = xrewrite(&p.omq("q").unwrap()).unwrap();
        assert_eq!(r.ucq.len(), 2);
        assert!(isomorphic(&r.ucq.disjuncts()[1], &cq("q(x) :- A(x).")));
    }

    #[test]
    fn fact_tgds_short_circuit_to_truth() {
        let p = parse_program("schema { P/1 } tgds t { true -> exists z . P(z). } query q() :- P(y).").unwrap();
        let r = xrewrite(&p.omq("q").unwrap()).unwrap();
        assert_eq!(r.ucq.disjuncts(), &[Cq::truth()]);
    }

    #[test]
    fn unsatisfiable_query_has_empty_rewriting() {
        let p = parse_program("schema { P/1 } data { P } query q() :- Hidden(x).").unwrap();
        let r = xrewrite(&p.omq("q").unwrap()).unwrap();
        assert!(r.ucq.is_empty());
    }

    #[test]
    fn budget_is_enforced() {
        let e = xrewrite_with(&running(), RewriteOptions { budget: 2, trace: true }).unwrap_err();
        match e {
            RewriteError::BudgetExhausted { partial, budget } => {
                assert_eq!(budget, 2);
                assert_eq!(partial.steps, 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn witness_bound_examples() {
        let b = witness_bound(&running()).unwrap();
        assert_eq!(b.value, 2);
        assert_eq!(b.formula, RewritableClass::Linear);

        let p = parse_program(
            "schema { A/1, B/1, C/1 } data { A, B } tgds t { A(x), B(x) -> C(x). } query q(x) :- C(x).",
        )
        .unwrap();
        let nr = witness_bounds(&p.omq("q").unwrap());
        let nr = nr.iter().find(|b| b.formula == RewritableClass::NonRecursive).unwrap();
        assert_eq!(nr.value, 8);

        let p = parse_program(
            "schema { R/2, S/2 } data { R } tgds t { R(x,y), S(x,y) -> S(y,x). } query q() :- S(x,y).",
        )
        .unwrap();
        let omq = p.omq("q").unwrap();
        let b = witness_bound(&omq).unwrap();
        assert_eq!(b.formula, RewritableClass::Sticky);
        assert_eq!(b.value, 9);
    }

    #[test]
    fn unsupported_class_has_no_bound() {
        let p = parse_program("schema { R/2 } tgds t { R(x,y), R(y,z) -> R(x,z). } query q() :- R(x,y).").unwrap();
        assert!(matches!(
            witness_bound(&p.omq("q").unwrap()),
            Err(RewriteError::UnsupportedClass(_))
        ));
    }

    #[test]
    fn subsets_are_ordered_by_size_then_lexicographically() {
        let atoms = [a("P(a)"), a("P(b)"), a("P(c)")];
        let refs: Vec<&Atom> = atoms.iter().collect();
        let s = subsets(&refs, 1);
        assert_eq!(s.len(), 7);
        assert_eq!(s[0], vec![&atoms[0]]);
        assert_eq!(s[3], vec![&atoms[0], &atoms[1]]);
        assert_eq!(s[6].len(), 3);
    }

    #[test]
    fn merging_unshared_copies() {
        let q = parse_cq("q(x) :- R(x, y), R(x, z), R(z, w)").unwrap();
        assert_eq!(merge_unshared(&q), q);
        let q = parse_cq("q(x) :- R(x, y), R(x, z), P(x)").unwrap();
        assert_eq!(merge_unshared(&q).len(), 2);
        let q = parse_cq("q() :- R(x, y), R(z, w)").unwrap();
        assert_eq!(merge_unshared(&q).len(), 1);
    }

    #[test]
    fn sticky_self_loop_terminates() {
        let p = parse_program(
            "schema { P/3 }
             tgds t { P(x, x, x), P(y, z, x) -> P(x, x, x). }
             query q() :- P(u, v, u), P(u, v, w).",
        )
        .unwrap();
        let omq = p.omq("q").unwrap();
        assert!(crate::classify::is_sticky(omq.tgds()));
        let r = xrewrite_with(&omq, RewriteOptions { budget: 10_000, trace: false }).unwrap();
        assert!(r.ucq.disjuncts().iter().all(|d| d.len() <= 3));
    }
}

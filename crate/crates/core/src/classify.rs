//! Syntactic classes of tgd sets: linear, guarded, non-recursive,
//! sticky and full.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::model::{Predicate, Term, Tgd, Variable};

/// A partition of Σ into strata `Σ1..Σn` with a level function `mu`.
///
/// `mu(P) = 0` iff `P` occurs in no head. A tgd sits in the stratum of
/// the highest of its head predicates, so for single-head tgds every tgd
/// with `R` in its head lies in `Σ_mu(R)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stratification {
    /// `strata[k]` holds the indices of the tgds in `Σ_{k+1}`.
    pub strata: Vec<Vec<usize>>,
    pub mu: BTreeMap<Predicate, usize>,
}

impl Stratification {
    pub fn len(&self) -> usize {
        self.strata.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strata.iter().all(Vec::is_empty)
    }
}

/// A directed cycle in the predicate graph; the first predicate is
/// repeated at the end.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NotStratifiable {
    pub cycle: Vec<Predicate>,
}

impl fmt::Display for NotStratifiable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.cycle.iter().map(|p| p.name()).collect();
        write!(f, "predicate cycle {}", names.join(" -> "))
    }
}

impl std::error::Error for NotStratifiable {}

/// Edges `R -> P` for every tgd with `R` in its body and `P` in its head.
pub fn predicate_graph(tgds: &[Tgd]) -> BTreeMap<Predicate, BTreeSet<Predicate>> {
    let mut graph: BTreeMap<Predicate, BTreeSet<Predicate>> = BTreeMap::new();
    for t in tgds {
        for a in t.body().iter().chain(t.head()) {
            graph.entry(a.predicate().clone()).or_default();
        }
        for b in t.body() {
            for h in t.head() {
                graph
                    .entry(b.predicate().clone())
                    .or_default()
                    .insert(h.predicate().clone());
            }
        }
    }
    graph
}

fn find_cycle(graph: &BTreeMap<Predicate, BTreeSet<Predicate>>) -> Option<Vec<Predicate>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Grey,
        Black,
    }
    let mut color: BTreeMap<&Predicate, Color> = graph.keys().map(|p| (p, Color::White)).collect();
    for root in graph.keys() {
        if color[root] != Color::White {
            continue;
        }
        // iterative DFS; `path` mirrors the grey nodes
        let mut path: Vec<&Predicate> = vec![root];
        let mut iters = vec![graph[root].iter()];
        color.insert(root, Color::Grey);
        while let Some(it) = iters.last_mut() {
            match it.next() {
                Some(next) => match color[next] {
                    Color::Grey => {
                        let start = path.iter().position(|p| *p == next).expect("grey on path");
                        let mut cycle: Vec<Predicate> =
                            path[start..].iter().map(|p| (*p).clone()).collect();
                        cycle.push(next.clone());
                        return Some(cycle);
                    }
                    Color::White => {
                        color.insert(next, Color::Grey);
                        path.push(next);
                        iters.push(graph[next].iter());
                    }
                    Color::Black => {}
                },
                None => {
                    let done = path.pop().expect("nonempty path");
                    color.insert(done, Color::Black);
                    iters.pop();
                }
            }
        }
    }
    None
}

pub fn stratify(tgds: &[Tgd]) -> Result<Stratification, NotStratifiable> {
    let graph = predicate_graph(tgds);
    if let Some(cycle) = find_cycle(&graph) {
        return Err(NotStratifiable { cycle });
    }
    let head_preds: BTreeSet<&Predicate> =
        tgds.iter().flat_map(|t| t.head()).map(|a| a.predicate()).collect();
    // longest-path layering over an acyclic graph
    let mut mu: BTreeMap<Predicate, usize> = BTreeMap::new();
    fn level(
        p: &Predicate,
        tgds: &[Tgd],
        head_preds: &BTreeSet<&Predicate>,
        mu: &mut BTreeMap<Predicate, usize>,
    ) -> usize {
        if let Some(&l) = mu.get(p) {
            return l;
        }
        let l = if !head_preds.contains(p) {
            0
        } else {
            let mut best = 0;
            for t in tgds.iter().filter(|t| t.head().iter().any(|a| a.predicate() == p)) {
                for b in t.body() {
                    best = best.max(level(b.predicate(), tgds, head_preds, mu));
                }
            }
            best + 1
        };
        mu.insert(p.clone(), l);
        l
    }
    for p in graph.keys() {
        level(p, tgds, &head_preds, &mut mu);
    }
    let n = mu.values().copied().max().unwrap_or(0).max(1);
    let mut strata = vec![Vec::new(); n];
    for (i, t) in tgds.iter().enumerate() {
        let k = t.head().iter().map(|a| mu[a.predicate()]).max().expect("nonempty head");
        strata[k - 1].push(i);
    }
    Ok(Stratification { strata, mu })
}

pub fn is_non_recursive(tgds: &[Tgd]) -> bool {
    stratify(tgds).is_ok()
}

/// Marked body variables, keyed by tgd index so that tgds are implicitly
/// renamed apart.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MarkedVariables {
    pub marked: BTreeSet<(usize, Variable)>,
}

impl MarkedVariables {
    pub fn is_marked(&self, tgd: usize, v: &Variable) -> bool {
        self.marked.contains(&(tgd, v.clone()))
    }

    pub fn len(&self) -> usize {
        self.marked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marked.is_empty()
    }
}

/// Least fixpoint of the base rule (a body variable missing from some head
/// atom) and the propagation rule (a head occurrence whose positions are
/// covered by marked variables, or by constants, in some body atom of the
/// same predicate).
pub fn marked_variables(tgds: &[Tgd]) -> MarkedVariables {
    let mut marked: BTreeSet<(usize, Variable)> = BTreeSet::new();
    for (i, t) in tgds.iter().enumerate() {
        for x in t.body_variables() {
            let missing = t
                .head()
                .iter()
                .any(|a| !a.args().contains(&Term::Variable(x.clone())));
            if missing {
                marked.insert((i, x));
            }
        }
    }
    loop {
        let mut added = false;
        for (i, t) in tgds.iter().enumerate() {
            for x in t.body_variables() {
                if marked.contains(&(i, x.clone())) {
                    continue;
                }
                let xt = Term::Variable(x.clone());
                let propagates = t.head().iter().any(|alpha| {
                    let positions: Vec<usize> = alpha
                        .args()
                        .iter()
                        .enumerate()
                        .filter(|(_, t)| **t == xt)
                        .map(|(k, _)| k)
                        .collect();
                    if positions.is_empty() {
                        return false;
                    }
                    tgds.iter().enumerate().any(|(j, t2)| {
                        t2.body()
                            .iter()
                            .filter(|beta| beta.predicate() == alpha.predicate())
                            .any(|beta| {
                                positions.iter().all(|&k| match &beta.args()[k] {
                                    Term::Variable(v) => marked.contains(&(j, v.clone())),
                                    _ => true,
                                })
                            })
                    })
                });
                if propagates {
                    marked.insert((i, x));
                    added = true;
                }
            }
        }
        if !added {
            break;
        }
    }
    MarkedVariables { marked }
}

/// A violating tgd, optionally with the offending variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub tgd: Option<usize>,
    pub variable: Option<String>,
    pub detail: String,
}

fn tgd_witness(tgds: &[Tgd], i: usize, detail: impl Into<String>) -> Witness {
    Witness {
        tgd: Some(i),
        variable: None,
        detail: format!("{}: {}", detail.into(), tgds[i]),
    }
}

pub fn guarded_witness(tgds: &[Tgd]) -> Option<Witness> {
    tgds.iter().position(|t| {
        let vars = t.body_variables();
        !t.is_fact()
            && !t.body().iter().any(|a| {
                let av: BTreeSet<&Variable> = a.variables().collect();
                vars.iter().all(|v| av.contains(v))
            })
    })
    .map(|i| tgd_witness(tgds, i, "no body atom contains every body variable"))
}

pub fn is_guarded(tgds: &[Tgd]) -> bool {
    guarded_witness(tgds).is_none()
}

pub fn linear_witness(tgds: &[Tgd]) -> Option<Witness> {
    tgds.iter()
        .position(|t| t.body().len() != 1)
        .map(|i| tgd_witness(tgds, i, "body does not consist of exactly one atom"))
}

pub fn is_linear(tgds: &[Tgd]) -> bool {
    linear_witness(tgds).is_none()
}

/// Linear once fact tgds are set aside.
pub fn is_linear_modulo_facts(tgds: &[Tgd]) -> bool {
    tgds.iter().all(|t| t.body().len() <= 1)
}

pub fn sticky_witness(tgds: &[Tgd]) -> Option<Witness> {
    let marked = marked_variables(tgds);
    for (i, t) in tgds.iter().enumerate() {
        let mut seen: BTreeMap<&Variable, usize> = BTreeMap::new();
        for v in t.body().iter().flat_map(|a| a.variables()) {
            *seen.entry(v).or_default() += 1;
        }
        if let Some((v, _)) = seen
            .iter()
            .find(|(v, n)| **n >= 2 && marked.is_marked(i, v))
        {
            return Some(Witness {
                tgd: Some(i),
                variable: Some(v.name().to_string()),
                detail: format!("marked variable {v} occurs more than once in the body of {t}"),
            });
        }
    }
    None
}

pub fn is_sticky(tgds: &[Tgd]) -> bool {
    sticky_witness(tgds).is_none()
}

pub fn is_full(tgds: &[Tgd]) -> bool {
    tgds.iter().all(Tgd::is_full)
}

/// The classes whose OMQs admit UCQ rewritings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum RewritableClass {
    /// Linear, possibly extended with fact tgds.
    Linear,
    NonRecursive,
    Sticky,
}

impl fmt::Display for RewritableClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RewritableClass::Linear => "linear",
            RewritableClass::NonRecursive => "non-recursive",
            RewritableClass::Sticky => "sticky",
        })
    }
}

pub fn rewritable_classes(tgds: &[Tgd]) -> Vec<RewritableClass> {
    let mut out = Vec::new();
    if is_linear_modulo_facts(tgds) {
        out.push(RewritableClass::Linear);
    }
    if is_non_recursive(tgds) {
        out.push(RewritableClass::NonRecursive);
    }
    if is_sticky(tgds) {
        out.push(RewritableClass::Sticky);
    }
    out
}

pub fn is_ucq_rewritable(tgds: &[Tgd]) -> bool {
    !rewritable_classes(tgds).is_empty()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Witnesses {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linear: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guarded: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub non_recursive: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sticky: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fact_free: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant_free: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassReport {
    pub linear: bool,
    pub guarded: bool,
    pub non_recursive: bool,
    pub sticky: bool,
    pub full: bool,
    pub fact_free: bool,
    pub constant_free: bool,
    pub ucq_rewritable: bool,
    pub witnesses: Witnesses,
}

pub fn classify(tgds: &[Tgd]) -> ClassReport {
    let linear = linear_witness(tgds);
    let guarded = guarded_witness(tgds);
    let non_recursive = stratify(tgds).err().map(|e| Witness {
        tgd: None,
        variable: None,
        detail: e.to_string(),
    });
    let sticky = sticky_witness(tgds);
    let full = tgds.iter().position(|t| !t.is_full()).map(|i| {
        let ex: Vec<String> = tgds[i].existentials().iter().map(|v| v.to_string()).collect();
        Witness {
            tgd: Some(i),
            variable: ex.first().cloned(),
            detail: format!("existential variables {}: {}", ex.join(", "), tgds[i]),
        }
    });
    let fact_free = tgds
        .iter()
        .position(Tgd::is_fact)
        .map(|i| tgd_witness(tgds, i, "fact tgd"));
    let constant_free = tgds
        .iter()
        .position(|t| !t.constants().is_empty())
        .map(|i| tgd_witness(tgds, i, "mentions a constant"));
    debug_assert!(linear.is_some() || guarded.is_none());
    ClassReport {
        linear: linear.is_none(),
        guarded: guarded.is_none(),
        non_recursive: non_recursive.is_none(),
        sticky: sticky.is_none(),
        full: full.is_none(),
        fact_free: fact_free.is_none(),
        constant_free: constant_free.is_none(),
        ucq_rewritable: is_ucq_rewritable(tgds),
        witnesses: Witnesses {
            linear,
            guarded,
            non_recursive,
            sticky,
            full,
            fact_free,
            constant_free,
        },
    }
}

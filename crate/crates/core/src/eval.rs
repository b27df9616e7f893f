//! Query evaluation over finite instances and certain answers of OMQs.
//!
//! An OMQ is evaluated over the atoms of a database whose predicate lies
//! in the data schema; other atoms are ignored by both strategies.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::ControlFlow;

use thiserror::Error;

use crate::chase::chase_nr;
use crate::classify::{is_non_recursive, is_ucq_rewritable};
use crate::homomorphism::Matcher;
use crate::model::{Atom, Constant, Cq, Database, Instance, Omq, Term, Ucq, Variable};
use crate::rewrite::{classes_summary, xrewrite_with, RewriteError, RewriteOptions};

/// Tuples of constants.
pub type AnswerSet = BTreeSet<Vec<Constant>>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("{strategy} evaluation is not available: {reason}")]
    UnsupportedClass { strategy: Strategy, reason: String },
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error("tuple has {found} entries but the query has arity {expected}")]
    ArityMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// Rewriting when the tgds are UCQ rewritable, otherwise the chase.
    #[default]
    Auto,
    Chase,
    Rewriting,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Auto => "auto",
            Strategy::Chase => "chase",
            Strategy::Rewriting => "rewriting",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Strategy::Auto),
            "chase" => Ok(Strategy::Chase),
            "rewriting" => Ok(Strategy::Rewriting),
            other => Err(format!("unknown strategy {other}")),
        }
    }
}

fn answer_tuple(q: &Cq, m: &Matcher, images: &[Term]) -> Option<Vec<Constant>> {
    q.answer()
        .iter()
        .map(|t| match t {
            Term::Variable(v) => images[m.slot_of(v)?].as_constant().cloned(),
            Term::Constant(c) => Some(c.clone()),
            Term::Null(_) => None,
        })
        .collect()
}

/// The constant tuples `h(x̄)` over all homomorphisms `h` from the body.
pub fn evaluate_cq(q: &Cq, i: &Instance) -> AnswerSet {
    let m = Matcher::new(q.body());
    let mut out = AnswerSet::new();
    if q.is_boolean() {
        if m.exists(i.atoms()) {
            out.insert(Vec::new());
        }
        return out;
    }
    let _ = m.for_each(i.atoms(), |images| {
        if let Some(t) = answer_tuple(q, &m, images) {
            out.insert(t);
        }
        ControlFlow::Continue(())
    });
    out
}

pub fn evaluate_ucq(q: &Ucq, i: &Instance) -> AnswerSet {
    let mut out = AnswerSet::new();
    for d in q.disjuncts() {
        if d.is_boolean() && d.is_truth() {
            return AnswerSet::from([Vec::new()]);
        }
        out.extend(evaluate_cq(d, i));
    }
    out
}

/// Whether `tuple` is an answer to `q` over `i`.
pub fn cq_holds(q: &Cq, i: &Instance, tuple: &[Constant]) -> bool {
    if q.arity() != tuple.len() {
        return false;
    }
    let mut bound: BTreeMap<Variable, Term> = BTreeMap::new();
    for (t, c) in q.answer().iter().zip(tuple) {
        let c = Term::Constant(c.clone());
        match t {
            Term::Variable(v) => match bound.get(v) {
                Some(prev) if *prev != c => return false,
                _ => {
                    bound.insert(v.clone(), c);
                }
            },
            other => {
                if *other != c {
                    return false;
                }
            }
        }
    }
    Matcher::with_bound(q.body(), &bound).exists(i.atoms())
}

pub fn ucq_holds(q: &Ucq, i: &Instance, tuple: &[Constant]) -> bool {
    q.disjuncts().iter().any(|d| cq_holds(d, i, tuple))
}

/// The atoms of `d` over the data schema of `omq`.
pub fn restrict_to_data(omq: &Omq, d: &Database) -> Database {
    let s = omq.data_schema();
    if d.iter().all(|a| s.contains(a.predicate())) {
        return d.clone();
    }
    let atoms: Vec<Atom> = d.iter().filter(|a| s.contains(a.predicate())).cloned().collect();
    Database::new(atoms).expect("subset of a database")
}

#[derive(Debug, Clone)]
enum Engine {
    Rewriting(Ucq),
    Chase,
}

/// An OMQ with its evaluation engine fixed, and its rewriting computed
/// once.
#[derive(Debug, Clone)]
pub struct PreparedOmq {
    omq: Omq,
    engine: Engine,
}

impl PreparedOmq {
    pub fn new(omq: &Omq, strategy: Strategy) -> Result<Self, EvalError> {
        Self::with_options(omq, strategy, RewriteOptions::default())
    }

    pub fn with_options(
        omq: &Omq,
        strategy: Strategy,
        options: RewriteOptions,
    ) -> Result<Self, EvalError> {
        let tgds = omq.tgds();
        let engine = match strategy {
            Strategy::Chase => {
                if !is_non_recursive(tgds) {
                    return Err(EvalError::UnsupportedClass {
                        strategy,
                        reason: "the tgd set is recursive".into(),
                    });
                }
                Engine::Chase
            }
            Strategy::Rewriting | Strategy::Auto => {
                if is_ucq_rewritable(tgds) {
                    Engine::Rewriting(xrewrite_with(omq, options)?.ucq)
                } else if strategy == Strategy::Auto && is_non_recursive(tgds) {
                    Engine::Chase
                } else {
                    return Err(EvalError::UnsupportedClass {
                        strategy,
                        reason: classes_summary(tgds),
                    });
                }
            }
        };
        Ok(PreparedOmq {
            omq: omq.clone(),
            engine,
        })
    }

    pub fn omq(&self) -> &Omq {
        &self.omq
    }

    /// The UCQ rewriting, when evaluating by rewriting.
    pub fn rewriting(&self) -> Option<&Ucq> {
        match &self.engine {
            Engine::Rewriting(u) => Some(u),
            Engine::Chase => None,
        }
    }

    pub fn answers(&self, d: &Database) -> AnswerSet {
        let d = restrict_to_data(&self.omq, d);
        match &self.engine {
            Engine::Rewriting(u) => evaluate_ucq(u, d.instance()),
            Engine::Chase => {
                let r = chase_nr(&d, self.omq.tgds()).expect("checked non-recursive");
                evaluate_ucq(self.omq.query(), &r.instance)
            }
        }
    }

    pub fn holds(&self, d: &Database, tuple: &[Constant]) -> bool {
        let d = restrict_to_data(&self.omq, d);
        match &self.engine {
            Engine::Rewriting(u) => ucq_holds(u, d.instance(), tuple),
            Engine::Chase => {
                let r = chase_nr(&d, self.omq.tgds()).expect("checked non-recursive");
                ucq_holds(self.omq.query(), &r.instance, tuple)
            }
        }
    }
}

/// `Q(D)`.
pub fn certain_answers(omq: &Omq, d: &Database, strategy: Strategy) -> Result<AnswerSet, EvalError> {
    Ok(PreparedOmq::new(omq, strategy)?.answers(d))
}

/// Whether `tuple ∈ Q(D)`.
pub fn eval_membership(omq: &Omq, d: &Database, tuple: &[Constant]) -> Result<bool, EvalError> {
    if tuple.len() != omq.arity() {
        return Err(EvalError::ArityMismatch {
            expected: omq.arity(),
            found: tuple.len(),
        });
    }
    Ok(PreparedOmq::new(omq, Strategy::Auto)?.holds(d, tuple))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NullId;
    use crate::parser::{parse_cq, parse_database, parse_program, parse_ucq};

    fn c(s: &str) -> Constant {
        Constant::new(s)
    }

    fn answers(tuples: &[&[&str]]) -> AnswerSet {
        tuples.iter().map(|t| t.iter().map(|s| c(s)).collect()).collect()
    }

    #[test]
    fn cq_examples() {
        let i = Instance::new([
            Atom::from_name("R", vec![Term::constant("a"), Term::constant("b")]),
            Atom::from_name("R", vec![Term::constant("b"), Term::Null(NullId(1))]),
        ])
        .unwrap();
        assert_eq!(evaluate_cq(&parse_cq("q(x) :- R(x,y).").unwrap(), &i), answers(&[&["a"], &["b"]]));

        let i = Instance::new([Atom::from_name("P", vec![Term::Null(NullId(1))])]).unwrap();
        assert!(evaluate_cq(&parse_cq("q(x) :- P(x).").unwrap(), &i).is_empty());

        let i = parse_database("R(a,b).").unwrap().into_instance();
        assert!(evaluate_cq(&parse_cq("q() :- R(x,y), R(y,x).").unwrap(), &i).is_empty());
    }

    #[test]
    fn ucq_examples() {
        let i = parse_database("P(a). T(b).").unwrap().into_instance();
        let u = parse_ucq("q(x) :- P(x). q(x) :- T(x).").unwrap();
        assert_eq!(evaluate_ucq(&u, &i), answers(&[&["a"], &["b"]]));
        let single = parse_ucq("q(x) :- P(x).").unwrap();
        assert_eq!(evaluate_ucq(&single, &i), evaluate_cq(&single.disjuncts()[0], &i));
        let with_truth = Ucq::new(vec![parse_cq("q() :- P(z).").unwrap(), Cq::truth()]).unwrap();
        assert_eq!(evaluate_ucq(&with_truth, &Instance::empty()), answers(&[&[]]));
    }

    const RUNNING: &str = "schema { P/1, R/2, T/1 } data { P, T } tgds t { P(x) -> exists y . R(x,y). R(x,y) -> P(y). T(x) -> P(x). } query q(x) :- R(x,y), P(y).";

    #[test]
    fn certain_answers_of_the_running_example() {
        let omq = parse_program(RUNNING).unwrap().omq("q").unwrap();
        let d = parse_database("P(a).").unwrap();
        assert_eq!(certain_answers(&omq, &d, Strategy::Auto).unwrap(), answers(&[&["a"]]));
        let d = parse_database("T(b).").unwrap();
        assert!(eval_membership(&omq, &d, &[c("b")]).unwrap());
        assert!(matches!(
            certain_answers(&omq, &d, Strategy::Chase),
            Err(EvalError::UnsupportedClass { .. })
        ));
    }

    #[test]
    fn empty_tgd_set_is_plain_evaluation() {
        let p = parse_program("schema { R/2 } tgds none { } query q(x) :- R(x,y).").unwrap();
        let omq = p.omq("q").unwrap();
        let d = parse_database("R(a,b). R(b,c).").unwrap();
        assert_eq!(
            certain_answers(&omq, &d, Strategy::Auto).unwrap(),
            evaluate_ucq(omq.query(), d.instance())
        );
    }

    #[test]
    fn strategies_agree_on_a_non_recursive_example() {
        let p = parse_program("schema { A/1, R/2 } data { A } tgds t { A(x) -> exists y . R(x,y). } query q() :- R(x,y).").unwrap();
        let omq = p.omq("q").unwrap();
        let d = parse_database("A(a).").unwrap();
        let by_chase = certain_answers(&omq, &d, Strategy::Chase).unwrap();
        let by_rewriting = certain_answers(&omq, &d, Strategy::Rewriting).unwrap();
        assert_eq!(by_chase, answers(&[&[]]));
        assert_eq!(by_chase, by_rewriting);
    }

    #[test]
    fn membership_edge_cases() {
        let p = parse_program("schema { P/1 } tgds none { } query q() :- P(x). query r(x) :- P(x).").unwrap();
        assert!(!eval_membership(&p.omq("q").unwrap(), &Database::empty(), &[]).unwrap());
        let d = parse_database("P(a).").unwrap();
        assert!(!eval_membership(&p.omq("r").unwrap(), &d, &[c("zz")]).unwrap());
        assert!(matches!(
            eval_membership(&p.omq("r").unwrap(), &d, &[]),
            Err(EvalError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn constants_from_rules_can_be_answers() {
        let p = parse_program("schema { P/1, Q/1 } data { P } tgds t { P(x) -> Q(k). } query q(y) :- Q(y).").unwrap();
        let omq = p.omq("q").unwrap();
        let d = parse_database("P(a).").unwrap();
        assert!(eval_membership(&omq, &d, &[c("k")]).unwrap());
        assert_eq!(
            certain_answers(&omq, &d, Strategy::Chase).unwrap(),
            certain_answers(&omq, &d, Strategy::Rewriting).unwrap()
        );
    }
}

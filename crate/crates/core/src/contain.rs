//! Containment between UCQ-rewritable OMQs, the reductions between
//! evaluation and containment, the UCQ-to-CQ transformation, and a
//! brute-force oracle over enumerated databases.
//!
//! [`contains`] rewrites the left-hand OMQ and checks each frozen disjunct
//! against the right-hand OMQ. A non-containment is always witnessed by one
//! of these frozen databases, so the check is complete.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::classify::{classify, is_non_recursive, is_ucq_rewritable, ClassReport};
use crate::eval::{cq_holds, restrict_to_data, EvalError, PreparedOmq, Strategy};
use crate::model::{
    freeze_cq, schema_of_tgds, Atom, Constant, Cq, Database, Omq, Predicate, Term, Tgd, Ucq,
    Variable,
};
use crate::rewrite::{classes_summary, witness_bound, xrewrite_with, RewriteError, RewriteOptions};
use crate::testkit::{enumerate_databases_over, fresh_constants, ground_atoms, EnumerationTooLarge};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContainError {
    #[error("incompatible OMQs: {0}")]
    SchemaMismatch(String),
    #[error("unsupported tgd class: {0}")]
    UnsupportedClass(String),
    #[error("rewriting budget of {budget} steps exhausted")]
    BudgetExhausted { budget: usize },
    #[error("tuple has {found} entries but the query has arity {expected}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("constant {0} occurs neither in the database nor in the rules or query")]
    ConstantOutsideDomain(String),
    #[error(transparent)]
    Enumeration(#[from] EnumerationTooLarge),
}

impl From<RewriteError> for ContainError {
    fn from(e: RewriteError) -> Self {
        match e {
            RewriteError::BudgetExhausted { budget, .. } => ContainError::BudgetExhausted { budget },
            RewriteError::UnsupportedClass(s) => ContainError::UnsupportedClass(s),
        }
    }
}

impl From<EvalError> for ContainError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::UnsupportedClass { reason, .. } => ContainError::UnsupportedClass(reason),
            EvalError::Rewrite(r) => r.into(),
            EvalError::ArityMismatch { expected, found } => {
                ContainError::ArityMismatch { expected, found }
            }
        }
    }
}

/// A database and tuple in the left-hand OMQ's answers but not the right's.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub database: Database,
    pub tuple: Vec<Constant>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainmentVerdict {
    pub contained: bool,
    /// Present iff `contained` is false.
    pub counterexample: Option<Counterexample>,
}

impl ContainmentVerdict {
    fn holds() -> Self {
        ContainmentVerdict {
            contained: true,
            counterexample: None,
        }
    }

    fn fails(database: Database, tuple: Vec<Constant>) -> Self {
        ContainmentVerdict {
            contained: false,
            counterexample: Some(Counterexample { database, tuple }),
        }
    }
}

fn check_compatible(q1: &Omq, q2: &Omq) -> Result<(), ContainError> {
    if q1.data_schema() != q2.data_schema() {
        return Err(ContainError::SchemaMismatch(format!(
            "data schemas {} and {} differ",
            q1.data_schema(),
            q2.data_schema()
        )));
    }
    if q1.arity() != q2.arity() {
        return Err(ContainError::SchemaMismatch(format!(
            "answer arities {} and {} differ",
            q1.arity(),
            q2.arity()
        )));
    }
    Ok(())
}

fn require_rewritable(q: &Omq) -> Result<(), ContainError> {
    if is_ucq_rewritable(q.tgds()) {
        Ok(())
    } else {
        Err(ContainError::UnsupportedClass(classes_summary(q.tgds())))
    }
}

/// Decides `Q1 ⊆ Q2` for OMQs whose tgds are linear, non-recursive or
/// sticky. `budget` caps the rewriting steps of each side.
pub fn contains(q1: &Omq, q2: &Omq, budget: usize) -> Result<ContainmentVerdict, ContainError> {
    check_compatible(q1, q2)?;
    require_rewritable(q1)?;
    require_rewritable(q2)?;
    let options = RewriteOptions {
        budget,
        trace: false,
    };
    let rewriting = xrewrite_with(q1, options)?;
    let right = PreparedOmq::with_options(q2, Strategy::Auto, options)?;
    for q in rewriting.ucq.disjuncts() {
        let (database, tuple) = freeze_cq(q);
        if !right.holds(&database, &tuple) {
            return Ok(ContainmentVerdict::fails(database, tuple));
        }
    }
    Ok(ContainmentVerdict::holds())
}

/// `Q1 ⊆ Q2` and `Q2 ⊆ Q1`.
pub fn equivalent(q1: &Omq, q2: &Omq, budget: usize) -> Result<bool, ContainError> {
    Ok(contains(q1, q2, budget)?.contained && contains(q2, q1, budget)?.contained)
}

/// Whether `Q(D) = ∅` for every database: the rewriting has no disjunct.
pub fn is_unsatisfiable(q: &Omq, budget: usize) -> Result<bool, ContainError> {
    require_rewritable(q)?;
    let options = RewriteOptions {
        budget,
        trace: false,
    };
    Ok(xrewrite_with(q, options)?.ucq.is_empty())
}

fn check_tuple(q: &Omq, tuple: &[Constant]) -> Result<(), ContainError> {
    if tuple.len() != q.arity() {
        return Err(ContainError::ArityMismatch {
            expected: q.arity(),
            found: tuple.len(),
        });
    }
    Ok(())
}

/// `(Q1, Q2)` over the schema `S ∪ sch(Σ)` with `c̄ ∈ Q(D)` iff `Q1 ⊆ Q2`.
///
/// `Q1` has no tgds and queries the atoms of `D` over `S`, with every
/// constant that does not occur in `Σ` or `q` turned into a variable;
/// `Q2` is `Q` over the larger schema.
pub fn eval_to_containment(
    q: &Omq,
    d: &Database,
    tuple: &[Constant],
) -> Result<(Omq, Omq), ContainError> {
    check_tuple(q, tuple)?;
    let d = restrict_to_data(q, d);
    let kept = q.constants();
    let domain = d.constants();
    let lift = |c: &Constant| {
        if kept.contains(c) {
            Term::Constant(c.clone())
        } else {
            Term::variable(format!("x_{}", c.name()))
        }
    };
    for c in tuple {
        if !kept.contains(c) && !domain.contains(c) {
            return Err(ContainError::ConstantOutsideDomain(c.name().to_string()));
        }
    }
    let body: Vec<Atom> = d
        .iter()
        .map(|a| {
            a.map_terms(|t| match t {
                Term::Constant(c) => lift(c),
                other => other.clone(),
            })
        })
        .collect();
    let answer: Vec<Term> = tuple.iter().map(lift).collect();
    let cq = Cq::new(answer, body).expect("answer constants come from the body");
    let schema = q
        .data_schema()
        .union(&schema_of_tgds(q.tgds()).expect("validated OMQ"))
        .expect("validated OMQ");
    let q1 = Omq::new(schema.clone(), Vec::new(), Ucq::from(cq)).expect("schema covers D");
    let q2 = Omq::new(schema, q.tgds().to_vec(), q.query().clone()).expect("validated OMQ");
    Ok((q1, q2))
}

/// Names not yet taken, extended with primes until unique.
struct Names {
    taken: BTreeSet<String>,
}

impl Names {
    fn of(q: &Omq) -> Self {
        let mut taken: BTreeSet<String> =
            q.full_schema().predicates().map(|p| p.name().to_string()).collect();
        taken.extend(q.query().predicates().iter().map(|p| p.name().to_string()));
        Names { taken }
    }

    fn fresh(&mut self, base: &str) -> String {
        let mut name = base.to_string();
        while self.taken.contains(&name) {
            name.push('\'');
        }
        self.taken.insert(name.clone());
        name
    }
}

/// Instantiates the answer terms of `q` with `tuple`; `None` when a
/// constant or a repeated variable disagrees with the tuple.
fn instantiate(q: &Cq, tuple: &[Constant]) -> Option<Cq> {
    let mut bind: BTreeMap<Variable, Constant> = BTreeMap::new();
    for (t, c) in q.answer().iter().zip(tuple) {
        match t {
            Term::Variable(v) => {
                if let Some(prev) = bind.insert(v.clone(), c.clone()) {
                    if &prev != c {
                        return None;
                    }
                }
            }
            Term::Constant(k) if k == c => {}
            _ => return None,
        }
    }
    let body: Vec<Atom> = q
        .body()
        .iter()
        .map(|a| {
            a.map_terms(|t| match t.as_variable().and_then(|v| bind.get(v)) {
                Some(c) => Term::Constant(c.clone()),
                None => t.clone(),
            })
        })
        .collect();
    Some(Cq::new(Vec::new(), body).expect("Boolean"))
}

/// `(Q1, Q2)` with `c̄ ∈ Q(D)` iff `Q1 ⊄ Q2`.
///
/// Every predicate of `Σ`, `q` and `D` is renamed apart from `S`, `D` is
/// added as fact tgds, and the query is `q(c̄)`; so `Q1` ignores its input
/// and holds exactly when `c̄ ∈ Q(D)`. `Q2` asks for a predicate outside `S`
/// that nothing derives.
pub fn coeval_to_cocontainment(
    q: &Omq,
    d: &Database,
    tuple: &[Constant],
) -> Result<(Omq, Omq), ContainError> {
    check_tuple(q, tuple)?;
    let d = restrict_to_data(q, d);
    let mut names = Names::of(q);
    let mut star: BTreeMap<Predicate, Predicate> = BTreeMap::new();
    let mut preds: BTreeSet<Predicate> = q.full_schema().predicates().collect();
    preds.extend(q.query().predicates());
    for p in preds {
        let name = names.fresh(&format!("{}_star", p.name()));
        star.insert(p.clone(), Predicate::new(name, p.arity()));
    }
    let rename = |p: &Predicate| star[p].clone();
    let mut tgds: Vec<Tgd> = q.tgds().iter().map(|t| t.map_predicates(rename)).collect();
    for a in d.iter() {
        let head = a.with_predicate(rename(a.predicate())).expect("same arity");
        tgds.push(Tgd::new(Vec::new(), vec![head]).expect("non-empty head"));
    }
    let disjuncts: Vec<Cq> = q
        .query()
        .disjuncts()
        .iter()
        .filter_map(|cq| instantiate(cq, tuple))
        .map(|cq| cq.map_predicates(rename))
        .collect();
    let query = if disjuncts.is_empty() {
        Ucq::empty(0)
    } else {
        Ucq::new(disjuncts).expect("Boolean disjuncts")
    };
    let s = q.data_schema().clone();
    let q1 = Omq::new(s.clone(), tgds, query).expect("renamed predicates are fresh");
    let goal = Predicate::new(names.fresh("Goal"), 1);
    let x = Term::variable("X");
    let never = Cq::new(Vec::new(), [Atom::new(goal, vec![x]).unwrap()]).unwrap();
    let q2 = Omq::new(s, Vec::new(), Ucq::from(never)).expect("fresh predicate");
    Ok((q1, q2))
}

fn annotate(a: &Atom, p: &Predicate, w: Term) -> Atom {
    let mut args = a.args().to_vec();
    args.push(w);
    Atom::new(p.clone(), args).expect("annotated arity")
}

/// An equivalent OMQ whose query is a single CQ.
///
/// Each predicate gains an annotation position: `1` marks atoms derived
/// from the database, `0` marks a canned model of every disjunct in which
/// the query trivially holds. The CQ picks one annotation per disjunct and
/// chains them through `Or` so that at least one disjunct is matched
/// against real data. Data predicates are first copied to fresh names so
/// that no data predicate occurs in a rule head.
///
/// For non-Boolean queries a false disjunct has its answer positions set
/// to a wildcard constant, and `Sel(u, a, w)` ties the disjunct's answer
/// term `u` to the common answer `a`: `u = a` when `w = 1`, `u` the
/// wildcard when `w = 0`; `Dom` collects the constants answers range over.
pub fn ucq_omq_to_cq_omq(q: &Omq) -> Omq {
    let s = q.data_schema().clone();
    if q.query().disjuncts().iter().any(|d| d.is_truth() && d.is_boolean()) {
        return Omq::new(s, q.tgds().to_vec(), Ucq::from(Cq::truth())).expect("validated OMQ");
    }
    let mut names = Names::of(q);
    let one = Term::constant("1");
    let zero = Term::constant("0");
    let m = q.arity();

    let mut star: BTreeMap<Predicate, Predicate> = BTreeMap::new();
    for p in s.predicates() {
        let name = names.fresh(&format!("{}_star", p.name()));
        star.insert(p.clone(), Predicate::new(name, p.arity()));
    }
    let rename = |p: &Predicate| star.get(p).cloned().unwrap_or_else(|| p.clone());
    let mut sigma: Vec<Tgd> = q.tgds().iter().map(|t| t.map_predicates(rename)).collect();
    for (p, ps) in &star {
        let xs: Vec<Term> = (0..p.arity()).map(|i| Term::variable(format!("X{i}"))).collect();
        sigma.push(
            Tgd::new(
                vec![Atom::new(p.clone(), xs.clone()).unwrap()],
                vec![Atom::new(ps.clone(), xs).unwrap()],
            )
            .unwrap(),
        );
    }
    let disjuncts: Vec<Cq> = q
        .query()
        .disjuncts()
        .iter()
        .map(|d| d.map_predicates(rename))
        .collect();

    let mut preds: BTreeSet<Predicate> = s.predicates().collect();
    for t in &sigma {
        preds.extend(t.predicates());
    }
    for d in &disjuncts {
        preds.extend(d.predicates());
    }
    let mut prime: BTreeMap<Predicate, Predicate> = BTreeMap::new();
    for p in preds {
        let name = names.fresh(&format!("{}'", p.name()));
        prime.insert(p.clone(), Predicate::new(name, p.arity() + 1));
    }
    let primed = |a: &Atom, w: &Term| annotate(a, &prime[a.predicate()], w.clone());

    let truth = Predicate::new(names.fresh("True"), 1);
    let falsity = Predicate::new(names.fresh("False"), 1);
    let or = Predicate::new(names.fresh("Or"), 3);
    let dom = Predicate::new(names.fresh("Dom"), 1);
    let sel = Predicate::new(names.fresh("Sel"), 3);
    let constants = q.constants();
    let wildcard = Term::Constant(
        (0..)
            .map(|i| Constant::new(if i == 0 { "star".to_string() } else { format!("star{i}") }))
            .find(|c| !constants.contains(c))
            .unwrap(),
    );
    let mk = |p: &Predicate, args: Vec<Term>| Atom::new(p.clone(), args).expect("gadget arity");

    let mut out: Vec<Tgd> = Vec::new();
    // Database atoms carry annotation 1.
    for p in s.predicates() {
        let xs: Vec<Term> = (0..p.arity()).map(|i| Term::variable(format!("X{i}"))).collect();
        let a = Atom::new(p.clone(), xs).unwrap();
        out.push(
            Tgd::new(
                vec![a.clone()],
                vec![primed(&a, &one), mk(&truth, vec![one.clone()])],
            )
            .unwrap(),
        );
    }
    // The canned false model of every disjunct and the Or table.
    let t = Term::variable("T");
    let mut head: Vec<Atom> = Vec::new();
    for (i, d) in disjuncts.iter().enumerate() {
        let answer = d.answer_variables();
        let vars: Vec<Variable> = d.variables().into_iter().collect();
        let map: BTreeMap<&Variable, Term> = vars
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let image = if answer.contains(v) {
                    wildcard.clone()
                } else {
                    Term::variable(format!("F{i}_{k}"))
                };
                (v, image)
            })
            .collect();
        for a in d.body() {
            let copy = a.map_terms(|t| match t.as_variable() {
                Some(v) => map[v].clone(),
                None => t.clone(),
            });
            head.push(primed(&copy, &zero));
        }
    }
    for (a, b, c) in [
        (&t, &t, &t),
        (&t, &zero, &t),
        (&zero, &t, &t),
        (&zero, &zero, &zero),
    ] {
        head.push(mk(&or, vec![a.clone(), b.clone(), c.clone()]));
    }
    head.push(mk(&falsity, vec![zero.clone()]));
    out.push(Tgd::new(vec![mk(&truth, vec![t.clone()])], head).unwrap());
    // The rules, carrying the annotation of their body.
    let needs_truth_fact =
        sigma.iter().any(Tgd::is_fact) || disjuncts.iter().any(|d| d.is_truth());
    for r in &sigma {
        if r.is_fact() {
            let head = r.head().iter().map(|a| primed(a, &one)).collect();
            out.push(Tgd::new(Vec::new(), head).unwrap());
            continue;
        }
        let vars = r.variables();
        let w = (0..)
            .map(|i| Variable::new(if i == 0 { "W".to_string() } else { format!("W{i}") }))
            .find(|v| !vars.contains(v))
            .unwrap();
        let w = Term::Variable(w);
        let body = r.body().iter().map(|a| primed(a, &w)).collect();
        let head = r.head().iter().map(|a| primed(a, &w)).collect();
        out.push(Tgd::new(body, head).unwrap());
    }
    if needs_truth_fact {
        out.push(Tgd::new(Vec::new(), vec![mk(&truth, vec![one.clone()])]).unwrap());
    }
    if m > 0 {
        for p in s.predicates() {
            if p.arity() == 0 {
                continue;
            }
            let xs: Vec<Term> = (0..p.arity()).map(|i| Term::variable(format!("X{i}"))).collect();
            let head = xs.iter().map(|x| mk(&dom, vec![x.clone()])).collect();
            out.push(Tgd::new(vec![Atom::new(p.clone(), xs).unwrap()], head).unwrap());
        }
        if !constants.is_empty() {
            let head = constants
                .iter()
                .map(|c| mk(&dom, vec![Term::Constant(c.clone())]))
                .collect();
            out.push(Tgd::new(vec![mk(&truth, vec![t.clone()])], head).unwrap());
        }
        let a = Term::variable("A");
        out.push(
            Tgd::new(
                vec![mk(&dom, vec![a.clone()])],
                vec![
                    mk(&sel, vec![a.clone(), a.clone(), one.clone()]),
                    mk(&sel, vec![wildcard.clone(), a.clone(), zero.clone()]),
                ],
            )
            .unwrap(),
        );
    }

    let y = |i: usize| Term::variable(format!("Y{i}"));
    let answers: Vec<Term> = (0..m).map(|j| Term::variable(format!("A{j}"))).collect();
    let mut body = vec![mk(&falsity, vec![y(0)])];
    for (i, d) in disjuncts.iter().enumerate() {
        let x = Term::variable(format!("X{i}"));
        let vars: Vec<Variable> = d.variables().into_iter().collect();
        let map: BTreeMap<&Variable, Term> = vars
            .iter()
            .enumerate()
            .map(|(k, v)| (v, Term::variable(format!("Q{i}_{k}"))))
            .collect();
        let ren = |t: &Term| match t.as_variable() {
            Some(v) => map[v].clone(),
            None => t.clone(),
        };
        for a in d.body() {
            body.push(primed(&a.map_terms(ren), &x));
        }
        for (j, u) in d.answer().iter().enumerate() {
            match u {
                Term::Constant(_) => {
                    let v = Term::variable(format!("C{i}_{j}"));
                    body.push(mk(&sel, vec![v.clone(), answers[j].clone(), x.clone()]));
                    body.push(mk(&sel, vec![v, u.clone(), x.clone()]));
                }
                _ => body.push(mk(&sel, vec![ren(u), answers[j].clone(), x.clone()])),
            }
        }
        body.push(mk(&or, vec![y(i), x, y(i + 1)]));
    }
    body.push(mk(&truth, vec![y(disjuncts.len())]));
    let cq = Cq::new(answers, body).expect("answers occur in Sel atoms");
    Omq::new(s, out, Ucq::from(cq)).expect("fresh gadget predicates")
}

/// The classes among linear, guarded, non-recursive and sticky that hold
/// for `before` but not for `after`.
pub fn lost_classes(before: &[Tgd], after: &[Tgd]) -> Vec<&'static str> {
    let flags = |r: &ClassReport| {
        [
            ("linear", r.linear),
            ("guarded", r.guarded),
            ("non-recursive", r.non_recursive),
            ("sticky", r.sticky),
        ]
    };
    let (b, a) = (classify(before), classify(after));
    flags(&b)
        .into_iter()
        .zip(flags(&a))
        .filter(|((_, was), (_, is))| *was && !*is)
        .map(|((name, _), _)| name)
        .collect()
}

/// `q ⊆ p` as plain CQs: the frozen answer of `q` is an answer of `p` on
/// the frozen body of `q`.
fn cq_contained(q: &Cq, p: &Cq) -> bool {
    let (d, tuple) = freeze_cq(q);
    cq_holds(p, d.instance(), &tuple)
}

/// An equivalent subquery with no redundant atom.
pub fn core_of(q: &Cq) -> Cq {
    let mut current = q.clone();
    loop {
        let smaller = current.body().iter().find_map(|a| {
            let rest: Vec<Atom> = current.body().iter().filter(|b| *b != a).cloned().collect();
            Cq::new(current.answer().to_vec(), rest)
                .ok()
                .filter(|r| cq_contained(r, &current))
        });
        match smaller {
            Some(r) => current = r,
            None => return current,
        }
    }
}

/// The disjuncts of `u` that are not contained in another disjunct, one
/// per class of mutually contained disjuncts.
pub fn maximal_disjuncts(u: &Ucq) -> Vec<Cq> {
    let ds = u.disjuncts();
    (0..ds.len())
        .filter(|&i| {
            !(0..ds.len()).any(|j| {
                j != i && cq_contained(&ds[i], &ds[j]) && (j < i || !cq_contained(&ds[j], &ds[i]))
            })
        })
        .map(|i| ds[i].clone())
        .collect()
}

/// Result of [`brute_force_contains`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BruteForceVerdict {
    pub verdict: ContainmentVerdict,
    /// The enumeration covered every database that can witness
    /// non-containment, so the verdict is a decision and not a bound.
    pub exact: bool,
    pub databases_checked: u64,
    /// The constants the databases range over.
    pub constants: Vec<Constant>,
}

fn oracle(q: &Omq) -> Result<PreparedOmq, ContainError> {
    let strategy = if is_non_recursive(q.tgds()) {
        Strategy::Chase
    } else {
        Strategy::Rewriting
    };
    Ok(PreparedOmq::new(q, strategy)?)
}

/// Whether `d` is the least of its images under permutations of `fresh`.
fn is_canonical(d: &Database, fresh: &[Constant], perms: &[Vec<usize>]) -> bool {
    let index: BTreeMap<&Constant, usize> = fresh.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let own: Vec<&Atom> = d.iter().collect();
    perms.iter().all(|perm| {
        let image: BTreeSet<Atom> = d
            .iter()
            .map(|a| {
                a.map_terms(|t| match t.as_constant().and_then(|c| index.get(c)) {
                    Some(&i) => Term::Constant(fresh[perm[i]].clone()),
                    None => t.clone(),
                })
            })
            .collect();
        own.iter().copied().cmp(image.iter()) != std::cmp::Ordering::Greater
    })
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for n in 0..k {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..=n).map(move |pos| {
                    let mut q = p.clone();
                    q.insert(pos, n);
                    q
                })
            })
            .collect();
    }
    out
}

/// Fresh constants needed to freeze the core of every maximal disjunct of
/// the rewriting of `q`.
fn constants_needed(q: &Omq) -> Result<usize, ContainError> {
    let r = xrewrite_with(q, RewriteOptions::default())?;
    Ok(maximal_disjuncts(&r.ucq)
        .iter()
        .map(|d| core_of(d).variables().len())
        .max()
        .unwrap_or(0))
}

/// The least `(max_constants, max_atoms)` for which
/// [`brute_force_contains`] on `q1` and `q2` is exact.
pub fn exact_oracle_bounds(q1: &Omq, q2: &Omq) -> Result<(usize, usize), ContainError> {
    check_compatible(q1, q2)?;
    require_rewritable(q1)?;
    let k = constants_needed(q1)?;
    let mut named: BTreeSet<Constant> = q1.constants();
    named.extend(q2.constants());
    let mut constants = fresh_constants(k, &named);
    constants.extend(named);
    let ground = ground_atoms(q1.data_schema(), &constants).len() as u64;
    let bound = witness_bound(q1)?.value;
    Ok((k, bound.min(ground) as usize))
}

/// Largest constant count for which isomorphic databases are skipped.
const MAX_PRUNED_CONSTANTS: usize = 6;

/// Decides `Q1 ⊆ Q2` on every `S`-database with at most `max_atoms` atoms
/// over `max_constants` fresh constants plus the constants of both OMQs.
///
/// Evaluation uses the chase for non-recursive tgds and rewriting
/// otherwise. The verdict is exact when the atom bound reaches the witness
/// bound of `Q1` (or covers all ground atoms) and the constants suffice to
/// freeze the core of every maximal disjunct of the rewriting of `Q1`.
pub fn brute_force_contains(
    q1: &Omq,
    q2: &Omq,
    max_constants: usize,
    max_atoms: usize,
) -> Result<BruteForceVerdict, ContainError> {
    check_compatible(q1, q2)?;
    let left = oracle(q1)?;
    let right = oracle(q2)?;
    let mut named: BTreeSet<Constant> = q1.constants();
    named.extend(q2.constants());
    let fresh = fresh_constants(max_constants, &named);
    let mut constants = fresh.clone();
    constants.extend(named.iter().cloned());
    let enumeration = enumerate_databases_over(q1.data_schema(), &constants, max_atoms)?;
    let ground = enumeration.ground_atoms().len();

    let prune = named.is_empty() && max_constants <= MAX_PRUNED_CONSTANTS;
    let perms = if prune { permutations(max_constants) } else { Vec::new() };

    let exact = {
        let atoms_ok = max_atoms >= ground
            || witness_bound(q1).is_ok_and(|b| max_atoms as u64 >= b.value);
        atoms_ok && constants_needed(q1).is_ok_and(|k| max_constants >= k)
    };

    let mut checked = 0u64;
    for d in enumeration {
        if prune && !is_canonical(&d, &fresh, &perms) {
            continue;
        }
        checked += 1;
        for tuple in left.answers(&d) {
            if !right.holds(&d, &tuple) {
                return Ok(BruteForceVerdict {
                    verdict: ContainmentVerdict::fails(d, tuple),
                    exact,
                    databases_checked: checked,
                    constants,
                });
            }
        }
    }
    Ok(BruteForceVerdict {
        verdict: ContainmentVerdict::holds(),
        exact,
        databases_checked: checked,
        constants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{certain_answers, eval_membership};
    use crate::parser::{parse_database, parse_program};
    use crate::rewrite::DEFAULT_BUDGET;

    const RUNNING: &str = "
        schema { R/2, P/1, T/1 }
        data { P, T }
        tgds sigma {
            P(x) -> exists y . R(x, y).
            R(x, y) -> P(y).
            T(x) -> P(x).
        }
        query sigma/q(x) :- R(x, y), P(y).
        tgds none { }
        query none/u(x) :- P(x).
        query none/u(x) :- T(x).
    ";

    fn c(n: &str) -> Constant {
        Constant::new(n)
    }

    #[test]
    fn running_example_equivalence() {
        let p = parse_program(RUNNING).unwrap();
        let q1 = p.omq("q").unwrap();
        let q2 = p.omq("u").unwrap();
        assert!(contains(&q1, &q2, DEFAULT_BUDGET).unwrap().contained);
        assert!(contains(&q2, &q1, DEFAULT_BUDGET).unwrap().contained);
        assert!(equivalent(&q1, &q2, DEFAULT_BUDGET).unwrap());
    }

    #[test]
    fn counterexample_is_frozen_disjunct() {
        let p = parse_program(
            "schema { P/1, T/1 }
             tgds t { T(x) -> P(x). }
             tgds none { }
             query t/q1(x) :- P(x).
             query none/q2(x) :- P(x).",
        )
        .unwrap();
        let q1 = p.omq("q1").unwrap();
        let q2 = p.omq("q2").unwrap();
        let v = contains(&q1, &q2, DEFAULT_BUDGET).unwrap();
        assert!(!v.contained);
        let cx = v.counterexample.unwrap();
        assert_eq!(cx.database.len(), 1);
        assert_eq!(cx.database.iter().next().unwrap().predicate().name(), "T");
        assert!(eval_membership(&q1, &cx.database, &cx.tuple).unwrap());
        assert!(!eval_membership(&q2, &cx.database, &cx.tuple).unwrap());
        let b = brute_force_contains(&q1, &q2, 1, 1).unwrap();
        assert!(!b.verdict.contained && b.exact);
        let bx = b.verdict.counterexample.unwrap();
        assert_eq!(bx.database.iter().next().unwrap().predicate().name(), "T");
    }

    #[test]
    fn dropping_a_disjunct_breaks_equivalence() {
        let p = parse_program(
            "schema { P/1, T/1 }
             query a(x) :- P(x).
             query a(x) :- T(x).
             query b(x) :- P(x).",
        )
        .unwrap();
        let a = p.omq("a").unwrap();
        let b = p.omq("b").unwrap();
        assert!(!equivalent(&a, &b, DEFAULT_BUDGET).unwrap());
        assert!(contains(&b, &a, DEFAULT_BUDGET).unwrap().contained);
    }

    #[test]
    fn schema_mismatch() {
        let p = parse_program(
            "schema { P/1, T/1 }
             query a(x) :- P(x).
             query b() :- P(x).",
        )
        .unwrap();
        let e = contains(&p.omq("a").unwrap(), &p.omq("b").unwrap(), DEFAULT_BUDGET);
        assert!(matches!(e, Err(ContainError::SchemaMismatch(_))));
    }

    #[test]
    fn unsatisfiability() {
        let p = parse_program(
            "schema { P/1, Hidden/1 }
             data { P }
             tgds t { P(x) -> G(x). }
             query h() :- Hidden(x).
             query p(x) :- P(x).
             query t/g() :- G(x).",
        )
        .unwrap();
        assert!(is_unsatisfiable(&p.omq("h").unwrap(), DEFAULT_BUDGET).unwrap());
        assert!(!is_unsatisfiable(&p.omq("p").unwrap(), DEFAULT_BUDGET).unwrap());
        assert!(!is_unsatisfiable(&p.omq("g").unwrap(), DEFAULT_BUDGET).unwrap());
    }

    #[test]
    fn eval_reduction_examples() {
        let p = parse_program(
            "schema { P/1, R/2 }
             query p(x) :- P(x).
             query r(x) :- R(u, x).",
        )
        .unwrap();
        let cases = [
            ("p", "P(a).", "a", true),
            ("r", "R(a, b).", "b", true),
            ("p", "R(a, b).", "a", false),
        ];
        for (name, db, t, expected) in cases {
            let q = p.omq(name).unwrap();
            let d = parse_database(db).unwrap();
            let tuple = vec![c(t)];
            assert_eq!(eval_membership(&q, &d, &tuple).unwrap(), expected);
            let (q1, q2) = eval_to_containment(&q, &d, &tuple).unwrap();
            assert_eq!(contains(&q1, &q2, DEFAULT_BUDGET).unwrap().contained, expected);
        }
        let q = p.omq("p").unwrap();
        let (q1, _) = eval_to_containment(&q, &parse_database("P(a).").unwrap(), &[c("a")]).unwrap();
        let body = &q1.query().disjuncts()[0];
        assert_eq!(body.answer(), &[Term::variable("x_a")]);
        assert!(matches!(
            eval_to_containment(&q, &parse_database("P(a).").unwrap(), &[c("z")]),
            Err(ContainError::ConstantOutsideDomain(_))
        ));
    }

    #[test]
    fn coeval_reduction_examples() {
        let p = parse_program(
            "schema { P/1 }
             query b() :- P(x).
             query never() :- P(x), Q(x).",
        )
        .unwrap();
        let q = p.omq("b").unwrap();
        let d = parse_database("P(a).").unwrap();
        let (q1, q2) = coeval_to_cocontainment(&q, &d, &[]).unwrap();
        assert!(q1.tgds().iter().any(Tgd::is_fact));
        assert!(!contains(&q1, &q2, DEFAULT_BUDGET).unwrap().contained);
        let (q1, q2) = coeval_to_cocontainment(&q, &Database::empty(), &[]).unwrap();
        assert!(contains(&q1, &q2, DEFAULT_BUDGET).unwrap().contained);
        let never = p.omq("never").unwrap();
        let (q1, q2) = coeval_to_cocontainment(&never, &d, &[]).unwrap();
        assert!(contains(&q1, &q2, DEFAULT_BUDGET).unwrap().contained);
    }

    fn answers_agree(q: &Omq, g: &Omq, dbs: &[&str]) {
        for db in dbs {
            let d = parse_database(db).unwrap();
            assert_eq!(
                certain_answers(q, &d, Strategy::Auto).unwrap(),
                certain_answers(g, &d, Strategy::Chase).unwrap(),
                "database {db}"
            );
        }
    }

    #[test]
    fn or_gadget_on_two_disjuncts() {
        let p = parse_program(
            "schema { P/1, T/1 }
             query u(x) :- P(x).
             query u(x) :- T(x).",
        )
        .unwrap();
        let q = p.omq("u").unwrap();
        let g = ucq_omq_to_cq_omq(&q);
        assert_eq!(g.query().len(), 1);
        assert!(g.constants().contains(&c("0")) && g.constants().contains(&c("1")));
        assert!(g.tgds().iter().any(|t| t.head().iter().any(|a| a.predicate().name() == "Or")));
        answers_agree(&q, &g, &["P(a).", "T(a).", "P(a). T(b).", ""]);
    }

    #[test]
    fn or_gadget_boolean_linear() {
        let p = parse_program(
            "schema { P/1, T/1 }
             tgds t { T(x) -> exists y . R(x, y). }
             query t/u() :- R(x, y).
             query t/u() :- P(x), P(y).",
        )
        .unwrap();
        let q = p.omq("u").unwrap();
        let g = ucq_omq_to_cq_omq(&q);
        assert!(classify(g.tgds()).linear);
        assert!(lost_classes(q.tgds(), g.tgds()).is_empty());
        answers_agree(&q, &g, &["", "P(a).", "T(a).", "P(a). T(b)."]);
    }

    #[test]
    fn or_gadget_single_disjunct_with_constants() {
        let p = parse_program(
            "schema { R/2 }
             query u(x, k) :- R(x, x).",
        )
        .unwrap();
        let q = p.omq("u").unwrap();
        let g = ucq_omq_to_cq_omq(&q);
        answers_agree(&q, &g, &["R(a, a).", "R(a, b).", "R(a, a). R(b, b).", "R(k, k)."]);
    }

    #[test]
    fn brute_force_reflexive_and_exact() {
        let p = parse_program(
            "schema { R/2, P/1 }
             tgds t { R(x, y) -> P(x). }
             query t/q(x) :- P(x), R(x, y).",
        )
        .unwrap();
        let q = p.omq("q").unwrap();
        let b = brute_force_contains(&q, &q, 2, 2).unwrap();
        assert!(b.verdict.contained);
        assert!(b.exact);
        let b = brute_force_contains(&q, &q, 2, 1).unwrap();
        assert!(!b.exact);
    }

    #[test]
    fn permutations_are_complete() {
        assert_eq!(permutations(3).len(), 6);
        let set: BTreeSet<Vec<usize>> = permutations(4).into_iter().collect();
        assert_eq!(set.len(), 24);
    }
}

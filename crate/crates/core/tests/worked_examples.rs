//! Small worked examples through the public API, one test per operation.
//! Expected values are either read off the running example or computed by
//! hand in the comments.

use omq_core::apps::{components, cq_components, distributes, DisjunctWitness};
use omq_core::chase::{chase, chase_bounded, chase_nr, chase_step, find_triggers, normalize_tgds, satisfies};
use omq_core::classify::{classify, is_guarded, is_linear, is_non_recursive, is_sticky, marked_variables, stratify};
use omq_core::contain::{contains, eval_to_containment, coeval_to_cocontainment, is_unsatisfiable, ucq_omq_to_cq_omq};
use omq_core::eval::{certain_answers, evaluate_cq, evaluate_ucq, eval_membership, PreparedOmq, Strategy};
use omq_core::model::{freeze_cq, NullGenerator, NullId};
use omq_core::parser::{parse_cq, parse_database, parse_program, parse_tgds, parse_ucq};
use omq_core::rewrite::{
    factorize_step, is_applicable, is_factorizable, isomorphic, mgu, rewrite_step, witness_bounds, xrewrite,
    DEFAULT_BUDGET,
};
use omq_core::testkit::{database_count, enumerate_databases, sticky_family};
use omq_core::{Atom, Constant, Database, Instance, Omq, Substitution, Term, Variable};
use omq_core::classify::RewritableClass;

const RUNNING: &str = "
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
";

fn running() -> Omq {
    parse_program(RUNNING).unwrap().omq("q").unwrap()
}

fn tuple(names: &[&str]) -> Vec<Constant> {
    names.iter().map(Constant::new).collect()
}

fn db(text: &str) -> Database {
    parse_database(text).unwrap()
}

fn omq(text: &str, name: &str) -> Omq {
    parse_program(text).unwrap().omq(name).unwrap()
}

#[test]
fn substitutions() {
    let var = |n: &str| Variable::new(n);
    let s = Substitution::from_bindings([(var("x"), Term::variable("y")), (var("y"), Term::variable("z"))]);
    let r = Atom::from_name("R", vec![Term::variable("x"), Term::variable("y")]);
    assert_eq!(s.normalized().apply_atom(&r).to_string(), "R(z,z)");
    let first = Substitution::from_bindings([(var("x"), Term::variable("y"))]);
    let then = Substitution::from_bindings([(var("y"), Term::constant("a"))]);
    let c = first.compose(&then);
    assert_eq!(c.get(&var("x")), Some(&Term::constant("a")));
    assert_eq!(c.get(&var("y")), Some(&Term::constant("a")));
}

#[test]
fn freezing() {
    let (d, t) = freeze_cq(&parse_cq("q(x) :- R(x, x)").unwrap());
    assert_eq!(d.len(), 1);
    let a = d.iter().next().unwrap();
    assert_eq!(a.args()[0], a.args()[1]);
    assert_eq!(Term::Constant(t[0].clone()), a.args()[0]);
    let (d, t) = freeze_cq(&parse_cq("q() :- P(a)").unwrap());
    assert_eq!((d.iter().next().unwrap().to_string(), t.len()), ("P(a)".to_string(), 0));
    let instance = Instance::new([Atom::from_name("R", vec![Term::constant("a"), Term::Null(NullId(1))])]).unwrap();
    assert_eq!(instance.active_domain().len(), 2);
}

#[test]
fn classification_of_the_running_example() {
    let r = classify(running().tgds());
    assert!(r.linear && r.guarded && r.sticky && !r.non_recursive && !r.full);
    let guard = parse_tgds("R(x, y), P(y) -> S(x).").unwrap();
    assert!(is_guarded(&guard));
    assert!(!is_guarded(&parse_tgds("R(x, y), R(y, z) -> S(x, z).").unwrap()));
    assert!(!is_linear(&parse_tgds("true -> exists z . P(z).").unwrap()));
    assert!(!is_sticky(&parse_tgds("R(x, y), R(y, z) -> S(x).").unwrap()));
    assert!(is_non_recursive(&parse_tgds("A(x) -> B(x). B(x) -> C(x).").unwrap()));
    assert!(!is_non_recursive(&parse_tgds("P(x) -> P(x).").unwrap()));
    let cycle = stratify(running().tgds()).unwrap_err();
    assert_eq!(cycle.cycle.first(), cycle.cycle.last());
    // R(x, y) -> P(y): only x is missing from the head, nothing propagates.
    let m = marked_variables(&parse_tgds("R(x, y) -> P(y).").unwrap());
    assert_eq!(m.len(), 1);
    assert!(m.is_marked(0, &Variable::new("x")));
    assert!(marked_variables(&parse_tgds("R(x, y) -> S(x, y).").unwrap()).is_empty());
    let family = classify(sticky_family(3).tgds());
    assert!(family.sticky && !family.linear);
}

#[test]
fn normal_form_preserves_the_chase() {
    // B(a) chased with the original and the normalized rules agree on the
    // original predicates.
    let tgds = parse_tgds("B(x) -> exists z . S(x, z), T(z).").unwrap();
    let normal = normalize_tgds(&tgds);
    assert!(normal.len() >= 2);
    let d = db("B(a).");
    let project = |i: &Instance| -> Vec<String> {
        i.iter()
            .filter(|a| ["B", "S", "T"].contains(&a.predicate().name()))
            .map(|a| a.predicate().name().to_string())
            .collect()
    };
    let original = chase_nr(&d, &tgds).unwrap().instance;
    let normalized = chase_nr(&d, &normal).unwrap().instance;
    assert_eq!(project(&original), project(&normalized));
}

#[test]
fn chase_examples() {
    let tgds = parse_tgds("R(x, y), R(y, z) -> S(x, z).").unwrap();
    let i = db("R(a, b). R(b, c).").into_instance();
    let triggers = find_triggers(&i, &tgds[0]);
    assert_eq!(triggers.len(), 1);
    let next = chase_step(&i, &triggers[0], &mut NullGenerator::new()).unwrap();
    assert!(next.contains(&parse_database("S(a, c).").unwrap().iter().next().unwrap().clone()));

    let two_strata = parse_tgds("A(x) -> B(x). B(x) -> exists y . C(x, y).").unwrap();
    let r = chase_nr(&db("A(a)."), &two_strata).unwrap();
    assert_eq!(r.instance.len(), 3);
    assert!(r.complete && satisfies(&r.instance, &two_strata));

    let fact = parse_tgds("true -> exists z . P(z).").unwrap();
    assert_eq!(chase_nr(&Database::empty(), &fact).unwrap().instance.len(), 1);

    // Two levels of the running example from P(a): R(a,n1), then P(n1).
    let r = chase_bounded(&db("P(a)."), running().tgds(), 2);
    assert_eq!(r.instance.len(), 3);
    assert!(!r.complete);
    let r = chase(&db("R(a, b)."), &parse_tgds("R(x, y) -> P(x).").unwrap(), Some(5));
    assert!(r.complete);
    assert!(!satisfies(db("P(a).").instance(), &parse_tgds("P(x) -> exists y . R(x, y).").unwrap()));
}

#[test]
fn unification_and_steps() {
    let atoms: Vec<Atom> = parse_cq("q() :- R(x, a), R(b, y)").unwrap().body().iter().cloned().collect();
    let g = mgu(&atoms).unwrap();
    assert_eq!(g.apply_atom(&atoms[0]), g.apply_atom(&atoms[1]));
    assert_eq!(g.apply_atom(&atoms[0]).to_string(), "R(b,a)");
    let clash: Vec<Atom> = parse_cq("q() :- P(a), P(b)").unwrap().body().iter().cloned().collect();
    assert!(mgu(&clash).is_err());

    let q = parse_cq("q(x) :- R(x, y), P(y)").unwrap();
    let t = &parse_tgds("R(x, y) -> P(y).").unwrap()[0];
    let p_atom: Vec<Atom> = q.body().iter().filter(|a| a.predicate().name() == "P").cloned().collect();
    assert!(is_applicable(t, &p_atom, &q));
    let step = rewrite_step(&q, &p_atom, t, 1);
    assert!(isomorphic(&step, &parse_cq("q(x) :- R(x, y), R(z, y)").unwrap()));

    // The shared x sits at the existential position of R.
    let e = &parse_tgds("P(u, v) -> exists w . R(w, u).").unwrap()[0];
    let shared = parse_cq("q() :- R(x, y), R(x, z)").unwrap();
    let first: Vec<Atom> = shared.body().iter().take(1).cloned().collect();
    assert!(!is_applicable(e, &first, &shared));
    let single = parse_cq("q() :- R(x, y)").unwrap();
    let all: Vec<Atom> = single.body().iter().cloned().collect();
    assert!(is_applicable(e, &all, &single));

    let pair = parse_cq("q() :- R(x, y), R(x, z)").unwrap();
    let both: Vec<Atom> = pair.body().iter().cloned().collect();
    assert!(is_factorizable(&both, e, &pair));
    let full = &parse_tgds("P(u, v) -> R(v, u).").unwrap()[0];
    assert!(!is_factorizable(&both, full, &pair));
    assert!(isomorphic(&factorize_step(&pair, &both), &parse_cq("q() :- R(x, y)").unwrap()));
}

#[test]
fn rewriting_examples() {
    let r = xrewrite(&running()).unwrap();
    let expected = parse_ucq("q(x) :- P(x) | q(x) :- T(x)").unwrap();
    assert_eq!(r.ucq.len(), 2);
    for e in expected.disjuncts() {
        assert!(r.ucq.disjuncts().iter().any(|d| isomorphic(d, e)));
    }
    let chain = omq("schema { A/1, B/1 } tgds t { A(x) -> B(x). } query q(x) :- B(x).", "q");
    assert_eq!(xrewrite(&chain).unwrap().ucq.len(), 2);
    let fact = omq("schema { P/1 } tgds t { true -> exists z . P(z). } query q() :- P(y).", "q");
    assert!(xrewrite(&fact).unwrap().ucq.disjuncts()[0].is_truth());
}

#[test]
fn witness_bound_formulas() {
    let bounds = witness_bounds(&running());
    assert_eq!(bounds[0].formula, RewritableClass::Linear);
    assert_eq!(bounds[0].value, 2);
    // |q| = 1, max body 2, three predicates: 1 * 2^3.
    let nr = omq("schema { A/1, B/1, C/1 } tgds t { A(x), B(x) -> C(x). } query q(x) :- C(x).", "q");
    let b = witness_bounds(&nr);
    assert_eq!(b.iter().find(|b| b.formula == RewritableClass::NonRecursive).unwrap().value, 8);
    // |S| = 1, two terms, no constants, arity 2: 1 * 3^2.
    let sticky = omq(
        "schema { R/2, S/2 } data { R } tgds t { R(x, y), R(y, x) -> S(x, y). } query q() :- S(u, v).",
        "q",
    );
    let b = witness_bounds(&sticky);
    assert_eq!(b.iter().find(|b| b.formula == RewritableClass::Sticky).unwrap().value, 9);
}

#[test]
fn evaluation_examples() {
    let i = Instance::new([
        Atom::from_name("R", vec![Term::constant("a"), Term::constant("b")]),
        Atom::from_name("R", vec![Term::constant("b"), Term::Null(NullId(1))]),
    ])
    .unwrap();
    assert_eq!(evaluate_cq(&parse_cq("q(x) :- R(x, y)").unwrap(), &i).len(), 2);
    let nulls = Instance::new([Atom::from_name("P", vec![Term::Null(NullId(1))])]).unwrap();
    assert!(evaluate_cq(&parse_cq("q(x) :- P(x)").unwrap(), &nulls).is_empty());
    assert!(evaluate_cq(&parse_cq("q() :- R(x, y), R(y, x)").unwrap(), db("R(a, b).").instance()).is_empty());
    let u = parse_ucq("q(x) :- P(x) | q(x) :- T(x)").unwrap();
    assert_eq!(evaluate_ucq(&u, db("P(a). T(b).").instance()).len(), 2);

    assert_eq!(certain_answers(&running(), &db("P(a)."), Strategy::Auto).unwrap().len(), 1);
    assert!(eval_membership(&running(), &db("T(b)."), &tuple(&["b"])).unwrap());
    assert!(!eval_membership(&running(), &db("T(b)."), &tuple(&["c"])).unwrap());
    let nr = omq("schema { A/1, R/2 } data { A } tgds t { A(x) -> exists y . R(x, y). } query q() :- R(x, y).", "q");
    let chase = PreparedOmq::new(&nr, Strategy::Chase).unwrap().answers(&db("A(a)."));
    let rewriting = PreparedOmq::new(&nr, Strategy::Rewriting).unwrap().answers(&db("A(a)."));
    assert_eq!(chase, rewriting);
    assert_eq!(chase.len(), 1);
}

#[test]
fn containment_examples() {
    let p = parse_program(RUNNING).unwrap();
    let (q, u) = (p.omq("q").unwrap(), p.omq("u").unwrap());
    assert!(contains(&q, &u, DEFAULT_BUDGET).unwrap().contained);
    assert!(contains(&u, &q, DEFAULT_BUDGET).unwrap().contained);

    let text = "schema { P/1, T/1 } tgds t { T(x) -> P(x). } tgds none { } query t/l(x) :- P(x). query none/r(x) :- P(x).";
    let v = contains(&omq(text, "l"), &omq(text, "r"), DEFAULT_BUDGET).unwrap();
    assert!(!v.contained);
    let cx = v.counterexample.unwrap();
    assert_eq!(cx.database.iter().next().unwrap().predicate().name(), "T");

    let hidden = omq("schema { P/1 } data { P } query q() :- Hidden(x).", "q");
    assert!(is_unsatisfiable(&hidden, DEFAULT_BUDGET).unwrap());
    let derived = omq("schema { P/1, G/1 } data { P } tgds t { P(x) -> G(x). } query q() :- G(x).", "q");
    assert!(!is_unsatisfiable(&derived, DEFAULT_BUDGET).unwrap());
}

#[test]
fn reductions() {
    let q = omq("schema { R/2, P/1 } query q(x) :- R(u, x).", "q");
    let d = db("R(a, b).");
    for (t, expected) in [(tuple(&["b"]), true), (tuple(&["a"]), false)] {
        let (q1, q2) = eval_to_containment(&q, &d, &t).unwrap();
        assert_eq!(contains(&q1, &q2, DEFAULT_BUDGET).unwrap().contained, expected);
        let (q1, q2) = coeval_to_cocontainment(&q, &d, &t).unwrap();
        assert_eq!(contains(&q1, &q2, DEFAULT_BUDGET).unwrap().contained, !expected);
    }
    let boolean = omq("schema { P/1 } query q() :- P(x).", "q");
    let (q1, q2) = coeval_to_cocontainment(&boolean, &Database::empty(), &[]).unwrap();
    assert!(contains(&q1, &q2, DEFAULT_BUDGET).unwrap().contained);
}

#[test]
fn or_gadget_on_a_union() {
    let u = parse_program(RUNNING).unwrap().omq("u").unwrap();
    let g = ucq_omq_to_cq_omq(&u);
    assert_eq!(g.query().len(), 1);
    let left = PreparedOmq::new(&u, Strategy::Auto).unwrap();
    let right = PreparedOmq::new(&g, Strategy::Chase).unwrap();
    for d in ["P(a).", "T(a).", "P(a). T(b)."] {
        assert_eq!(left.answers(&db(d)), right.answers(&db(d)), "{d}");
    }
}

#[test]
fn component_examples() {
    let parts = components(db("R(a, b). P(b). T(c).").iter()).unwrap();
    assert_eq!(parts.iter().map(|p| p.len()).collect::<Vec<_>>(), vec![2, 1]);
    let q = parse_cq("q(x) :- P(x), T(z)").unwrap();
    assert_eq!(cq_components(&q).unwrap().iter().filter(|c| !c.is_safe()).count(), 1);
    let split = omq("schema { R/2, T/2 } query q() :- R(x, x), T(y, y).", "q");
    assert!(!distributes(&split, DEFAULT_BUDGET).unwrap().distributes);
    let collapse = omq("schema { P/1, T/1 } tgds t { T(x) -> P(x). } query q() :- P(x), P(y).", "q");
    let v = distributes(&collapse, DEFAULT_BUDGET).unwrap();
    assert!(matches!(v.witness(), Some(DisjunctWitness::Component(_))));
}

#[test]
fn enumeration_counts() {
    let p1 = omq("schema { P/1 } query q() :- P(x).", "q");
    assert_eq!(enumerate_databases(p1.data_schema(), 1, 1).unwrap().count(), 2);
    assert_eq!(enumerate_databases(p1.data_schema(), 2, 2).unwrap().count(), 4);
    // Four ground atoms over R/2 and two constants: 1 + 4 + 6.
    assert_eq!(database_count(4, 2), 11);
    let r = omq("schema { R/2 } query q() :- R(x, y).", "q");
    assert_eq!(enumerate_databases(r.data_schema(), 2, 2).unwrap().count(), 11);
}

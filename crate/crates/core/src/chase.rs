//! The restricted chase, and the head normal form of tgds.
//!
//! Triggers are applied in a fixed order: by tgd index, then by binding.
//! A trigger is applied only if its head has no image in the current
//! instance that extends the binding. Database atoms have level 0; an atom
//! produced by a trigger has level one more than the highest level among
//! the atoms the trigger's body maps to (a fact tgd produces level 1).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::classify::{stratify, NotStratifiable};
use crate::homomorphism::Matcher;
use crate::model::{
    Atom, Database, Instance, NullGenerator, Predicate, Substitution, Term, Tgd, Variable,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChaseError {
    #[error("trigger is not active: body image of {0} is not in the instance")]
    InactiveTrigger(String),
    #[error("the chase of a recursive tgd set needs a level bound ({0})")]
    Recursive(NotStratifiable),
}

/// A tgd together with a homomorphism from its body.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Trigger {
    pub tgd: Tgd,
    pub binding: Substitution,
}

impl fmt::Debug for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} with {:?}]", self.tgd, self.binding)
    }
}

impl Trigger {
    pub fn body_image(&self) -> BTreeSet<Atom> {
        self.binding.apply_atoms(self.tgd.body())
    }

    pub fn is_active(&self, instance: &Instance) -> bool {
        self.body_image().iter().all(|a| instance.contains(a))
    }

    /// Whether the head already has an image in `instance` extending the
    /// binding.
    pub fn is_satisfied(&self, instance: &Instance) -> bool {
        let head = self.binding.apply_atoms(self.tgd.head());
        Matcher::new(&head).exists(instance.atoms())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChaseResult {
    pub instance: Instance,
    /// Number of applied triggers.
    pub steps: usize,
    /// Whether the result satisfies every tgd.
    pub complete: bool,
    pub level_of: BTreeMap<Atom, usize>,
}

impl ChaseResult {
    pub fn max_level(&self) -> usize {
        self.level_of.values().copied().max().unwrap_or(0)
    }
}

/// Whether `t` has one head atom and at most one occurrence of an
/// existential variable.
pub fn is_normal(t: &Tgd) -> bool {
    if t.head().len() != 1 {
        return false;
    }
    let ex = t.existentials();
    t.head()[0]
        .args()
        .iter()
        .filter(|a| a.as_variable().is_some_and(|v| ex.contains(v)))
        .count()
        <= 1
}

/// The position of the existential variable in the head of a normal tgd.
pub fn existential_position(t: &Tgd) -> Option<usize> {
    let ex = t.existentials();
    t.head()[0]
        .args()
        .iter()
        .position(|a| a.as_variable().is_some_and(|v| ex.contains(v)))
}

/// Normal form. Full tgds are split per head atom; any other non-normal
/// tgd `φ → ∃z1..zk ψ` becomes the chain `φ → ∃z1 Aux1(x̄,z1)`,
/// `Aux_j(x̄,z1..zj) → ∃z_{j+1} Aux_{j+1}(x̄,z1..z_{j+1})` followed by
/// `Aux_k(x̄,z̄) → α` for every head atom `α`, where `x̄` is the frontier.
pub fn normalize_tgds(tgds: &[Tgd]) -> Vec<Tgd> {
    let used: BTreeSet<String> = tgds
        .iter()
        .flat_map(|t| t.predicates())
        .map(|p| p.name().to_string())
        .collect();
    normalize_tgds_avoiding(tgds, &used)
}

/// As [`normalize_tgds`], with auxiliary predicate names chosen outside
/// `reserved` as well.
pub fn normalize_tgds_avoiding(tgds: &[Tgd], reserved: &BTreeSet<String>) -> Vec<Tgd> {
    let mut used: BTreeSet<String> = reserved.clone();
    used.extend(
        tgds.iter()
            .flat_map(|t| t.predicates())
            .map(|p| p.name().to_string()),
    );
    let mut counter = 0usize;
    let mut fresh = |arity: usize| loop {
        counter += 1;
        let name = format!("Aux{counter}");
        if used.insert(name.clone()) {
            return Predicate::new(name, arity);
        }
    };
    let mut out = Vec::new();
    for t in tgds {
        if is_normal(t) {
            out.push(t.clone());
            continue;
        }
        if t.is_full() {
            for h in t.head() {
                out.push(Tgd::new(t.body().to_vec(), vec![h.clone()]).expect("split of a valid tgd"));
            }
            continue;
        }
        let frontier: Vec<Term> = t.frontier().into_iter().map(Term::Variable).collect();
        let existentials: Vec<Variable> = t.existentials().into_iter().collect();
        let mut args = frontier.clone();
        let mut body = t.body().to_vec();
        for z in &existentials {
            args.push(Term::Variable(z.clone()));
            let aux = Atom::new(fresh(args.len()), args.clone()).expect("arity by construction");
            out.push(Tgd::new(body, vec![aux.clone()]).expect("chain tgd"));
            body = vec![aux];
        }
        for h in t.head() {
            out.push(Tgd::new(body.clone(), vec![h.clone()]).expect("projection tgd"));
        }
    }
    out
}

/// Every homomorphism from the body of `t` into `instance`, in binding
/// order. A fact tgd has the single empty binding.
pub fn find_triggers(instance: &Instance, t: &Tgd) -> Vec<Trigger> {
    Matcher::new(t.body())
        .all(instance.atoms())
        .into_iter()
        .map(|binding| Trigger {
            tgd: t.clone(),
            binding,
        })
        .collect()
}

fn head_atoms(tr: &Trigger, nulls: &mut NullGenerator) -> Vec<Atom> {
    let mut extended: BTreeMap<Variable, Term> =
        tr.binding.iter().map(|(v, t)| (v.clone(), t.clone())).collect();
    for z in tr.tgd.existentials() {
        extended.insert(z, Term::Null(nulls.fresh()));
    }
    let s = Substitution::from_bindings(extended);
    tr.tgd.head().iter().map(|a| s.apply_atom(a)).collect()
}

/// Adds the head of `tr` with fresh nulls for its existential variables.
pub fn chase_step(
    instance: &Instance,
    tr: &Trigger,
    nulls: &mut NullGenerator,
) -> Result<Instance, ChaseError> {
    if !tr.is_active(instance) {
        return Err(ChaseError::InactiveTrigger(tr.tgd.to_string()));
    }
    let mut out = instance.clone();
    for a in head_atoms(tr, nulls) {
        out.insert(a);
    }
    Ok(out)
}

struct Run {
    instance: Instance,
    level_of: BTreeMap<Atom, usize>,
    nulls: NullGenerator,
    steps: usize,
}

impl Run {
    fn new(d: &Database) -> Self {
        Run {
            instance: d.instance().clone(),
            level_of: d.iter().map(|a| (a.clone(), 0)).collect(),
            nulls: NullGenerator::new(),
            steps: 0,
        }
    }

    fn image_level(&self, tr: &Trigger) -> usize {
        tr.body_image()
            .iter()
            .map(|a| self.level_of[a])
            .max()
            .unwrap_or(0)
    }

    /// Applies `tr` unless its head is already satisfied.
    fn fire(&mut self, tr: &Trigger) -> bool {
        if tr.is_satisfied(&self.instance) {
            return false;
        }
        let level = self.image_level(tr) + 1;
        for a in head_atoms(tr, &mut self.nulls) {
            self.level_of.entry(a.clone()).or_insert(level);
            self.instance.insert(a);
        }
        self.steps += 1;
        true
    }

    fn finish(self, complete: bool) -> ChaseResult {
        ChaseResult {
            instance: self.instance,
            steps: self.steps,
            complete,
            level_of: self.level_of,
        }
    }
}

/// The terminating chase of a non-recursive set, stratum by stratum.
pub fn chase_nr(d: &Database, tgds: &[Tgd]) -> Result<ChaseResult, ChaseError> {
    let strat = stratify(tgds).map_err(ChaseError::Recursive)?;
    let mut run = Run::new(d);
    for stratum in &strat.strata {
        loop {
            let mut changed = false;
            for &i in stratum {
                for tr in find_triggers(&run.instance, &tgds[i]) {
                    changed |= run.fire(&tr);
                }
            }
            if !changed {
                break;
            }
        }
    }
    debug_assert!(violation(&run.instance, tgds).is_none());
    Ok(run.finish(true))
}

/// Breadth-first chase producing every atom of level at most `max_level`.
/// Round `r` considers the triggers whose body image contains an atom of
/// level `r - 1`.
pub fn chase_bounded(d: &Database, tgds: &[Tgd], max_level: usize) -> ChaseResult {
    let mut run = Run::new(d);
    let mut fixpoint = false;
    for round in 1..=max_level {
        let mut pending = Vec::new();
        for t in tgds {
            for tr in find_triggers(&run.instance, t) {
                let image = tr.body_image();
                let fresh = if round == 1 {
                    true
                } else {
                    image.iter().any(|a| run.level_of[a] == round - 1)
                };
                if fresh {
                    pending.push(tr);
                }
            }
        }
        let mut changed = false;
        for tr in &pending {
            changed |= run.fire(tr);
        }
        if !changed {
            fixpoint = true;
            break;
        }
    }
    let complete = fixpoint || violation(&run.instance, tgds).is_none();
    run.finish(complete)
}

/// Runs the chase until a fixpoint, or for at most `max_level` levels when
/// given. Non-recursive sets always reach a fixpoint.
pub fn chase(d: &Database, tgds: &[Tgd], max_level: Option<usize>) -> ChaseResult {
    match (chase_nr(d, tgds), max_level) {
        (Ok(r), _) => r,
        (Err(_), Some(k)) => chase_bounded(d, tgds, k),
        (Err(_), None) => chase_bounded(d, tgds, usize::MAX),
    }
}

/// The first trigger, in trigger order, whose head is not satisfied.
pub fn violation(instance: &Instance, tgds: &[Tgd]) -> Option<Trigger> {
    tgds.iter()
        .flat_map(|t| find_triggers(instance, t))
        .find(|tr| !tr.is_satisfied(instance))
}

pub fn satisfies(instance: &Instance, tgds: &[Tgd]) -> bool {
    violation(instance, tgds).is_none()
}

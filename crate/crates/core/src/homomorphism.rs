//! Backtracking search for homomorphisms from a set of atoms with variables
//! into a set of atoms.
//!
//! At every level the search picks the pattern atom with the fewest
//! candidate images under the current partial assignment, and backtracks as
//! soon as some remaining atom has none.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;

use crate::model::{Atom, Predicate, Substitution, Term, Variable};

#[derive(Debug, Clone)]
enum Slot {
    Fixed(Term),
    Var(usize),
}

#[derive(Debug, Clone)]
struct PatternAtom {
    predicate: Predicate,
    slots: Vec<Slot>,
}

/// A compiled pattern. Variables are numbered in first-occurrence order.
#[derive(Debug, Clone)]
pub struct Matcher {
    vars: Vec<Variable>,
    atoms: Vec<PatternAtom>,
}

/// All atoms of `predicate` in `target`.
pub fn atoms_of<'a>(
    target: &'a BTreeSet<Atom>,
    predicate: &Predicate,
) -> impl Iterator<Item = &'a Atom> + 'a {
    let p = predicate.clone();
    target
        .range(Atom::lower_bound(predicate)..)
        .take_while(move |a| a.predicate() == &p)
}

impl Matcher {
    pub fn new<'a>(pattern: impl IntoIterator<Item = &'a Atom>) -> Self {
        Self::with_bound(pattern, &BTreeMap::new())
    }

    /// As [`Matcher::new`], with the variables in `bound` fixed to their
    /// given images.
    pub fn with_bound<'a>(
        pattern: impl IntoIterator<Item = &'a Atom>,
        bound: &BTreeMap<Variable, Term>,
    ) -> Self {
        let mut index: BTreeMap<Variable, usize> = BTreeMap::new();
        let mut vars = Vec::new();
        let atoms = pattern
            .into_iter()
            .map(|a| PatternAtom {
                predicate: a.predicate().clone(),
                slots: a
                    .args()
                    .iter()
                    .map(|t| match t {
                        Term::Variable(v) if bound.contains_key(v) => Slot::Fixed(bound[v].clone()),
                        Term::Variable(v) => {
                            let next = vars.len();
                            let i = *index.entry(v.clone()).or_insert_with(|| {
                                vars.push(v.clone());
                                next
                            });
                            Slot::Var(i)
                        }
                        other => Slot::Fixed(other.clone()),
                    })
                    .collect(),
            })
            .collect();
        Matcher { vars, atoms }
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn slot_of(&self, v: &Variable) -> Option<usize> {
        self.vars.iter().position(|w| w == v)
    }

    /// Calls `visit` with the image of every variable (indexed like
    /// [`Matcher::variables`]) for each homomorphism into `target`.
    pub fn for_each<F>(&self, target: &BTreeSet<Atom>, mut visit: F) -> ControlFlow<()>
    where
        F: FnMut(&[Term]) -> ControlFlow<()>,
    {
        let mut assignment: Vec<Option<Term>> = vec![None; self.vars.len()];
        let mut remaining: Vec<usize> = (0..self.atoms.len()).collect();
        self.search(target, &mut assignment, &mut remaining, &mut visit)
    }

    pub fn exists(&self, target: &BTreeSet<Atom>) -> bool {
        self.for_each(target, |_| ControlFlow::Break(())).is_break()
    }

    /// All homomorphisms as substitutions, in a deterministic order.
    pub fn all(&self, target: &BTreeSet<Atom>) -> Vec<Substitution> {
        let mut out = Vec::new();
        let _ = self.for_each(target, |images| {
            out.push(self.to_substitution(images));
            ControlFlow::Continue(())
        });
        out.sort();
        out
    }

    pub fn to_substitution(&self, images: &[Term]) -> Substitution {
        Substitution::from_map_unchecked(
            self.vars
                .iter()
                .cloned()
                .zip(images.iter().cloned())
                .filter(|(v, t)| t.as_variable() != Some(v))
                .collect(),
        )
    }

    fn candidates<'a>(
        &self,
        atom: &PatternAtom,
        target: &'a BTreeSet<Atom>,
        assignment: &[Option<Term>],
    ) -> Vec<&'a Atom> {
        atoms_of(target, &atom.predicate)
            .filter(|cand| compatible(atom, cand, assignment))
            .collect()
    }

    fn search<F>(
        &self,
        target: &BTreeSet<Atom>,
        assignment: &mut Vec<Option<Term>>,
        remaining: &mut Vec<usize>,
        visit: &mut F,
    ) -> ControlFlow<()>
    where
        F: FnMut(&[Term]) -> ControlFlow<()>,
    {
        if remaining.is_empty() {
            let images: Vec<Term> = assignment
                .iter()
                .map(|t| t.clone().expect("every variable occurs in some atom"))
                .collect();
            return visit(&images);
        }
        // most constrained atom first; an empty candidate list prunes
        let mut best: Option<(usize, Vec<&Atom>)> = None;
        for (pos, &ai) in remaining.iter().enumerate() {
            let cands = self.candidates(&self.atoms[ai], target, assignment);
            if cands.is_empty() {
                return ControlFlow::Continue(());
            }
            if best.as_ref().map_or(true, |(_, b)| cands.len() < b.len()) {
                let single = cands.len() == 1;
                best = Some((pos, cands));
                if single {
                    break;
                }
            }
        }
        let (pos, cands) = best.expect("remaining is nonempty");
        let ai = remaining.swap_remove(pos);
        let atom = &self.atoms[ai];
        for cand in cands {
            let mut bound = Vec::new();
            if bind(atom, cand, assignment, &mut bound) {
                self.search(target, assignment, remaining, visit)?;
            }
            for i in bound {
                assignment[i] = None;
            }
        }
        remaining.push(ai);
        let last = remaining.len() - 1;
        remaining.swap(pos, last);
        ControlFlow::Continue(())
    }
}

fn compatible(atom: &PatternAtom, cand: &Atom, assignment: &[Option<Term>]) -> bool {
    // repeated unbound variables inside one atom are checked in `bind`
    atom.slots.iter().zip(cand.args()).all(|(slot, t)| match slot {
        Slot::Fixed(f) => f == t,
        Slot::Var(i) => assignment[*i].as_ref().map_or(true, |b| b == t),
    })
}

fn bind(
    atom: &PatternAtom,
    cand: &Atom,
    assignment: &mut [Option<Term>],
    bound: &mut Vec<usize>,
) -> bool {
    for (slot, t) in atom.slots.iter().zip(cand.args()) {
        match slot {
            Slot::Fixed(f) => {
                if f != t {
                    return false;
                }
            }
            Slot::Var(i) => match &assignment[*i] {
                Some(b) if b != t => return false,
                Some(_) => {}
                None => {
                    assignment[*i] = Some(t.clone());
                    bound.push(*i);
                }
            },
        }
    }
    true
}

/// Whether some homomorphism maps `pattern` into `target`.
pub fn has_homomorphism<'a>(
    pattern: impl IntoIterator<Item = &'a Atom>,
    target: &BTreeSet<Atom>,
) -> bool {
    Matcher::new(pattern).exists(target)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atoms(spec: &[(&str, &[&str])]) -> BTreeSet<Atom> {
        spec.iter()
            .map(|(p, args)| {
                Atom::from_name(
                    p,
                    args.iter()
                        .map(|a| {
                            if a.starts_with('?') {
                                Term::variable(&a[1..])
                            } else {
                                Term::constant(a)
                            }
                        })
                        .collect(),
                )
            })
            .collect()
    }

    #[test]
    fn path_of_length_two() {
        let target = atoms(&[("R", &["a", "b"]), ("R", &["b", "c"])]);
        let pattern = atoms(&[("R", &["?x", "?y"]), ("R", &["?y", "?z"])]);
        let homs = Matcher::new(&pattern).all(&target);
        assert_eq!(homs.len(), 1);
        let h = &homs[0];
        assert_eq!(h.get(&Variable::new("x")), Some(&Term::constant("a")));
        assert_eq!(h.get(&Variable::new("z")), Some(&Term::constant("c")));
    }

    #[test]
    fn repeated_variable_in_one_atom() {
        let target = atoms(&[("R", &["a", "b"]), ("R", &["c", "c"])]);
        let pattern = atoms(&[("R", &["?x", "?x"])]);
        let homs = Matcher::new(&pattern).all(&target);
        assert_eq!(homs.len(), 1);
        assert_eq!(
            homs[0].get(&Variable::new("x")),
            Some(&Term::constant("c"))
        );
    }

    #[test]
    fn constants_must_match() {
        let target = atoms(&[("R", &["a", "b"])]);
        assert!(has_homomorphism(&atoms(&[("R", &["a", "?y"])]), &target));
        assert!(!has_homomorphism(&atoms(&[("R", &["b", "?y"])]), &target));
    }

    #[test]
    fn empty_pattern_has_one_match() {
        let target = atoms(&[]);
        let homs = Matcher::new(&BTreeSet::new()).all(&target);
        assert_eq!(homs, vec![Substitution::new()]);
    }
}

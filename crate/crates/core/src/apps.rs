//! Connected components of atom sets and queries, and distribution of an
//! OMQ over the components of its input database.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::contain::{contains, is_unsatisfiable, ContainError};
use crate::eval::{AnswerSet, PreparedOmq, Strategy};
use crate::classify::is_non_recursive;
use crate::model::{Atom, Cq, Database, Omq, Term, Ucq, Variable};
use crate::testkit::{enumerate_databases, EnumerationTooLarge};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AppsError {
    #[error("components are undefined for the 0-ary atom {0}")]
    ZeroAryAtom(String),
    #[error("a query with an empty body has no components")]
    EmptyBody,
    #[error(transparent)]
    Contain(#[from] ContainError),
    #[error(transparent)]
    Enumeration(#[from] EnumerationTooLarge),
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// The maximal connected subsets of `atoms`, where two atoms are connected
/// when they share a term. Parts are ordered by their least atom.
pub fn components<'a>(
    atoms: impl IntoIterator<Item = &'a Atom>,
) -> Result<Vec<BTreeSet<Atom>>, AppsError> {
    let atoms: Vec<&Atom> = atoms.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    if let Some(a) = atoms.iter().find(|a| a.arity() == 0) {
        return Err(AppsError::ZeroAryAtom(a.to_string()));
    }
    let mut parent: Vec<usize> = (0..atoms.len()).collect();
    let mut owner: BTreeMap<&Term, usize> = BTreeMap::new();
    for (i, a) in atoms.iter().enumerate() {
        for t in a.args() {
            match owner.get(t) {
                Some(&j) => {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ri] = rj;
                }
                None => {
                    owner.insert(t, i);
                }
            }
        }
    }
    let mut parts: BTreeMap<usize, BTreeSet<Atom>> = BTreeMap::new();
    for (i, a) in atoms.iter().enumerate() {
        let r = find(&mut parent, i);
        parts.entry(r).or_default().insert((*a).clone());
    }
    let mut out: Vec<BTreeSet<Atom>> = parts.into_values().collect();
    out.sort_by(|a, b| a.iter().next().cmp(&b.iter().next()));
    Ok(out)
}

/// The components of a database.
pub fn database_components(d: &Database) -> Result<Vec<Database>, AppsError> {
    Ok(components(d.iter())?
        .into_iter()
        .map(|part| Database::new(part).expect("subset of a database"))
        .collect())
}

/// One component of a CQ body under the full answer tuple of the CQ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryComponent {
    pub atoms: BTreeSet<Atom>,
    pub answer: Vec<Term>,
    /// Answer variables missing from `atoms`; the component is a query
    /// only when this is empty.
    pub missing: BTreeSet<Variable>,
}

impl QueryComponent {
    pub fn is_safe(&self) -> bool {
        self.missing.is_empty()
    }

    pub fn cq(&self) -> Option<Cq> {
        Cq::new(self.answer.clone(), self.atoms.iter().cloned()).ok()
    }
}

pub fn cq_components(q: &Cq) -> Result<Vec<QueryComponent>, AppsError> {
    if q.body().is_empty() {
        return Err(AppsError::EmptyBody);
    }
    Ok(components(q.body())?
        .into_iter()
        .map(|atoms| {
            let vars: BTreeSet<&Variable> = atoms.iter().flat_map(|a| a.variables()).collect();
            let missing = q
                .answer_variables()
                .into_iter()
                .filter(|v| !vars.contains(v))
                .collect();
            QueryComponent {
                atoms,
                answer: q.answer().to_vec(),
                missing,
            }
        })
        .collect())
}

/// Why a disjunct does not prevent distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DisjunctWitness {
    /// No database satisfies the disjunct under the tgds.
    Unsatisfiable,
    /// A component whose OMQ is contained in the whole OMQ.
    Component(Cq),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistributionVerdict {
    pub distributes: bool,
    /// Per disjunct; `None` marks a disjunct without a witness.
    pub witnesses: Vec<Option<DisjunctWitness>>,
    /// Components excluded because they miss an answer variable.
    pub unsafe_components: Vec<String>,
}

impl DistributionVerdict {
    /// The witness of a single-disjunct OMQ.
    pub fn witness(&self) -> Option<&DisjunctWitness> {
        self.witnesses.first().and_then(Option::as_ref)
    }
}

/// Whether `Q(D)` equals the union of `Q` over the components of `D` for
/// every database.
///
/// A CQ query distributes iff the OMQ is unsatisfiable or some component
/// `q̂` of the query, kept with the full answer tuple, gives an OMQ
/// contained in `Q`. A union is checked disjunct by disjunct: each
/// disjunct must be unsatisfiable or have such a component.
pub fn distributes(q: &Omq, budget: usize) -> Result<DistributionVerdict, AppsError> {
    let mut witnesses = Vec::new();
    let mut unsafe_components = Vec::new();
    for d in q.query().disjuncts() {
        let parts = cq_components(d)?;
        let single = q.with_query(Ucq::from(d.clone())).expect("same schema");
        if is_unsatisfiable(&single, budget)? {
            witnesses.push(Some(DisjunctWitness::Unsatisfiable));
            continue;
        }
        let mut found = None;
        for part in parts {
            let Some(cq) = part.cq() else {
                unsafe_components.push(format!(
                    "component {} misses answer variables {}",
                    part.atoms.iter().map(Atom::to_string).collect::<Vec<_>>().join(", "),
                    part.missing.iter().map(Variable::to_string).collect::<Vec<_>>().join(", ")
                ));
                continue;
            };
            let lhs = q.with_query(Ucq::from(cq.clone())).expect("same schema");
            if contains(&lhs, q, budget)?.contained {
                found = Some(DisjunctWitness::Component(cq));
                break;
            }
        }
        witnesses.push(found);
    }
    Ok(DistributionVerdict {
        distributes: witnesses.iter().all(Option::is_some),
        witnesses,
        unsafe_components,
    })
}

fn oracle(q: &Omq) -> Result<PreparedOmq, AppsError> {
    let strategy = if is_non_recursive(q.tgds()) {
        Strategy::Chase
    } else {
        Strategy::Rewriting
    };
    PreparedOmq::new(q, strategy).map_err(|e| AppsError::Contain(e.into()))
}

/// A database among those with at most `max_atoms` atoms over
/// `max_constants` constants where `Q(D)` differs from the union of `Q`
/// over the components of `D`, if any.
pub fn distribution_counterexample(
    q: &Omq,
    max_constants: usize,
    max_atoms: usize,
) -> Result<Option<Database>, AppsError> {
    let prepared = oracle(q)?;
    for d in enumerate_databases(q.data_schema(), max_constants, max_atoms)? {
        let whole = prepared.answers(&d);
        let mut union = AnswerSet::new();
        for part in database_components(&d)? {
            union.extend(prepared.answers(&part));
        }
        if whole != union {
            return Ok(Some(d));
        }
    }
    Ok(None)
}

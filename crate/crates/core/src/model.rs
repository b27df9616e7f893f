//! The data model: terms, atoms, instances, (unions of) conjunctive queries,
//! tuple-generating dependencies, ontology-mediated queries and substitutions.
//!
//! All values are immutable once constructed. Names are reference counted so
//! cloning terms and atoms is cheap, and everything here is `Send + Sync`.
//!
//! Collections of atoms are sets: duplicates collapse at construction time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Prefix of the constants introduced by [`freeze_cq`]. User input may not
/// use it.
pub const FROZEN_PREFIX: &str = "$frz";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("predicate {predicate} has arity {expected} but was used with {found} arguments")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("predicate {name} declared with arities {first} and {second}")]
    SchemaConflict {
        name: String,
        first: usize,
        second: usize,
    },
    #[error("answer variable {0} does not occur in the query body")]
    UnsafeAnswerVariable(String),
    #[error("labeled null {0} in a query answer")]
    NullInAnswer(String),
    #[error("labeled null {0} occurs in a dependency or query")]
    NullInRule(String),
    #[error("variable {0} occurs in an instance")]
    VariableInInstance(String),
    #[error("labeled null {0} occurs in a database")]
    NullInDatabase(String),
    #[error("a tgd needs at least one head atom")]
    EmptyHead,
    #[error("disjuncts have answer arities {0} and {1}")]
    AnswerArityMismatch(usize, usize),
    #[error("a union of conjunctive queries needs at least one disjunct")]
    EmptyUnion,
}

/// A constant, e.g. `a`, `0` or a frozen `$frz3`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Constant(Arc<str>);

impl Constant {
    pub fn new(name: impl AsRef<str>) -> Self {
        Constant(Arc::from(name.as_ref()))
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    pub fn is_frozen(&self) -> bool {
        self.0.starts_with(FROZEN_PREFIX)
    }
}

/// A (regular) variable.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable(Arc<str>);

impl Variable {
    pub fn new(name: impl AsRef<str>) -> Self {
        Variable(Arc::from(name.as_ref()))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

/// A labeled null, rendered `_:n`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NullId(pub u64);

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Constant(Constant),
    Variable(Variable),
    Null(NullId),
}

impl Term {
    pub fn constant(name: impl AsRef<str>) -> Self {
        Term::Constant(Constant::new(name))
    }

    pub fn variable(name: impl AsRef<str>) -> Self {
        Term::Variable(Variable::new(name))
    }

    pub fn as_variable(&self) -> Option<&Variable> {
        match self {
            Term::Variable(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_constant(&self) -> Option<&Constant> {
        match self {
            Term::Constant(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_))
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Term::Constant(_))
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Term::Null(_))
    }
}

impl From<Constant> for Term {
    fn from(c: Constant) -> Self {
        Term::Constant(c)
    }
}

impl From<Variable> for Term {
    fn from(v: Variable) -> Self {
        Term::Variable(v)
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

impl fmt::Display for NullId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "_:{}", self.0)
    }
}

impl fmt::Debug for NullId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "_:{}", self.0)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Constant(c) => c.fmt(f),
            Term::Variable(v) => v.fmt(f),
            Term::Null(n) => n.fmt(f),
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Constant(c) => fmt::Debug::fmt(c, f),
            Term::Variable(v) => fmt::Debug::fmt(v, f),
            Term::Null(n) => fmt::Debug::fmt(n, f),
        }
    }
}

/// Per-run supply of fresh labeled nulls, starting at `_:1`.
#[derive(Debug, Clone)]
pub struct NullGenerator {
    next: u64,
}

impl NullGenerator {
    pub fn new() -> Self {
        NullGenerator { next: 1 }
    }

    pub fn fresh(&mut self) -> NullId {
        let id = NullId(self.next);
        self.next += 1;
        id
    }
}

impl Default for NullGenerator {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Predicate {
    name: Arc<str>,
    arity: usize,
}

impl Predicate {
    pub fn new(name: impl AsRef<str>, arity: usize) -> Self {
        Predicate {
            name: Arc::from(name.as_ref()),
            arity,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

/// A set of predicates with unique names.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Schema {
    predicates: BTreeMap<Arc<str>, usize>,
}

impl Schema {
    pub fn new() -> Self {
        Schema::default()
    }

    pub fn from_predicates<'a>(
        predicates: impl IntoIterator<Item = &'a Predicate>,
    ) -> Result<Self, ModelError> {
        let mut schema = Schema::new();
        for p in predicates {
            schema.insert(p)?;
        }
        Ok(schema)
    }

    /// Adds `p`; re-adding an existing predicate is a no-op.
    pub fn insert(&mut self, p: &Predicate) -> Result<(), ModelError> {
        match self.predicates.get(p.name()) {
            Some(&arity) if arity != p.arity() => Err(ModelError::SchemaConflict {
                name: p.name().to_string(),
                first: arity,
                second: p.arity(),
            }),
            Some(_) => Ok(()),
            None => {
                self.predicates.insert(p.name.clone(), p.arity());
                Ok(())
            }
        }
    }

    pub fn arity_of(&self, name: &str) -> Option<usize> {
        self.predicates.get(name).copied()
    }

    pub fn contains(&self, p: &Predicate) -> bool {
        self.arity_of(p.name()) == Some(p.arity())
    }

    pub fn contains_name(&self, name: &str) -> bool {
        self.predicates.contains_key(name)
    }

    pub fn predicates(&self) -> impl Iterator<Item = Predicate> + '_ {
        self.predicates.iter().map(|(n, &a)| Predicate {
            name: n.clone(),
            arity: a,
        })
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    pub fn max_arity(&self) -> usize {
        self.predicates.values().copied().max().unwrap_or(0)
    }

    pub fn union(&self, other: &Schema) -> Result<Schema, ModelError> {
        let mut out = self.clone();
        for p in other.predicates() {
            out.insert(&p)?;
        }
        Ok(out)
    }
}

impl fmt::Debug for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.predicates()).finish()
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (name, arity)) in self.predicates.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{name}/{arity}")?;
        }
        f.write_str("}")
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    predicate: Predicate,
    args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: Predicate, args: Vec<Term>) -> Result<Self, ModelError> {
        if predicate.arity() != args.len() {
            return Err(ModelError::ArityMismatch {
                predicate: predicate.name().to_string(),
                expected: predicate.arity(),
                found: args.len(),
            });
        }
        Ok(Atom { predicate, args })
    }

    /// Builds an atom whose predicate arity is taken from `args`.
    pub fn from_name(name: impl AsRef<str>, args: Vec<Term>) -> Self {
        Atom {
            predicate: Predicate::new(name, args.len()),
            args,
        }
    }

    /// Smallest atom of `predicate` in the atom order; used for range scans.
    pub(crate) fn lower_bound(predicate: &Predicate) -> Self {
        Atom {
            predicate: predicate.clone(),
            args: Vec::new(),
        }
    }

    pub fn predicate(&self) -> &Predicate {
        &self.predicate
    }

    pub fn args(&self) -> &[Term] {
        &self.args
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        self.args.iter().filter_map(Term::as_variable)
    }

    pub fn is_ground(&self) -> bool {
        !self.args.iter().any(Term::is_variable)
    }

    /// Same arguments under a different predicate of equal arity.
    pub fn with_predicate(&self, predicate: Predicate) -> Result<Self, ModelError> {
        Atom::new(predicate, self.args.clone())
    }

    pub fn map_terms(&self, mut f: impl FnMut(&Term) -> Term) -> Self {
        Atom {
            predicate: self.predicate.clone(),
            args: self.args.iter().map(&mut f).collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate.name())?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// The set of terms occurring in `atoms`.
pub fn active_domain<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> BTreeSet<Term> {
    atoms
        .into_iter()
        .flat_map(|a| a.args().iter().cloned())
        .collect()
}

pub fn predicates_of<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> BTreeSet<Predicate> {
    atoms.into_iter().map(|a| a.predicate().clone()).collect()
}

/// A set of ground atoms (constants and labeled nulls).
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Instance {
    atoms: BTreeSet<Atom>,
}

impl Instance {
    pub fn new(atoms: impl IntoIterator<Item = Atom>) -> Result<Self, ModelError> {
        let atoms: BTreeSet<Atom> = atoms.into_iter().collect();
        if let Some(v) = atoms.iter().flat_map(|a| a.variables()).next() {
            return Err(ModelError::VariableInInstance(v.to_string()));
        }
        Ok(Instance { atoms })
    }

    pub fn empty() -> Self {
        Instance::default()
    }

    pub fn atoms(&self) -> &BTreeSet<Atom> {
        &self.atoms
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.atoms.contains(atom)
    }

    /// Inserts a ground atom, returning whether it was new.
    pub(crate) fn insert(&mut self, atom: Atom) -> bool {
        debug_assert!(atom.is_ground());
        self.atoms.insert(atom)
    }

    pub fn active_domain(&self) -> BTreeSet<Term> {
        active_domain(&self.atoms)
    }

    pub fn is_subset(&self, other: &Instance) -> bool {
        self.atoms.is_subset(&other.atoms)
    }
}

impl fmt::Debug for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.atoms.iter()).finish()
    }
}

/// A finite set of facts over constants.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Database(Instance);

impl Database {
    pub fn new(atoms: impl IntoIterator<Item = Atom>) -> Result<Self, ModelError> {
        let instance = Instance::new(atoms)?;
        if let Some(n) = instance
            .atoms
            .iter()
            .flat_map(|a| a.args())
            .find(|t| t.is_null())
        {
            return Err(ModelError::NullInDatabase(n.to_string()));
        }
        Ok(Database(instance))
    }

    pub fn empty() -> Self {
        Database::default()
    }

    pub fn instance(&self) -> &Instance {
        &self.0
    }

    pub fn into_instance(self) -> Instance {
        self.0
    }

    pub fn atoms(&self) -> &BTreeSet<Atom> {
        &self.0.atoms
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.0.atoms.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn constants(&self) -> BTreeSet<Constant> {
        self.iter()
            .flat_map(|a| a.args())
            .filter_map(Term::as_constant)
            .cloned()
            .collect()
    }
}

impl fmt::Debug for Database {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&self.0, f)
    }
}

/// A conjunctive query `q(x̄) :- body`. The answer tuple holds variables, or
/// constants once rewriting has bound an answer position.
///
/// An empty body denotes the query that holds everywhere; its answer tuple
/// then consists of constants only.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cq {
    answer: Vec<Term>,
    body: BTreeSet<Atom>,
}

impl Cq {
    pub fn new(
        answer: Vec<Term>,
        body: impl IntoIterator<Item = Atom>,
    ) -> Result<Self, ModelError> {
        let body: BTreeSet<Atom> = body.into_iter().collect();
        for atom in &body {
            if let Some(n) = atom.args().iter().find(|t| t.is_null()) {
                return Err(ModelError::NullInRule(n.to_string()));
            }
        }
        let vars: BTreeSet<&Variable> = body.iter().flat_map(|a| a.variables()).collect();
        for t in &answer {
            match t {
                Term::Variable(v) if !vars.contains(v) => {
                    return Err(ModelError::UnsafeAnswerVariable(v.to_string()))
                }
                Term::Null(n) => return Err(ModelError::NullInAnswer(n.to_string())),
                _ => {}
            }
        }
        Ok(Cq { answer, body })
    }

    /// The Boolean query with empty body.
    pub fn truth() -> Self {
        Cq {
            answer: Vec::new(),
            body: BTreeSet::new(),
        }
    }

    pub fn answer(&self) -> &[Term] {
        &self.answer
    }

    pub fn arity(&self) -> usize {
        self.answer.len()
    }

    pub fn body(&self) -> &BTreeSet<Atom> {
        &self.body
    }

    /// Number of body atoms.
    pub fn len(&self) -> usize {
        self.body.len()
    }

    pub fn is_empty(&self) -> bool {
        self.body.is_empty()
    }

    pub fn is_boolean(&self) -> bool {
        self.answer.is_empty()
    }

    pub fn is_truth(&self) -> bool {
        self.body.is_empty()
    }

    pub fn variables(&self) -> BTreeSet<Variable> {
        self.body.iter().flat_map(|a| a.variables()).cloned().collect()
    }

    pub fn answer_variables(&self) -> BTreeSet<Variable> {
        self.answer.iter().filter_map(Term::as_variable).cloned().collect()
    }

    pub fn constants(&self) -> BTreeSet<Constant> {
        self.body
            .iter()
            .flat_map(|a| a.args())
            .chain(self.answer.iter())
            .filter_map(Term::as_constant)
            .cloned()
            .collect()
    }

    /// Terms of the query: body terms plus answer constants.
    pub fn terms(&self) -> BTreeSet<Term> {
        let mut terms = active_domain(&self.body);
        terms.extend(self.answer.iter().cloned());
        terms
    }

    pub fn predicates(&self) -> BTreeSet<Predicate> {
        predicates_of(&self.body)
    }

    /// Renames predicates; arities are preserved.
    pub fn map_predicates(&self, mut f: impl FnMut(&Predicate) -> Predicate) -> Self {
        let body = self
            .body
            .iter()
            .map(|a| Atom {
                predicate: f(a.predicate()),
                args: a.args.clone(),
            })
            .collect();
        Cq {
            answer: self.answer.clone(),
            body,
        }
    }
}

impl fmt::Display for Cq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("q(")?;
        for (i, t) in self.answer.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(") :- ")?;
        if self.body.is_empty() {
            return f.write_str("true");
        }
        for (i, a) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Cq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// A union of conjunctive queries with aligned answer tuples. The empty union
/// (the query that never holds) only arises as a rewriting result.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Ucq {
    arity: usize,
    disjuncts: Vec<Cq>,
}

impl Ucq {
    pub fn new(disjuncts: Vec<Cq>) -> Result<Self, ModelError> {
        let first = disjuncts.first().ok_or(ModelError::EmptyUnion)?;
        let arity = first.arity();
        if let Some(bad) = disjuncts.iter().find(|d| d.arity() != arity) {
            return Err(ModelError::AnswerArityMismatch(arity, bad.arity()));
        }
        Ok(Ucq { arity, disjuncts })
    }

    pub fn empty(arity: usize) -> Self {
        Ucq {
            arity,
            disjuncts: Vec::new(),
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn disjuncts(&self) -> &[Cq] {
        &self.disjuncts
    }

    pub fn len(&self) -> usize {
        self.disjuncts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.disjuncts.is_empty()
    }

    pub fn is_boolean(&self) -> bool {
        self.arity == 0
    }

    pub fn as_cq(&self) -> Option<&Cq> {
        match self.disjuncts.as_slice() {
            [single] => Some(single),
            _ => None,
        }
    }

    pub fn predicates(&self) -> BTreeSet<Predicate> {
        self.disjuncts.iter().flat_map(|d| d.predicates()).collect()
    }

    pub fn constants(&self) -> BTreeSet<Constant> {
        self.disjuncts.iter().flat_map(|d| d.constants()).collect()
    }

    /// Size of the largest disjunct.
    pub fn max_len(&self) -> usize {
        self.disjuncts.iter().map(Cq::len).max().unwrap_or(0)
    }
}

impl From<Cq> for Ucq {
    fn from(cq: Cq) -> Self {
        Ucq {
            arity: cq.arity(),
            disjuncts: vec![cq],
        }
    }
}

impl fmt::Debug for Ucq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.disjuncts.iter()).finish()
    }
}

/// A tuple-generating dependency `body -> exists z̄ . head`. Variables of the
/// head that do not occur in the body are the existential ones.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tgd {
    body: Vec<Atom>,
    head: Vec<Atom>,
}

impl Tgd {
    pub fn new(body: Vec<Atom>, head: Vec<Atom>) -> Result<Self, ModelError> {
        if head.is_empty() {
            return Err(ModelError::EmptyHead);
        }
        if let Some(n) = body
            .iter()
            .chain(head.iter())
            .flat_map(|a| a.args())
            .find(|t| t.is_null())
        {
            return Err(ModelError::NullInRule(n.to_string()));
        }
        Ok(Tgd {
            body: dedup(body),
            head: dedup(head),
        })
    }

    pub fn body(&self) -> &[Atom] {
        &self.body
    }

    pub fn head(&self) -> &[Atom] {
        &self.head
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    pub fn body_variables(&self) -> BTreeSet<Variable> {
        self.body.iter().flat_map(|a| a.variables()).cloned().collect()
    }

    pub fn head_variables(&self) -> BTreeSet<Variable> {
        self.head.iter().flat_map(|a| a.variables()).cloned().collect()
    }

    /// Variables shared by body and head.
    pub fn frontier(&self) -> BTreeSet<Variable> {
        let body = self.body_variables();
        self.head_variables()
            .into_iter()
            .filter(|v| body.contains(v))
            .collect()
    }

    pub fn existentials(&self) -> BTreeSet<Variable> {
        let body = self.body_variables();
        self.head_variables()
            .into_iter()
            .filter(|v| !body.contains(v))
            .collect()
    }

    pub fn is_full(&self) -> bool {
        self.existentials().is_empty()
    }

    pub fn variables(&self) -> BTreeSet<Variable> {
        let mut vars = self.body_variables();
        vars.extend(self.head_variables());
        vars
    }

    pub fn constants(&self) -> BTreeSet<Constant> {
        self.body
            .iter()
            .chain(self.head.iter())
            .flat_map(|a| a.args())
            .filter_map(Term::as_constant)
            .cloned()
            .collect()
    }

    pub fn predicates(&self) -> BTreeSet<Predicate> {
        predicates_of(self.body.iter().chain(self.head.iter()))
    }

    /// Consistently renames every variable.
    pub fn rename_variables(&self, mut f: impl FnMut(&Variable) -> Variable) -> Self {
        let mut rename = |t: &Term| match t {
            Term::Variable(v) => Term::Variable(f(v)),
            other => other.clone(),
        };
        Tgd {
            body: self.body.iter().map(|a| a.map_terms(&mut rename)).collect(),
            head: self.head.iter().map(|a| a.map_terms(&mut rename)).collect(),
        }
    }

    pub fn map_predicates(&self, mut f: impl FnMut(&Predicate) -> Predicate) -> Self {
        let mut map = |a: &Atom| Atom {
            predicate: f(a.predicate()),
            args: a.args.clone(),
        };
        Tgd {
            body: self.body.iter().map(&mut map).collect(),
            head: self.head.iter().map(&mut map).collect(),
        }
    }
}

impl fmt::Display for Tgd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.body.is_empty() {
            f.write_str("true")?;
        }
        for (i, a) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(" -> ")?;
        let ex = self.existentials();
        if !ex.is_empty() {
            f.write_str("exists ")?;
            for (i, v) in ex.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{v}")?;
            }
            f.write_str(" . ")?;
        }
        for (i, a) in self.head.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Tgd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

fn dedup(atoms: Vec<Atom>) -> Vec<Atom> {
    let mut seen = BTreeSet::new();
    atoms.into_iter().filter(|a| seen.insert(a.clone())).collect()
}

/// The predicates occurring in a set of tgds.
pub fn schema_of_tgds(tgds: &[Tgd]) -> Result<Schema, ModelError> {
    let preds: BTreeSet<Predicate> = tgds.iter().flat_map(|t| t.predicates()).collect();
    Schema::from_predicates(&preds)
}

pub fn constants_of_tgds(tgds: &[Tgd]) -> BTreeSet<Constant> {
    tgds.iter().flat_map(|t| t.constants()).collect()
}

/// An ontology-mediated query `(S, Σ, q)`.
#[derive(Clone, PartialEq, Eq)]
pub struct Omq {
    data_schema: Schema,
    tgds: Vec<Tgd>,
    query: Ucq,
}

impl Omq {
    pub fn new(data_schema: Schema, tgds: Vec<Tgd>, query: Ucq) -> Result<Self, ModelError> {
        let full = data_schema.union(&schema_of_tgds(&tgds)?)?;
        // Query predicates outside S ∪ sch(Σ) are admitted: they can never
        // hold, which is how unsatisfiable queries are written down.
        for p in query.predicates() {
            match full.arity_of(p.name()) {
                None => {}
                Some(a) if a != p.arity() => {
                    return Err(ModelError::ArityMismatch {
                        predicate: p.name().to_string(),
                        expected: a,
                        found: p.arity(),
                    })
                }
                Some(_) => {}
            }
        }
        Ok(Omq {
            data_schema,
            tgds,
            query,
        })
    }

    pub fn data_schema(&self) -> &Schema {
        &self.data_schema
    }

    pub fn tgds(&self) -> &[Tgd] {
        &self.tgds
    }

    pub fn query(&self) -> &Ucq {
        &self.query
    }

    pub fn arity(&self) -> usize {
        self.query.arity()
    }

    /// `S ∪ sch(Σ) ∪ preds(q)`.
    pub fn full_schema(&self) -> Schema {
        // Arity consistency was checked in `new`.
        let mut s = self
            .data_schema
            .union(&schema_of_tgds(&self.tgds).expect("checked at construction"))
            .expect("checked at construction");
        for p in self.query.predicates() {
            s.insert(&p).expect("checked at construction");
        }
        s
    }

    pub fn constants(&self) -> BTreeSet<Constant> {
        let mut c = constants_of_tgds(&self.tgds);
        c.extend(self.query.constants());
        c
    }

    pub fn with_query(&self, query: Ucq) -> Result<Self, ModelError> {
        Omq::new(self.data_schema.clone(), self.tgds.clone(), query)
    }
}

impl fmt::Debug for Omq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Omq")
            .field("data_schema", &self.data_schema)
            .field("tgds", &self.tgds)
            .field("query", &self.query)
            .finish()
    }
}

/// A finite map from variables to terms, applied simultaneously.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Substitution {
    map: BTreeMap<Variable, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Substitution::default()
    }

    /// Builds a substitution from bindings and normalizes it, so chained
    /// bindings such as `{x ↦ y, y ↦ z}` resolve to `{x ↦ z, y ↦ z}`.
    pub fn from_bindings(bindings: impl IntoIterator<Item = (Variable, Term)>) -> Self {
        Substitution {
            map: bindings.into_iter().collect(),
        }
        .normalized()
    }

    pub(crate) fn from_map_unchecked(map: BTreeMap<Variable, Term>) -> Self {
        Substitution { map }
    }

    pub fn get(&self, v: &Variable) -> Option<&Term> {
        self.map.get(v)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Variable> {
        self.map.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Variable, &Term)> {
        self.map.iter()
    }

    pub fn is_normalized(&self) -> bool {
        self.map.iter().all(|(v, t)| {
            t.as_variable() != Some(v)
                && t.as_variable().map_or(true, |w| !self.map.contains_key(w))
        })
    }

    /// Resolves chains and drops identity bindings. On a cycle
    /// `x ↦ y, y ↦ x` the smallest variable of the cycle is kept free.
    pub fn normalized(&self) -> Self {
        let mut out = BTreeMap::new();
        for v in self.map.keys() {
            let mut seen = BTreeSet::new();
            seen.insert(v.clone());
            let mut cur = self.map[v].clone();
            loop {
                let next = match &cur {
                    Term::Variable(w) => match self.map.get(w) {
                        Some(t) if !seen.contains(w) => {
                            seen.insert(w.clone());
                            Some(t.clone())
                        }
                        Some(_) => {
                            // cycle: collapse onto its smallest member
                            let min = seen.iter().min().cloned().expect("nonempty");
                            cur = Term::Variable(min);
                            None
                        }
                        None => None,
                    },
                    _ => None,
                };
                match next {
                    Some(t) => cur = t,
                    None => break,
                }
            }
            if cur.as_variable() != Some(v) {
                out.insert(v.clone(), cur);
            }
        }
        Substitution { map: out }
    }

    pub fn apply_term(&self, t: &Term) -> Term {
        match t {
            Term::Variable(v) => self.map.get(v).cloned().unwrap_or_else(|| t.clone()),
            _ => t.clone(),
        }
    }

    pub fn apply_atom(&self, a: &Atom) -> Atom {
        a.map_terms(|t| self.apply_term(t))
    }

    pub fn apply_atoms<'a>(&self, atoms: impl IntoIterator<Item = &'a Atom>) -> BTreeSet<Atom> {
        atoms.into_iter().map(|a| self.apply_atom(a)).collect()
    }

    /// Applies the substitution to body and answer tuple.
    pub fn apply_cq(&self, q: &Cq) -> Cq {
        Cq {
            answer: q.answer.iter().map(|t| self.apply_term(t)).collect(),
            body: self.apply_atoms(&q.body),
        }
    }

    /// `self` then `then`: the result maps every term `t` to
    /// `then(self(t))`.
    pub fn compose(&self, then: &Substitution) -> Substitution {
        let mut map: BTreeMap<Variable, Term> = self
            .map
            .iter()
            .map(|(v, t)| (v.clone(), then.apply_term(t)))
            .collect();
        for (v, t) in &then.map {
            map.entry(v.clone()).or_insert_with(|| t.clone());
        }
        map.retain(|v, t| t.as_variable() != Some(v));
        Substitution { map }.normalized()
    }
}

impl fmt::Debug for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, t)) in self.map.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}↦{t:?}")?;
        }
        f.write_str("}")
    }
}

/// Replaces every variable `x` of `q` by a fresh constant `c(x)` drawn from
/// the reserved `$frz` namespace. Returns the frozen database and the image
/// of the answer tuple.
pub fn freeze_cq(q: &Cq) -> (Database, Vec<Constant>) {
    let (db, answer, _) = freeze_with_map(q);
    (db, answer)
}

/// Like [`freeze_cq`] but also returns the freezing map.
pub fn freeze_with_map(q: &Cq) -> (Database, Vec<Constant>, BTreeMap<Variable, Constant>) {
    let taken: BTreeSet<String> = q.constants().iter().map(|c| c.name().to_string()).collect();
    let mut next = 0usize;
    let mut map = BTreeMap::new();
    for v in q.variables() {
        let c = loop {
            let name = format!("{FROZEN_PREFIX}{next}");
            next += 1;
            if !taken.contains(&name) {
                break Constant::new(name);
            }
        };
        map.insert(v, c);
    }
    let freeze = |t: &Term| match t {
        Term::Variable(v) => Term::Constant(map[v].clone()),
        other => other.clone(),
    };
    let atoms: Vec<Atom> = q.body().iter().map(|a| a.map_terms(freeze)).collect();
    let answer = q
        .answer()
        .iter()
        .map(|t| match freeze(t) {
            Term::Constant(c) => c,
            _ => unreachable!("answers are variables or constants"),
        })
        .collect();
    let db = Database::new(atoms).expect("frozen atoms are ground");
    (db, answer, map)
}

//! Fixture generators: the sticky lower-bound family, seeded random OMQs
//! per class, and exhaustive enumeration of small databases.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::classify::classify;
use crate::model::{Atom, Constant, Cq, Database, Omq, Predicate, Schema, Term, Tgd, Ucq};

/// Upper limit on the number of databases a single enumeration may emit.
pub const MAX_DATABASES: u128 = 1 << 24;

/// The OMQ `({S/n}, Σⁿ, Ans(0,1))`.
///
/// `S(x1..xn)` seeds `Pn(x1..xn, 0, 1)`; the rule for `i` merges the two
/// `P_i` facts that differ only at position `i` (`0` there versus `1`), and
/// `P0(0,..,0,0,1)` yields `Ans(0,1)`. A database entails the query iff it
/// contains `S(c̄)` for every `c̄ ∈ {0,1}ⁿ`.
pub fn sticky_family(n: usize) -> Omq {
    assert!(n >= 2, "the family starts at n = 2");
    let var = |i: usize| Term::variable(format!("X{i}"));
    let z = Term::variable("Z");
    let o = Term::variable("O");
    let p = |i: usize| Predicate::new(format!("P{i}"), n + 2);
    let s = Predicate::new("S", n);
    let atom = |pred: Predicate, args: Vec<Term>| Atom::new(pred, args).expect("arity by construction");

    let mut tgds = Vec::with_capacity(n + 2);
    let xs: Vec<Term> = (1..=n).map(var).collect();
    let mut seeded = xs.clone();
    seeded.extend([Term::constant("0"), Term::constant("1")]);
    tgds.push(Tgd::new(vec![atom(s.clone(), xs)], vec![atom(p(n), seeded)]).unwrap());
    for i in (1..=n).rev() {
        let row = |at_i: &Term| {
            let mut args: Vec<Term> = (1..=n)
                .map(|j| if j == i { at_i.clone() } else { var(j) })
                .collect();
            args.extend([z.clone(), o.clone()]);
            args
        };
        tgds.push(
            Tgd::new(
                vec![atom(p(i), row(&z)), atom(p(i), row(&o))],
                vec![atom(p(i - 1), row(&z))],
            )
            .unwrap(),
        );
    }
    let ans = Predicate::new("Ans", 2);
    let mut all_z = vec![z.clone(); n + 1];
    all_z.push(o.clone());
    tgds.push(
        Tgd::new(
            vec![atom(p(0), all_z)],
            vec![atom(ans.clone(), vec![z.clone(), o.clone()])],
        )
        .unwrap(),
    );
    let q = Cq::new(
        Vec::new(),
        [atom(ans, vec![Term::constant("0"), Term::constant("1")])],
    )
    .unwrap();
    let mut schema = Schema::new();
    schema.insert(&s).unwrap();
    Omq::new(schema, tgds, Ucq::from(q)).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetClass {
    Linear,
    NonRecursive,
    Sticky,
    Full,
    Any,
}

impl fmt::Display for TargetClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TargetClass::Linear => "L",
            TargetClass::NonRecursive => "NR",
            TargetClass::Sticky => "S",
            TargetClass::Full => "F",
            TargetClass::Any => "any",
        })
    }
}

impl std::str::FromStr for TargetClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l" | "linear" => Ok(TargetClass::Linear),
            "nr" | "non-recursive" => Ok(TargetClass::NonRecursive),
            "s" | "sticky" => Ok(TargetClass::Sticky),
            "f" | "full" => Ok(TargetClass::Full),
            "any" => Ok(TargetClass::Any),
            other => Err(format!("unknown class {other}; expected L, NR, S, F or any")),
        }
    }
}

/// Bounds for [`random_omq`]. Every count is an inclusive maximum; the
/// generator never emits 0-ary predicates or constants, and tgd bodies are
/// connected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub max_predicates: usize,
    pub max_arity: usize,
    pub max_tgds: usize,
    pub max_body_atoms: usize,
    pub max_query_atoms: usize,
    pub target_class: TargetClass,
    pub max_disjuncts: usize,
    pub max_answer_arity: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            max_predicates: 3,
            max_arity: 2,
            max_tgds: 3,
            max_body_atoms: 2,
            max_query_atoms: 2,
            target_class: TargetClass::Any,
            max_disjuncts: 1,
            max_answer_arity: 1,
        }
    }
}

impl GeneratorConfig {
    pub fn new(seed: u64, target_class: TargetClass) -> Self {
        GeneratorConfig {
            seed,
            target_class,
            ..Self::default()
        }
    }
}

/// Whether `tgds` belongs to `class` according to the classifier.
pub fn in_class(tgds: &[Tgd], class: TargetClass) -> bool {
    let r = classify(tgds);
    match class {
        TargetClass::Linear => r.linear,
        TargetClass::NonRecursive => r.non_recursive,
        TargetClass::Sticky => r.sticky,
        TargetClass::Full => r.full,
        TargetClass::Any => true,
    }
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    cfg: &'a GeneratorConfig,
}

impl Gen<'_> {
    fn atom(&mut self, p: &Predicate, pool: &mut Vec<Term>, fresh: &mut usize, prefix: &str) -> Atom {
        let args = (0..p.arity())
            .map(|_| {
                if !pool.is_empty() && self.rng.gen_bool(0.5) {
                    pool.choose(&mut self.rng).unwrap().clone()
                } else {
                    let v = Term::variable(format!("{prefix}{fresh}"));
                    *fresh += 1;
                    pool.push(v.clone());
                    v
                }
            })
            .collect();
        Atom::new(p.clone(), args).expect("arity by construction")
    }

    fn tgd(&mut self, preds: &[Predicate], rank: &[usize]) -> Tgd {
        let class = self.cfg.target_class;
        let max_body = if class == TargetClass::Linear {
            1
        } else {
            self.cfg.max_body_atoms.max(1)
        };
        // Non-recursive sets only derive predicates of higher rank.
        let head_idx = if class == TargetClass::NonRecursive {
            let top = rank.iter().copied().max().unwrap_or(0);
            if top == 0 {
                0
            } else {
                let r = self.rng.gen_range(1..=top);
                rank.iter().position(|&x| x == r).unwrap()
            }
        } else {
            self.rng.gen_range(0..preds.len())
        };
        let body_candidates: Vec<usize> = if class == TargetClass::NonRecursive {
            let below: Vec<usize> = (0..preds.len()).filter(|&i| rank[i] < rank[head_idx]).collect();
            if below.is_empty() {
                (0..preds.len()).filter(|&i| i != head_idx).collect()
            } else {
                below
            }
        } else {
            (0..preds.len()).collect()
        };
        let body_candidates = if body_candidates.is_empty() {
            vec![head_idx]
        } else {
            body_candidates
        };
        let n_body = self.rng.gen_range(1..=max_body);
        let mut pool = Vec::new();
        let mut fresh = 0usize;
        let mut body: Vec<Atom> = Vec::with_capacity(n_body);
        for _ in 0..n_body {
            let i = *body_candidates.choose(&mut self.rng).unwrap();
            let before = pool.clone();
            let mut a = self.atom(&preds[i], &mut pool, &mut fresh, "X");
            // Bodies stay connected: a new atom shares a variable with earlier ones.
            if !before.is_empty() && !a.args().iter().any(|t| before.contains(t)) {
                let mut args = a.args().to_vec();
                let k = self.rng.gen_range(0..args.len());
                args[k] = before.choose(&mut self.rng).unwrap().clone();
                a = Atom::new(a.predicate().clone(), args).expect("same arity");
            }
            body.push(a);
        }
        let body_vars: Vec<Term> = body
            .iter()
            .flat_map(|a| a.args().iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let head_pred = &preds[head_idx];
        let allow_existential = class != TargetClass::Full;
        let mut ex = 0usize;
        let mut args: Vec<Term> = (0..head_pred.arity())
            .map(|_| {
                if allow_existential && self.rng.gen_bool(0.3) {
                    ex += 1;
                    Term::variable(format!("Y{}", self.rng.gen_range(0..ex)))
                } else {
                    body_vars.choose(&mut self.rng).unwrap().clone()
                }
            })
            .collect();
        if !args.iter().any(|t| body_vars.contains(t)) {
            let k = self.rng.gen_range(0..args.len());
            args[k] = body_vars.choose(&mut self.rng).unwrap().clone();
        }
        let head = Atom::new(head_pred.clone(), args).expect("arity by construction");
        Tgd::new(body, vec![head]).expect("non-empty head")
    }

    fn cq(&mut self, preds: &[Predicate], arity: usize) -> Cq {
        let n = self.rng.gen_range(1..=self.cfg.max_query_atoms.max(1));
        let mut pool = Vec::new();
        let mut fresh = 0usize;
        let body: Vec<Atom> = (0..n)
            .map(|_| {
                let p = preds.choose(&mut self.rng).unwrap().clone();
                self.atom(&p, &mut pool, &mut fresh, "V")
            })
            .collect();
        let answer: Vec<Term> = (0..arity)
            .map(|_| pool.choose(&mut self.rng).unwrap().clone())
            .collect();
        Cq::new(answer, body).expect("answer drawn from the body")
    }

    fn omq(&mut self) -> Omq {
        let cfg = self.cfg;
        let n_preds = self.rng.gen_range(1..=cfg.max_predicates.max(1));
        let preds: Vec<Predicate> = (0..n_preds)
            .map(|i| Predicate::new(format!("P{i}"), self.rng.gen_range(1..=cfg.max_arity.max(1))))
            .collect();
        let mut schema = Schema::new();
        for p in &preds {
            if self.rng.gen_bool(0.75) {
                schema.insert(p).unwrap();
            }
        }
        if schema.is_empty() {
            let p = preds.choose(&mut self.rng).unwrap();
            schema.insert(p).unwrap();
        }
        let arity = self.rng.gen_range(0..=cfg.max_answer_arity);
        self.omq_over(&preds, schema, arity)
    }

    fn omq_over(&mut self, preds: &[Predicate], schema: Schema, arity: usize) -> Omq {
        let cfg = self.cfg;
        let mut rank: Vec<usize> = (0..preds.len()).collect();
        rank.shuffle(&mut self.rng);
        let n_tgds = self.rng.gen_range(0..=cfg.max_tgds);
        let tgds: Vec<Tgd> = (0..n_tgds).map(|_| self.tgd(preds, &rank)).collect();
        let n_disjuncts = self.rng.gen_range(1..=cfg.max_disjuncts.max(1));
        let disjuncts: Vec<Cq> = (0..n_disjuncts).map(|_| self.cq(preds, arity)).collect();
        Omq::new(schema, tgds, Ucq::new(disjuncts).unwrap()).expect("consistent arities")
    }
}

/// A seeded random OMQ whose tgds are verified to lie in the target class.
pub fn random_omq(cfg: &GeneratorConfig) -> Omq {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        cfg,
    };
    loop {
        let omq = g.omq();
        if in_class(omq.tgds(), cfg.target_class) {
            return omq;
        }
    }
}

/// A seeded random OMQ with the data schema, predicates and arity of
/// `like`, whose tgds lie in the target class of `cfg`.
pub fn random_companion(cfg: &GeneratorConfig, like: &Omq) -> Omq {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        cfg,
    };
    let mut preds: BTreeSet<Predicate> = like.full_schema().predicates().collect();
    preds.extend(like.query().predicates());
    let preds: Vec<Predicate> = preds.into_iter().collect();
    loop {
        let omq = g.omq_over(&preds, like.data_schema().clone(), like.arity());
        if in_class(omq.tgds(), cfg.target_class) {
            return omq;
        }
    }
}

/// A seeded random database over `schema` with at most `max_atoms` atoms
/// whose arguments are drawn from `constants`.
pub fn random_database(seed: u64, schema: &Schema, constants: &[Constant], max_atoms: usize) -> Database {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let atoms = ground_atoms(schema, constants);
    let n = rng.gen_range(0..=max_atoms.min(atoms.len()));
    Database::new(atoms.choose_multiple(&mut rng, n).cloned()).expect("ground atoms")
}

/// The constants `c1..ck`.
pub fn default_constants(k: usize) -> Vec<Constant> {
    (1..=k).map(|i| Constant::new(format!("c{i}"))).collect()
}

/// Every atom over `schema` with arguments drawn from `constants`, sorted.
pub fn ground_atoms(schema: &Schema, constants: &[Constant]) -> Vec<Atom> {
    let n = constants.len();
    let mut out = Vec::new();
    for p in schema.predicates() {
        let a = p.arity();
        for code in 0..n.pow(a as u32) {
            let mut rest = code;
            let mut args = vec![Term::constant(""); a];
            for slot in args.iter_mut().rev() {
                *slot = Term::Constant(constants[rest % n].clone());
                rest /= n;
            }
            out.push(Atom::new(p.clone(), args).expect("arity by construction"));
        }
    }
    out.sort();
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("enumeration would emit {count} databases, above the limit of {limit}")]
pub struct EnumerationTooLarge {
    pub count: u128,
    pub limit: u128,
}

/// `Σ_{j ≤ m} C(g, j)`, saturating at `u128::MAX`.
pub fn database_count(ground: usize, max_atoms: usize) -> u128 {
    let mut total: u128 = 0;
    let mut c: u128 = 1;
    for j in 0..=max_atoms.min(ground) {
        if j > 0 {
            c = match c.checked_mul((ground - j + 1) as u128) {
                Some(x) => x / j as u128,
                None => return u128::MAX,
            };
        }
        total = match total.checked_add(c) {
            Some(t) => t,
            None => return u128::MAX,
        };
    }
    total
}

/// Every subset of the ground atoms of size at most `max_atoms`, by size and
/// then lexicographically on atom indices.
#[derive(Debug, Clone)]
pub struct DatabaseEnumeration {
    atoms: Vec<Atom>,
    max_atoms: usize,
    current: Option<Vec<usize>>,
}

impl DatabaseEnumeration {
    pub fn ground_atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total(&self) -> u128 {
        database_count(self.atoms.len(), self.max_atoms)
    }
}

impl Iterator for DatabaseEnumeration {
    type Item = Database;

    fn next(&mut self) -> Option<Database> {
        let cur = self.current.as_mut()?;
        let db = Database::new(cur.iter().map(|&i| self.atoms[i].clone())).expect("ground atoms");
        let g = self.atoms.len();
        let k = cur.len();
        let mut pos = k;
        let advanced = loop {
            if pos == 0 {
                break false;
            }
            pos -= 1;
            if cur[pos] < g - (k - pos) {
                cur[pos] += 1;
                for j in pos + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break true;
            }
        };
        if !advanced {
            if k < self.max_atoms.min(g) {
                *cur = (0..k + 1).collect();
            } else {
                self.current = None;
            }
        }
        Some(db)
    }
}

/// Databases over `schema` and the given constants with at most `max_atoms`
/// atoms.
pub fn enumerate_databases_over(
    schema: &Schema,
    constants: &[Constant],
    max_atoms: usize,
) -> Result<DatabaseEnumeration, EnumerationTooLarge> {
    let atoms = ground_atoms(schema, constants);
    let count = database_count(atoms.len(), max_atoms);
    if count > MAX_DATABASES {
        return Err(EnumerationTooLarge {
            count,
            limit: MAX_DATABASES,
        });
    }
    Ok(DatabaseEnumeration {
        atoms,
        max_atoms,
        current: Some(Vec::new()),
    })
}

/// Databases over `schema` and the constants `c1..c_{max_constants}`.
pub fn enumerate_databases(
    schema: &Schema,
    max_constants: usize,
    max_atoms: usize,
) -> Result<DatabaseEnumeration, EnumerationTooLarge> {
    enumerate_databases_over(schema, &default_constants(max_constants), max_atoms)
}

/// Distinct constant names not in `taken`, in the order `c1, c2, ...`.
pub fn fresh_constants(k: usize, taken: &BTreeSet<Constant>) -> Vec<Constant> {
    (1..)
        .map(|i| Constant::new(format!("c{i}")))
        .filter(|c| !taken.contains(c))
        .take(k)
        .collect()
}

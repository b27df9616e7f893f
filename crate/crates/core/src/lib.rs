//! Reasoning and static analysis for ontology-mediated queries built from
//! tuple-generating dependencies and (unions of) conjunctive queries.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: terms, atoms, queries, dependencies, substitutions;
//! * [`parser`]: the `.omq` text format;
//! * [`classify`]: syntactic classes (linear, guarded, non-recursive, sticky, full);
//! * [`chase`]: the restricted chase and the head normal form;
//! * [`rewrite`]: unification and the XRewrite UCQ rewriting algorithm;
//! * [`eval`]: query evaluation and certain answers;
//! * [`contain`]: containment and the reductions around it;
//! * [`apps`]: connected components and distribution over components;
//! * [`testkit`]: fixture generators and bounded database enumeration.

pub mod apps;
pub mod chase;
pub mod classify;
pub mod contain;
pub mod eval;
pub mod homomorphism;
pub mod model;
pub mod parser;
pub mod rewrite;
pub mod testkit;

pub use model::{
    Atom, Constant, Cq, Database, Instance, Omq, Predicate, Schema, Substitution, Term, Tgd, Ucq,
    Variable,
};

//! The level-0 object calculus: concepts, individuals, versioned states, sorts of
//! assignment-indexed mappings, and the formula evaluator behind comprehension and
//! individualization.

mod formula;
mod mapping;
mod sort;
mod store;

pub use formula::{comprehend, eval, individualize, CmpOp, Domain, Env, Formula, Term, Universe};
pub use mapping::FiniteMapping;
pub use sort::SortSpec;
pub use store::{Attribute, Concept, Individual, State, Store, VersionPins};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CalcError {
    #[error("concept `{0}` is already defined")]
    DuplicateConcept(String),
    #[error("bad concept spec: {0}")]
    BadSpec(String),
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("individual of `{concept}` with identity {identity} already exists")]
    DuplicateIdentity { concept: String, identity: String },
    #[error("identity for `{concept}` must cover exactly {expected:?}")]
    IncompleteIdentity { concept: String, expected: Vec<String> },
    #[error("type mismatch for `{attribute}`: expected {expected}, got {got}")]
    TypeMismatch { attribute: String, expected: String, got: String },
    #[error("unknown individual {0}")]
    UnknownIndividual(String),
    #[error("unknown attribute `{attribute}` on {object}")]
    UnknownAttribute { object: String, attribute: String },
    #[error("identifying attribute `{0}` cannot change")]
    IdentityMutation(String),
    #[error("sort target `{0}` is not finite")]
    InfiniteDomain(String),
    #[error("{0} is outside the definition area")]
    OutOfDomain(String),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("{0} is not an object")]
    NotAnObject(String),
    #[error("individual {oid} has no version {version}")]
    UnknownVersion { oid: u64, version: u32 },
    #[error("no element satisfies the formula")]
    NoWitness,
    #[error("{0} elements satisfy the formula")]
    Ambiguous(usize),
}

pub type Result<T, E = CalcError> = std::result::Result<T, E>;

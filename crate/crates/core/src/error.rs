use thiserror::Error;

use crate::goods::GoodSet;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("universe of {0} goods exceeds the supported maximum of 16")]
    UniverseTooLarge(usize),
    #[error("set {set:#b} is not contained in a universe of {m} goods")]
    OutsideUniverse { set: u32, m: usize },
    #[error("strict preferences never compare a set with itself ({0})")]
    IdenticalSets(GoodSet),
    #[error("quota {k} exceeds the {pool} goods left in the pool")]
    QuotaExceedsPool { k: usize, pool: usize },
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("invalid preference: {0}")]
    InvalidPreference(String),
    #[error("additive values tie: subsets {0} and {1} have equal value")]
    TieDetected(GoodSet, GoodSet),
    #[error("blocks do not partition the universe: {0}")]
    InvalidPartition(String),
    #[error("{what} is not enumerable for m = {m} (limit {limit})")]
    EnumerationTooLarge { what: &'static str, m: usize, limit: usize },
    #[error("preference class {0} is not enumerable")]
    NotEnumerable(&'static str),
    #[error("preference is not a member of the {0} class")]
    NotInClass(&'static str),
    #[error("profile outside mechanism domain: {0}")]
    DomainError(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("quotas sum to {sum} but only {m} goods exist")]
    QuotaOverflow { sum: usize, m: usize },
    #[error("invalid ordering: {0}")]
    InvalidOrdering(String),
    #[error("bundles overlap: {0}")]
    Overlap(String),
    #[error("instance too small: {0}")]
    TooSmall(String),
    #[error("search space too large: {0}")]
    TooLarge(String),
    #[error("unsupported preference: {0}")]
    UnsupportedPreference(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

//! Serial quota mechanisms for allocating indivisible goods: preferences,
//! mechanisms, exhaustive property checkers, fairness audits and a brute
//! force characterization search.

pub mod error;
pub mod fairness;
pub mod goods;
pub mod mechanisms;
pub mod prefs;
pub mod properties;
pub mod reproduce;
pub mod search;

pub use error::{Error, Result};
pub use goods::{GoodSet, Permutation, MAX_GOODS};
pub use prefs::{
    enumerate_class, is_push_up, rational, AdditiveStrict, AdditiveValuation, ClassTag, Preference, PreferenceClass,
    PreferenceKind, Rational,
};

use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::goods::{GoodSet, Permutation};

/// Disjoint bundles, one per agent. Goods may be left unallocated.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<GoodSet>", into = "Vec<GoodSet>")]
pub struct Allocation {
    bundles: Vec<GoodSet>,
}

impl Allocation {
    pub fn new(bundles: Vec<GoodSet>) -> Result<Allocation> {
        let mut seen = GoodSet::EMPTY;
        for (i, b) in bundles.iter().enumerate() {
            if !b.is_disjoint(seen) {
                return Err(Error::Overlap(format!(
                    "bundle of agent {i} shares {} with an earlier bundle",
                    b.intersection(seen)
                )));
            }
            seen = seen.union(*b);
        }
        Ok(Allocation { bundles })
    }

    pub(crate) fn from_disjoint(bundles: Vec<GoodSet>) -> Allocation {
        debug_assert!(Allocation::new(bundles.clone()).is_ok());
        Allocation { bundles }
    }

    /// Allocation where every agent gets nothing.
    pub fn empty(n: usize) -> Allocation {
        Allocation { bundles: vec![GoodSet::EMPTY; n] }
    }

    /// Checks disjointness and that every bundle fits in a universe of `m` goods.
    pub fn validate(bundles: Vec<GoodSet>, m: usize) -> Result<Allocation> {
        if let Some(b) = bundles.iter().find(|b| !b.within(m)) {
            return Err(Error::OutsideUniverse { set: b.0, m });
        }
        Allocation::new(bundles)
    }

    pub fn n(&self) -> usize {
        self.bundles.len()
    }

    pub fn bundle(&self, agent: usize) -> GoodSet {
        self.bundles[agent]
    }

    pub fn bundles(&self) -> &[GoodSet] {
        &self.bundles
    }

    pub fn allocated(&self) -> GoodSet {
        self.bundles.iter().fold(GoodSet::EMPTY, |acc, b| acc.union(*b))
    }

    pub fn unallocated(&self, m: usize) -> GoodSet {
        self.allocated().complement(m)
    }

    pub fn is_partition(&self, m: usize) -> bool {
        self.allocated() == GoodSet::full(m)
    }

    /// `π(A) = (π(A_1), …, π(A_n))`.
    pub fn permute(&self, pi: &Permutation) -> Allocation {
        Allocation { bundles: self.bundles.iter().map(|b| pi.apply(*b)).collect() }
    }

    /// Owner of `good`, if any.
    pub fn owner(&self, good: usize) -> Option<usize> {
        self.bundles.iter().position(|b| b.contains(good))
    }

    /// Every labeled partition of `m` goods among `n` agents (`n^m` of them),
    /// or every allocation (`(n+1)^m`, the extra label meaning unallocated).
    pub fn enumerate(n: usize, m: usize, partitions_only: bool) -> Vec<Allocation> {
        let labels = if partitions_only { n } else { n + 1 };
        if labels == 0 {
            return if m == 0 { vec![Allocation::empty(0)] } else { Vec::new() };
        }
        let total = labels.pow(m as u32);
        (0..total)
            .map(|mut code| {
                let mut bundles = vec![GoodSet::EMPTY; n];
                for g in 0..m {
                    let l = code % labels;
                    code /= labels;
                    if l < n {
                        bundles[l] = bundles[l].insert(g);
                    }
                }
                Allocation { bundles }
            })
            .collect()
    }
}

impl TryFrom<Vec<GoodSet>> for Allocation {
    type Error = Error;

    fn try_from(bundles: Vec<GoodSet>) -> Result<Self> {
        Allocation::new(bundles)
    }
}

impl From<Allocation> for Vec<GoodSet> {
    fn from(a: Allocation) -> Self {
        a.bundles
    }
}

impl fmt::Debug for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.bundles.iter().join(", "))
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

//! Goods, sets of goods and renamings of goods.
//!
//! Goods are the indices `0..m`. A [`GoodSet`] is a bitmask in which bit `i`
//! stands for good `i`; every set operation is a single bit operation.

use std::fmt;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest universe the crate supports.
pub const MAX_GOODS: usize = 16;

pub(crate) fn check_universe(m: usize) -> Result<()> {
    if m > MAX_GOODS {
        return Err(Error::UniverseTooLarge(m));
    }
    Ok(())
}

/// A subset of the goods `0..m`, stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GoodSet(pub u32);

impl GoodSet {
    pub const EMPTY: GoodSet = GoodSet(0);

    /// All goods of a universe of size `m`.
    pub fn full(m: usize) -> GoodSet {
        debug_assert!(m <= MAX_GOODS);
        GoodSet(((1u64 << m) - 1) as u32)
    }

    pub fn singleton(good: usize) -> GoodSet {
        GoodSet(1 << good)
    }

    pub fn from_goods<I: IntoIterator<Item = usize>>(goods: I) -> GoodSet {
        GoodSet(goods.into_iter().fold(0, |acc, g| acc | (1 << g)))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, good: usize) -> bool {
        self.0 >> good & 1 == 1
    }

    pub fn union(self, other: GoodSet) -> GoodSet {
        GoodSet(self.0 | other.0)
    }

    pub fn intersection(self, other: GoodSet) -> GoodSet {
        GoodSet(self.0 & other.0)
    }

    pub fn difference(self, other: GoodSet) -> GoodSet {
        GoodSet(self.0 & !other.0)
    }

    pub fn insert(self, good: usize) -> GoodSet {
        GoodSet(self.0 | 1 << good)
    }

    pub fn remove(self, good: usize) -> GoodSet {
        GoodSet(self.0 & !(1 << good))
    }

    pub fn is_subset(self, other: GoodSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: GoodSet) -> bool {
        self.0 & other.0 == 0
    }

    /// Complement within a universe of `m` goods.
    pub fn complement(self, m: usize) -> GoodSet {
        GoodSet::full(m).difference(self)
    }

    pub fn within(self, m: usize) -> bool {
        self.is_subset(GoodSet::full(m))
    }

    /// Goods in ascending index order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let g = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(g)
        })
    }

    /// Every subset of `self`, starting with `self` and ending with the empty set.
    pub fn subsets(self) -> impl Iterator<Item = GoodSet> {
        let full = self.0;
        let mut next = Some(full);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == 0 { None } else { Some((cur - 1) & full) };
            Some(GoodSet(cur))
        })
    }

    /// Every subset of a universe of `m` goods in ascending bitmask order.
    pub fn all(m: usize) -> impl Iterator<Item = GoodSet> {
        (0..1u32 << m).map(GoodSet)
    }
}

impl fmt::Debug for GoodSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.iter().map(|g| format!("g{g}")).join(","))
    }
}

impl fmt::Display for GoodSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A renaming of the goods: good `i` becomes good `map[i]`.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    map: Vec<u8>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Permutation> {
        check_universe(map.len())?;
        let mut seen = 0u32;
        for &g in &map {
            if g >= map.len() || seen >> g & 1 == 1 {
                return Err(Error::InvalidPermutation(format!("{map:?} is not a bijection")));
            }
            seen |= 1 << g;
        }
        Ok(Permutation { map: map.into_iter().map(|g| g as u8).collect() })
    }

    pub fn identity(m: usize) -> Permutation {
        Permutation { map: (0..m as u8).collect() }
    }

    pub fn transposition(m: usize, a: usize, b: usize) -> Permutation {
        let mut map: Vec<u8> = (0..m as u8).collect();
        map.swap(a, b);
        Permutation { map }
    }

    pub fn random<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Permutation {
        let mut map: Vec<u8> = (0..m as u8).collect();
        map.shuffle(rng);
        Permutation { map }
    }

    /// All `m!` permutations in lexicographic order of their maps.
    pub fn all(m: usize) -> impl Iterator<Item = Permutation> {
        (0..m as u8).permutations(m).map(|map| Permutation { map })
    }

    /// Every transposition `(a b)` with `a < b`.
    pub fn transpositions(m: usize) -> impl Iterator<Item = Permutation> {
        (0..m).tuple_combinations().map(move |(a, b)| Permutation::transposition(m, a, b))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn image(&self, good: usize) -> usize {
        self.map[good] as usize
    }

    pub fn map(&self) -> Vec<usize> {
        self.map.iter().map(|&g| g as usize).collect()
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0u8; self.map.len()];
        for (i, &g) in self.map.iter().enumerate() {
            inv[g as usize] = i as u8;
        }
        Permutation { map: inv }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        Permutation { map: other.map.iter().map(|&g| self.map[g as usize]).collect() }
    }

    /// `π(S) = {π(x) | x ∈ S}`.
    pub fn apply(&self, set: GoodSet) -> GoodSet {
        GoodSet(set.iter().fold(0, |acc, g| acc | 1 << self.map[g]))
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &g)| i == g as usize)
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(map: Vec<usize>) -> Result<Self> {
        Permutation::new(map)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.map()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn subsets_are_complete_and_distinct() {
        let s = GoodSet::from_goods([0, 2, 3]);
        let subs: Vec<_> = s.subsets().collect();
        assert_eq!(subs.len(), 8);
        assert_eq!(subs.first(), Some(&s));
        assert_eq!(subs.last(), Some(&GoodSet::EMPTY));
        assert!(subs.iter().all(|t| t.is_subset(s)));
        assert_eq!(subs.iter().unique().count(), 8);
    }

    #[test]
    fn permutation_rejects_non_bijection() {
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
        assert!(Permutation::new(vec![2, 0, 1]).is_ok());
    }

    #[test]
    fn there_are_m_factorial_permutations() {
        assert_eq!(Permutation::all(0).count(), 1);
        assert_eq!(Permutation::all(4).count(), 24);
        assert_eq!(Permutation::transpositions(4).count(), 6);
    }

    proptest! {
        #[test]
        fn set_ops_agree_with_set_semantics(a in 0u32..256, b in 0u32..256) {
            let (sa, sb) = (GoodSet(a), GoodSet(b));
            let ea: std::collections::BTreeSet<_> = sa.iter().collect();
            let eb: std::collections::BTreeSet<_> = sb.iter().collect();
            prop_assert_eq!(sa.len(), ea.len());
            prop_assert_eq!(sa.union(sb).iter().collect::<Vec<_>>(), ea.union(&eb).copied().collect::<Vec<_>>());
            prop_assert_eq!(sa.intersection(sb).iter().collect::<Vec<_>>(), ea.intersection(&eb).copied().collect::<Vec<_>>());
            prop_assert_eq!(sa.difference(sb).iter().collect::<Vec<_>>(), ea.difference(&eb).copied().collect::<Vec<_>>());
            prop_assert_eq!(sa.is_subset(sb), ea.is_subset(&eb));
        }

        #[test]
        fn permutation_inverse_round_trips(seed in any::<u64>(), bits in 0u32..64) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let pi = Permutation::random(6, &mut rng);
            let s = GoodSet(bits);
            prop_assert_eq!(pi.inverse().apply(pi.apply(s)), s);
            prop_assert_eq!(pi.apply(s).len(), s.len());
            prop_assert!(pi.compose(&pi.inverse()).is_identity());
        }
    }
}

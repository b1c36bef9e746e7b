//! Strict, weakly monotone ordinal preferences over subsets of goods.
//!
//! Every [`Preference`] can be compiled into a rank table holding the
//! position of each of the `2^m` subsets (0 = worst). Lexicographic and
//! strict additive preferences keep their structured form as well and use it
//! for `O(m)` comparisons and demands; the rank table is built on first use.

mod additive;
mod class;

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, OnceLock};

use itertools::Itertools;
use serde::{Deserialize, Serialize};

pub use additive::{rational, rational_report, to_f64, AdditiveStrict, AdditiveValuation, Rational, RationalRepr};
pub use class::{enumerate_class, ClassDescriptor, ClassTag, PreferenceClass};

use crate::error::{Error, Result};
use crate::goods::{check_universe, GoodSet, Permutation};

/// Position of every subset, indexed by bitmask.
pub type RankTable = Arc<[u16]>;

#[derive(Clone, Debug)]
enum Form {
    Rank,
    Lex(Vec<u8>),
    Additive(AdditiveStrict),
}

/// Which constructor a preference came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PreferenceKind {
    RankTable,
    Lexicographic,
    AdditiveStrict,
}

#[derive(Clone)]
pub struct Preference {
    m: u8,
    form: Form,
    ranks: OnceLock<RankTable>,
}

impl Preference {
    /// Builds a preference from an explicit rank table (`rank[S]`, 0 = worst).
    ///
    /// The table must be a bijection onto `0..2^m` and strictly increasing
    /// along set inclusion.
    pub fn from_ranks(m: usize, rank: Vec<u32>) -> Result<Preference> {
        check_universe(m)?;
        let size = 1usize << m;
        if rank.len() != size {
            return Err(Error::InvalidPreference(format!("rank table has {} entries, expected {size}", rank.len())));
        }
        let mut seen = vec![false; size];
        for &r in &rank {
            if r as usize >= size || std::mem::replace(&mut seen[r as usize], true) {
                return Err(Error::InvalidPreference("rank table is not a bijection".into()));
            }
        }
        for s in GoodSet::all(m) {
            if let Some(g) = s.iter().find(|&g| rank[s.remove(g).0 as usize] > rank[s.0 as usize]) {
                return Err(Error::InvalidPreference(format!("not monotone: {} ranks above {s}", s.remove(g))));
            }
        }
        let table: RankTable = rank.into_iter().map(|r| r as u16).collect();
        Ok(Preference { m: m as u8, form: Form::Rank, ranks: OnceLock::from(table) })
    }

    /// Lexicographic preference for the good ordering `order` (most important first).
    pub fn lexicographic(order: Vec<usize>) -> Result<Preference> {
        Permutation::new(order.clone())
            .map_err(|_| Error::InvalidPreference(format!("{order:?} is not an ordering of the goods")))?;
        Ok(Preference {
            m: order.len() as u8,
            form: Form::Lex(order.into_iter().map(|g| g as u8).collect()),
            ranks: OnceLock::new(),
        })
    }

    pub fn additive(valuation: AdditiveStrict) -> Preference {
        Preference { m: valuation.m() as u8, form: Form::Additive(valuation), ranks: OnceLock::new() }
    }

    /// Lexicographic preference whose order lists the goods of `blocks[0]`
    /// first, then `blocks[1]`, and so on; ascending good index within a block.
    pub fn lexicographic_consistent_with(m: usize, blocks: &[GoodSet]) -> Result<Preference> {
        check_universe(m)?;
        let mut covered = GoodSet::EMPTY;
        for b in blocks {
            if !b.within(m) {
                return Err(Error::InvalidPartition(format!("{b} lies outside {m} goods")));
            }
            if !b.is_disjoint(covered) {
                return Err(Error::InvalidPartition(format!("{b} overlaps an earlier block")));
            }
            covered = covered.union(*b);
        }
        if covered != GoodSet::full(m) {
            return Err(Error::InvalidPartition(format!("goods {} are missing", covered.complement(m))));
        }
        Preference::lexicographic(blocks.iter().flat_map(|b| b.iter()).collect())
    }

    pub fn m(&self) -> usize {
        self.m as usize
    }

    pub fn kind(&self) -> PreferenceKind {
        match self.form {
            Form::Rank => PreferenceKind::RankTable,
            Form::Lex(_) => PreferenceKind::Lexicographic,
            Form::Additive(_) => PreferenceKind::AdditiveStrict,
        }
    }

    pub fn lex_order(&self) -> Option<Vec<usize>> {
        match &self.form {
            Form::Lex(order) => Some(order.iter().map(|&g| g as usize).collect()),
            _ => None,
        }
    }

    pub fn additive_valuation(&self) -> Option<&AdditiveStrict> {
        match &self.form {
            Form::Additive(v) => Some(v),
            _ => None,
        }
    }

    /// Whether the preference is lexicographic, regardless of how it was built.
    pub fn is_lexicographic(&self) -> bool {
        self.as_lexicographic().is_some()
    }

    /// The equivalent lexicographic order, if there is one.
    pub fn as_lexicographic(&self) -> Option<Vec<usize>> {
        if let Some(order) = self.lex_order() {
            return Some(order);
        }
        // A lexicographic order ranks singletons by importance.
        let order: Vec<usize> =
            (0..self.m()).sorted_by_key(|&g| std::cmp::Reverse(self.rank(GoodSet::singleton(g)))).collect();
        let lex = Preference::lexicographic(order.clone()).ok()?;
        (lex.ranks() == self.ranks()).then_some(order)
    }

    fn lex_key(order: &[u8], set: GoodSet) -> u32 {
        let m = order.len();
        order
            .iter()
            .enumerate()
            .filter(|(_, &g)| set.contains(g as usize))
            .fold(0, |acc, (j, _)| acc | 1 << (m - 1 - j))
    }

    /// The compiled rank table.
    pub fn ranks(&self) -> &RankTable {
        self.ranks.get_or_init(|| match &self.form {
            Form::Rank => unreachable!("rank tables are set at construction"),
            Form::Lex(order) => GoodSet::all(self.m()).map(|s| Preference::lex_key(order, s) as u16).collect(),
            Form::Additive(v) => {
                let mut table = vec![0u16; 1 << self.m()];
                let sorted = GoodSet::all(self.m()).sorted_by_key(|&s| v.scaled_value(s));
                for (r, s) in sorted.enumerate() {
                    table[s.0 as usize] = r as u16;
                }
                table.into()
            }
        })
    }

    /// Position of `set` (0 = worst, `2^m - 1` = the full set).
    pub fn rank(&self, set: GoodSet) -> u16 {
        self.ranks()[set.0 as usize]
    }

    /// Strict comparison of two distinct sets.
    pub fn compare(&self, s: GoodSet, t: GoodSet) -> Result<Ordering> {
        let m = self.m();
        for x in [s, t] {
            if !x.within(m) {
                return Err(Error::OutsideUniverse { set: x.0, m });
            }
        }
        if s == t {
            return Err(Error::IdenticalSets(s));
        }
        Ok(self.cmp_sets(s, t))
    }

    /// Total order on sets; `Equal` only for identical sets.
    pub fn cmp_sets(&self, s: GoodSet, t: GoodSet) -> Ordering {
        if let Some(ranks) = self.ranks.get() {
            return ranks[s.0 as usize].cmp(&ranks[t.0 as usize]);
        }
        match &self.form {
            Form::Lex(order) => Preference::lex_key(order, s).cmp(&Preference::lex_key(order, t)),
            Form::Additive(v) => v.scaled_value(s).cmp(&v.scaled_value(t)),
            Form::Rank => unreachable!(),
        }
    }

    /// `s ≻ t`.
    pub fn prefers(&self, s: GoodSet, t: GoodSet) -> bool {
        self.cmp_sets(s, t) == Ordering::Greater
    }

    /// `s ≽ t`.
    pub fn weakly_prefers(&self, s: GoodSet, t: GoodSet) -> bool {
        self.cmp_sets(s, t) != Ordering::Less
    }

    /// The `k`-demand from `pool`: the best subset of `pool` with at most `k` goods.
    pub fn demand(&self, pool: GoodSet, k: usize) -> Result<GoodSet> {
        if !pool.within(self.m()) {
            return Err(Error::OutsideUniverse { set: pool.0, m: self.m() });
        }
        if k > pool.len() {
            return Err(Error::QuotaExceedsPool { k, pool: pool.len() });
        }
        Ok(self.demand_unchecked(pool, k))
    }

    pub(crate) fn demand_unchecked(&self, pool: GoodSet, k: usize) -> GoodSet {
        match &self.form {
            Form::Lex(order) => {
                GoodSet::from_goods(order.iter().map(|&g| g as usize).filter(|&g| pool.contains(g)).take(k))
            }
            Form::Additive(v) => {
                GoodSet::from_goods(pool.iter().sorted_by_key(|&g| std::cmp::Reverse(v.scaled_good(g))).take(k))
            }
            Form::Rank => {
                pool.subsets().filter(|t| t.len() <= k).max_by_key(|&t| self.rank(t)).unwrap_or(GoodSet::EMPTY)
            }
        }
    }

    /// The single most preferred good in `pool`.
    pub fn top_good(&self, pool: GoodSet) -> Option<usize> {
        if pool.is_empty() {
            return None;
        }
        self.demand_unchecked(pool, 1).iter().next()
    }

    /// `≼^π`, defined by `π(S) ≼^π π(T) ⇔ S ≼ T`.
    pub fn permute(&self, pi: &Permutation) -> Preference {
        assert_eq!(pi.len(), self.m(), "permutation and preference disagree on m");
        match &self.form {
            Form::Lex(order) => Preference {
                m: self.m,
                form: Form::Lex(order.iter().map(|&g| pi.image(g as usize) as u8).collect()),
                ranks: OnceLock::new(),
            },
            Form::Additive(v) => Preference::additive(
                AdditiveStrict::new(v.valuation().permute(pi)).expect("permuting keeps sums distinct"),
            ),
            Form::Rank => {
                let ranks = self.ranks();
                let mut table = vec![0u16; ranks.len()];
                for s in GoodSet::all(self.m()) {
                    table[pi.apply(s).0 as usize] = ranks[s.0 as usize];
                }
                Preference { m: self.m, form: Form::Rank, ranks: OnceLock::from(RankTable::from(table)) }
            }
        }
    }

    /// The preference induced on the goods `w`, re-indexed densely so that
    /// the `j`-th smallest good of `w` becomes good `j`.
    pub fn induce(&self, w: GoodSet) -> Result<Preference> {
        if !w.within(self.m()) {
            return Err(Error::OutsideUniverse { set: w.0, m: self.m() });
        }
        let goods: Vec<usize> = w.iter().collect();
        let dense = |g: usize| goods.iter().position(|&x| x == g).expect("good of w");
        let expand = |s: GoodSet| GoodSet::from_goods(s.iter().map(|j| goods[j]));
        Ok(match &self.form {
            Form::Lex(order) => Preference::lexicographic(
                order.iter().map(|&g| g as usize).filter(|&g| w.contains(g)).map(dense).collect(),
            )?,
            Form::Additive(v) => {
                Preference::additive(AdditiveStrict::from_values(goods.iter().map(|&g| v.values()[g]).collect())?)
            }
            Form::Rank => {
                let k = goods.len();
                let mut table = vec![0u32; 1 << k];
                let sorted = GoodSet::all(k).sorted_by_key(|&s| self.rank(expand(s)));
                for (r, s) in sorted.enumerate() {
                    table[s.0 as usize] = r as u32;
                }
                Preference::from_ranks(k, table)?
            }
        })
    }

    /// True iff `A ∪ (M ∖ s) ≺ B` for every `A ⊊ B ⊆ s`.
    pub fn strongly_desires(&self, s: GoodSet) -> bool {
        let rest = s.complement(self.m());
        s.subsets().all(|b| b.subsets().filter(|&a| a != b).all(|a| self.prefers(b, a.union(rest))))
    }

    /// True iff every `Z ≼_base s` also satisfies `Z ≼_self s`.
    pub fn is_push_up_of(&self, base: &Preference, s: GoodSet) -> bool {
        GoodSet::all(self.m()).filter(|&z| base.weakly_prefers(s, z)).all(|z| self.weakly_prefers(s, z))
    }

    /// Whether two preferences order every pair of subsets identically.
    pub fn order_identical(&self, other: &Preference) -> bool {
        if self.m != other.m {
            return false;
        }
        if let (Form::Lex(a), Form::Lex(b)) = (&self.form, &other.form) {
            return a == b;
        }
        self.ranks() == other.ranks()
    }
}

/// `candidate` is a push-up of `base` for `s`.
pub fn is_push_up(candidate: &Preference, base: &Preference, s: GoodSet) -> bool {
    candidate.is_push_up_of(base, s)
}

impl PartialEq for Preference {
    fn eq(&self, other: &Self) -> bool {
        self.order_identical(other)
    }
}

impl Eq for Preference {}

impl Hash for Preference {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.m.hash(state);
        self.ranks().hash(state);
    }
}

impl fmt::Debug for Preference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.form {
            Form::Lex(order) => write!(f, "Lex({})", order.iter().map(|g| format!("g{g}")).join(",")),
            Form::Additive(v) => write!(f, "Additive({})", v.values().iter().join(",")),
            Form::Rank => write!(f, "Rank({:?})", self.ranks()),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum PreferenceRepr {
    Lex { order: Vec<usize> },
    Rank { rank: Vec<u32> },
    Additive { values: Vec<RationalRepr> },
}

impl Serialize for Preference {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match &self.form {
            Form::Lex(order) => PreferenceRepr::Lex { order: order.iter().map(|&g| g as usize).collect() },
            Form::Rank => PreferenceRepr::Rank { rank: self.ranks().iter().map(|&r| r as u32).collect() },
            Form::Additive(v) => PreferenceRepr::Additive { values: v.values().iter().map(|&r| r.into()).collect() },
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Preference {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = PreferenceRepr::deserialize(deserializer)?;
        let pref = match repr {
            PreferenceRepr::Lex { order } => Preference::lexicographic(order),
            PreferenceRepr::Rank { rank } => {
                let m = rank.len().trailing_zeros() as usize;
                Preference::from_ranks(m, rank)
            }
            PreferenceRepr::Additive { values } => {
                AdditiveValuation::try_from(values).and_then(AdditiveStrict::new).map(Preference::additive)
            }
        };
        pref.map_err(serde::de::Error::custom)
    }
}

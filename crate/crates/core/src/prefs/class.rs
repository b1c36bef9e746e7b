use std::collections::HashMap;
use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use super::{Preference, PreferenceKind, RankTable};
use crate::error::{Error, Result};
use crate::goods::{check_universe, GoodSet, Permutation};

pub const LEX_ENUMERATION_LIMIT: usize = 8;
pub const MONOTONE_ENUMERATION_LIMIT: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassTag {
    #[serde(rename = "lex")]
    Lexicographic,
    #[serde(rename = "all")]
    StrictMonotoneAll,
    #[serde(rename = "additive")]
    StrictAdditive,
    #[serde(rename = "explicit")]
    ExplicitList,
}

impl ClassTag {
    pub fn name(self) -> &'static str {
        match self {
            ClassTag::Lexicographic => "lexicographic",
            ClassTag::StrictMonotoneAll => "strict monotone",
            ClassTag::StrictAdditive => "strict additive",
            ClassTag::ExplicitList => "explicit",
        }
    }
}

impl fmt::Display for ClassTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ClassTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "lex" | "lexicographic" => Ok(ClassTag::Lexicographic),
            "all" | "monotone" => Ok(ClassTag::StrictMonotoneAll),
            "additive" => Ok(ClassTag::StrictAdditive),
            "explicit" => Ok(ClassTag::ExplicitList),
            other => Err(format!("unknown preference class `{other}` (expected lex, all or additive)")),
        }
    }
}

/// Every preference of an enumerable class, in a fixed deterministic order.
///
/// Lexicographic orders come out in lexicographic order of the good
/// sequence; strict monotone preferences are the linear extensions of the
/// subset lattice, built worst set first, trying candidates in ascending
/// bitmask order.
pub fn enumerate_class(tag: ClassTag, m: usize) -> Result<Vec<Preference>> {
    match tag {
        ClassTag::Lexicographic => {
            if m > LEX_ENUMERATION_LIMIT {
                return Err(Error::EnumerationTooLarge {
                    what: "lexicographic class",
                    m,
                    limit: LEX_ENUMERATION_LIMIT,
                });
            }
            Ok((0..m).permutations(m).map(|order| Preference::lexicographic(order).expect("permutation")).collect())
        }
        ClassTag::StrictMonotoneAll => {
            if m > MONOTONE_ENUMERATION_LIMIT {
                return Err(Error::EnumerationTooLarge {
                    what: "strict monotone class",
                    m,
                    limit: MONOTONE_ENUMERATION_LIMIT,
                });
            }
            let mut out = Vec::new();
            let mut rank = vec![u32::MAX; 1 << m];
            linear_extensions(m, 0, &mut rank, &mut out);
            Ok(out)
        }
        ClassTag::StrictAdditive => Err(Error::NotEnumerable("strict additive")),
        ClassTag::ExplicitList => Err(Error::NotEnumerable("explicit (members must be supplied)")),
    }
}

fn linear_extensions(m: usize, next: u32, rank: &mut [u32], out: &mut Vec<Preference>) {
    if next as usize == rank.len() {
        out.push(Preference::from_ranks(m, rank.to_vec()).expect("linear extension"));
        return;
    }
    for s in GoodSet::all(m) {
        let ready = rank[s.0 as usize] == u32::MAX && s.iter().all(|g| rank[s.remove(g).0 as usize] != u32::MAX);
        if ready {
            rank[s.0 as usize] = next;
            linear_extensions(m, next + 1, rank, out);
            rank[s.0 as usize] = u32::MAX;
        }
    }
}

/// A class of preferences over `m` goods.
///
/// Named enumerable classes hold all of their members; the strict additive
/// class is described only by membership.
#[derive(Clone, Debug)]
pub struct PreferenceClass {
    tag: ClassTag,
    m: usize,
    members: Vec<Preference>,
    index: HashMap<RankTable, usize>,
    permutation_closed: bool,
}

impl PreferenceClass {
    pub fn new(tag: ClassTag, m: usize) -> Result<PreferenceClass> {
        check_universe(m)?;
        match tag {
            ClassTag::StrictAdditive => {
                Ok(PreferenceClass { tag, m, members: Vec::new(), index: HashMap::new(), permutation_closed: true })
            }
            ClassTag::ExplicitList => {
                Err(Error::InvalidDomain("explicit classes are built with PreferenceClass::explicit".into()))
            }
            _ => {
                let members = enumerate_class(tag, m)?;
                let index = members.iter().enumerate().map(|(i, p)| (p.ranks().clone(), i)).collect();
                Ok(PreferenceClass { tag, m, members, index, permutation_closed: true })
            }
        }
    }

    pub fn lexicographic(m: usize) -> Result<PreferenceClass> {
        PreferenceClass::new(ClassTag::Lexicographic, m)
    }

    pub fn strict_monotone(m: usize) -> Result<PreferenceClass> {
        PreferenceClass::new(ClassTag::StrictMonotoneAll, m)
    }

    pub fn strict_additive(m: usize) -> Result<PreferenceClass> {
        PreferenceClass::new(ClassTag::StrictAdditive, m)
    }

    /// An explicit list of preferences; duplicates (up to order identity) are dropped.
    pub fn explicit(m: usize, members: Vec<Preference>) -> Result<PreferenceClass> {
        check_universe(m)?;
        let mut index = HashMap::new();
        let mut kept = Vec::new();
        for p in members {
            if p.m() != m {
                return Err(Error::InvalidDomain(format!("member over {} goods in a class over {m}", p.m())));
            }
            if !index.contains_key(p.ranks()) {
                index.insert(p.ranks().clone(), kept.len());
                kept.push(p);
            }
        }
        let permutation_closed =
            Permutation::all(m).all(|pi| kept.iter().all(|p| index.contains_key(p.permute(&pi).ranks())));
        Ok(PreferenceClass { tag: ClassTag::ExplicitList, m, members: kept, index, permutation_closed })
    }

    pub fn tag(&self) -> ClassTag {
        self.tag
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_enumerable(&self) -> bool {
        self.tag != ClassTag::StrictAdditive
    }

    pub fn is_permutation_closed(&self) -> bool {
        self.permutation_closed
    }

    /// Whether every lexicographic preference belongs to the class.
    pub fn contains_all_lexicographic(&self) -> bool {
        match self.tag {
            ClassTag::Lexicographic | ClassTag::StrictMonotoneAll => true,
            ClassTag::StrictAdditive => true,
            ClassTag::ExplicitList => (0..self.m)
                .permutations(self.m)
                .all(|o| self.index.contains_key(Preference::lexicographic(o).unwrap().ranks())),
        }
    }

    pub fn members(&self) -> &[Preference] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn get(&self, i: usize) -> &Preference {
        &self.members[i]
    }

    pub fn require_enumerable(&self) -> Result<()> {
        if self.is_enumerable() {
            Ok(())
        } else {
            Err(Error::NotEnumerable(self.tag.name()))
        }
    }

    /// Position of `pref` among the members.
    pub fn index_of(&self, pref: &Preference) -> Result<usize> {
        self.require_enumerable()?;
        if pref.m() != self.m {
            return Err(Error::NotInClass(self.tag.name()));
        }
        self.index.get(pref.ranks()).copied().ok_or(Error::NotInClass(self.tag.name()))
    }

    pub fn contains(&self, pref: &Preference) -> bool {
        match self.tag {
            ClassTag::StrictAdditive => pref.m() == self.m && pref.kind() == PreferenceKind::AdditiveStrict,
            _ => self.index_of(pref).is_ok(),
        }
    }

    /// Member index of `≼^π` for every member `≼`.
    pub fn permutation_action(&self, pi: &Permutation) -> Result<Vec<usize>> {
        self.require_enumerable()?;
        self.members
            .iter()
            .map(|p| {
                self.index_of(&p.permute(pi))
                    .map_err(|_| Error::InvalidDomain(format!("class is not closed under permutation {:?}", pi.map())))
            })
            .collect()
    }
}

/// JSON description of a class: `{"tag":"lex","m":3}`, or an explicit list.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassDescriptor {
    pub tag: ClassTag,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<Preference>>,
}

impl ClassDescriptor {
    pub fn build(&self) -> Result<PreferenceClass> {
        match (&self.tag, &self.members) {
            (ClassTag::ExplicitList, Some(members)) => PreferenceClass::explicit(self.m, members.clone()),
            (ClassTag::ExplicitList, None) => Err(Error::InvalidDomain("explicit class without members".into())),
            (tag, _) => PreferenceClass::new(*tag, self.m),
        }
    }
}

impl From<&PreferenceClass> for ClassDescriptor {
    fn from(c: &PreferenceClass) -> Self {
        ClassDescriptor { tag: c.tag, m: c.m, members: (c.tag == ClassTag::ExplicitList).then(|| c.members.clone()) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute force: every ordering of the 2^m subsets that respects inclusion.
    fn count_monotone_orderings(m: usize) -> usize {
        let n = 1usize << m;
        (0..n)
            .permutations(n)
            .filter(|order| {
                let mut rank = vec![0; n];
                for (r, &s) in order.iter().enumerate() {
                    rank[s] = r;
                }
                (0..n).all(|s| (0..m).filter(|g| s >> g & 1 == 1).all(|g| rank[s & !(1 << g)] < rank[s]))
            })
            .count()
    }

    #[test]
    fn brute_force_counts() {
        assert_eq!(count_monotone_orderings(2), 2);
        assert_eq!(count_monotone_orderings(3), 48);
    }

    #[test]
    fn class_sizes() {
        assert_eq!(enumerate_class(ClassTag::Lexicographic, 3).unwrap().len(), 6);
        assert_eq!(enumerate_class(ClassTag::StrictMonotoneAll, 0).unwrap().len(), 1);
        assert_eq!(enumerate_class(ClassTag::StrictMonotoneAll, 1).unwrap().len(), 1);
        assert_eq!(enumerate_class(ClassTag::StrictMonotoneAll, 2).unwrap().len(), 2);
        assert_eq!(enumerate_class(ClassTag::StrictMonotoneAll, 3).unwrap().len(), 48);
        assert_eq!(enumerate_class(ClassTag::Lexicographic, 0).unwrap().len(), 1);
    }

    #[test]
    fn enumeration_limits() {
        assert!(matches!(enumerate_class(ClassTag::Lexicographic, 9), Err(Error::EnumerationTooLarge { .. })));
        assert!(matches!(enumerate_class(ClassTag::StrictMonotoneAll, 4), Err(Error::EnumerationTooLarge { .. })));
        assert!(matches!(enumerate_class(ClassTag::StrictAdditive, 2), Err(Error::NotEnumerable(_))));
    }

    #[test]
    fn enumeration_is_duplicate_free_and_deterministic() {
        for (tag, m) in [(ClassTag::Lexicographic, 4), (ClassTag::StrictMonotoneAll, 3)] {
            let a = enumerate_class(tag, m).unwrap();
            let b = enumerate_class(tag, m).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.iter().map(|p| p.ranks().clone()).unique().count(), a.len());
        }
    }

    #[test]
    fn monotone_class_contains_all_lexicographic() {
        let all = PreferenceClass::strict_monotone(3).unwrap();
        assert!(all.contains_all_lexicographic());
        for p in enumerate_class(ClassTag::Lexicographic, 3).unwrap() {
            assert!(all.contains(&p));
        }
        assert_eq!(all.members().iter().filter(|p| p.is_lexicographic()).count(), 6);
    }

    #[test]
    fn named_classes_are_permutation_closed() {
        for c in [PreferenceClass::lexicographic(3).unwrap(), PreferenceClass::strict_monotone(3).unwrap()] {
            for pi in Permutation::all(3) {
                assert!(c.permutation_action(&pi).is_ok());
            }
        }
    }

    #[test]
    fn explicit_class_closure_is_checked() {
        let one = Preference::lexicographic(vec![0, 1, 2]).unwrap();
        let c = PreferenceClass::explicit(3, vec![one]).unwrap();
        assert!(!c.is_permutation_closed());
        assert!(!c.contains_all_lexicographic());
        let all = enumerate_class(ClassTag::Lexicographic, 3).unwrap();
        let c = PreferenceClass::explicit(3, all).unwrap();
        assert!(c.is_permutation_closed());
        assert!(c.contains_all_lexicographic());
    }

    #[test]
    fn strictness_and_monotonicity_of_every_member() {
        for (tag, m) in [(ClassTag::Lexicographic, 3), (ClassTag::StrictMonotoneAll, 3)] {
            for p in enumerate_class(tag, m).unwrap() {
                for s in GoodSet::all(m) {
                    for t in GoodSet::all(m).filter(|&t| t != s) {
                        let st = p.compare(s, t).unwrap();
                        assert_eq!(st.reverse(), p.compare(t, s).unwrap());
                        if t.is_subset(s) {
                            assert_eq!(st, std::cmp::Ordering::Greater);
                        }
                    }
                }
                assert_eq!(p.rank(GoodSet::EMPTY), 0);
                assert_eq!(p.rank(GoodSet::full(m)) as usize, (1 << m) - 1);
            }
        }
    }

    #[test]
    fn permutation_round_trip_exhaustive() {
        let c = PreferenceClass::strict_monotone(3).unwrap();
        for p in c.members() {
            for pi in Permutation::all(3) {
                assert_eq!(&p.permute(&pi).permute(&pi.inverse()), p);
            }
        }
    }

    #[test]
    fn induced_preferences_agree_exhaustively() {
        let c = PreferenceClass::strict_monotone(3).unwrap();
        for p in c.members() {
            for w in GoodSet::all(3) {
                let q = p.induce(w).unwrap();
                let goods: Vec<usize> = w.iter().collect();
                let expand = |s: GoodSet| GoodSet::from_goods(s.iter().map(|j| goods[j]));
                for s in GoodSet::all(w.len()) {
                    for t in GoodSet::all(w.len()) {
                        assert_eq!(q.cmp_sets(s, t), p.cmp_sets(expand(s), expand(t)));
                    }
                }
            }
        }
    }

    #[test]
    fn lexicographic_prefixes_are_exactly_the_strongly_desired_sets() {
        for m in 0..=4 {
            for p in enumerate_class(ClassTag::Lexicographic, m).unwrap() {
                let order = p.lex_order().unwrap();
                let prefixes: Vec<GoodSet> = (0..=m).map(|k| GoodSet::from_goods(order[..k].iter().copied())).collect();
                for s in GoodSet::all(m) {
                    assert_eq!(p.strongly_desires(s), prefixes.contains(&s), "{p:?} {s}");
                }
            }
        }
    }

    #[test]
    fn demand_beats_every_feasible_subset() {
        let c = PreferenceClass::strict_monotone(3).unwrap();
        for p in c.members() {
            for pool in GoodSet::all(3) {
                for k in 0..=pool.len() {
                    let d = p.demand(pool, k).unwrap();
                    assert_eq!(d.len(), k);
                    assert!(pool.subsets().filter(|t| t.len() <= k).all(|t| p.weakly_prefers(d, t)));
                }
            }
        }
    }
}

use serde::{Deserialize, Serialize};

use super::Allocation;
use crate::error::{Error, Result};
use crate::goods::GoodSet;
use crate::prefs::Preference;

/// A quota vector together with a picking order: the `i`-th picker `p[i]`
/// takes `q[i]` goods.
///
/// Values are always canonical: zero quotas form a suffix and the agents
/// holding them appear in ascending index order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawQuotaOrdering")]
pub struct QuotaOrdering {
    q: Vec<usize>,
    p: Vec<usize>,
    m: usize,
}

#[derive(Deserialize)]
struct RawQuotaOrdering {
    q: Vec<usize>,
    p: Vec<usize>,
    m: Option<usize>,
}

impl TryFrom<RawQuotaOrdering> for QuotaOrdering {
    type Error = Error;

    fn try_from(r: RawQuotaOrdering) -> Result<Self> {
        let m = r.m.unwrap_or_else(|| r.q.iter().sum());
        QuotaOrdering::canonicalize(&r.q, &r.p, m)
    }
}

impl QuotaOrdering {
    /// Moves zero quotas to the end, sorts their agents by index and keeps
    /// the order of everyone else.
    pub fn canonicalize(q: &[usize], p: &[usize], m: usize) -> Result<QuotaOrdering> {
        if q.len() != p.len() {
            return Err(Error::InvalidOrdering(format!("{} quotas but {} agents in the ordering", q.len(), p.len())));
        }
        let n = p.len();
        let mut seen = vec![false; n];
        for &a in p {
            if a >= n || std::mem::replace(&mut seen[a], true) {
                return Err(Error::InvalidOrdering(format!("{p:?} is not a permutation of the agents")));
            }
        }
        let sum: usize = q.iter().sum();
        if sum > m {
            return Err(Error::QuotaOverflow { sum, m });
        }
        let mut pairs: Vec<(usize, usize)> =
            q.iter().zip(p).filter(|(&qi, _)| qi > 0).map(|(&qi, &pi)| (qi, pi)).collect();
        let mut idle: Vec<usize> = q.iter().zip(p).filter(|(&qi, _)| qi == 0).map(|(_, &pi)| pi).collect();
        idle.sort_unstable();
        pairs.extend(idle.into_iter().map(|a| (0, a)));
        Ok(QuotaOrdering {
            q: pairs.iter().map(|&(qi, _)| qi).collect(),
            p: pairs.iter().map(|&(_, pi)| pi).collect(),
            m,
        })
    }

    /// Quotas indexed by agent with picking order `0, 1, …, n-1`.
    pub fn identity_order(q: &[usize], m: usize) -> Result<QuotaOrdering> {
        QuotaOrdering::canonicalize(q, &(0..q.len()).collect::<Vec<_>>(), m)
    }

    pub fn q(&self) -> &[usize] {
        &self.q
    }

    pub fn p(&self) -> &[usize] {
        &self.p
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn total(&self) -> usize {
        self.q.iter().sum()
    }

    pub fn is_partition(&self) -> bool {
        self.total() == self.m
    }

    /// The quota held by `agent`.
    pub fn quota_of(&self, agent: usize) -> usize {
        self.q[self.p.iter().position(|&a| a == agent).expect("agent in ordering")]
    }

    pub fn first_picker(&self) -> Option<usize> {
        self.p.first().copied()
    }
}

/// Agent `p_i` receives her `q_i`-demand from the goods left by `p_1, …, p_{i-1}`.
pub fn apply_serial_quota(sq: &QuotaOrdering, profile: &[Preference]) -> Allocation {
    assert_eq!(profile.len(), sq.n(), "profile size differs from the number of agents");
    let mut remaining = GoodSet::full(sq.m);
    let mut bundles = vec![GoodSet::EMPTY; sq.n()];
    for (&k, &agent) in sq.q.iter().zip(&sq.p) {
        if k == 0 {
            continue;
        }
        let d = profile[agent].demand_unchecked(remaining, k);
        bundles[agent] = d;
        remaining = remaining.difference(d);
    }
    Allocation::from_disjoint(bundles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prefs::{rational, AdditiveStrict, PreferenceClass, Rational};
    use proptest::prelude::*;

    #[test]
    fn canonicalize_examples() {
        let sq = QuotaOrdering::canonicalize(&[1, 2], &[0, 1], 3).unwrap();
        assert_eq!((sq.q(), sq.p()), (&[1, 2][..], &[0, 1][..]));
        let sq = QuotaOrdering::canonicalize(&[0, 2], &[0, 1], 3).unwrap();
        assert_eq!((sq.q(), sq.p()), (&[2, 0][..], &[1, 0][..]));
        assert_eq!(QuotaOrdering::canonicalize(&[2, 2], &[0, 1], 3), Err(Error::QuotaOverflow { sum: 4, m: 3 }));
        assert!(matches!(QuotaOrdering::canonicalize(&[1, 1], &[0, 0], 3), Err(Error::InvalidOrdering(_))));
        assert!(matches!(QuotaOrdering::canonicalize(&[1], &[0, 1], 3), Err(Error::InvalidOrdering(_))));
    }

    #[test]
    fn zero_quota_agents_sorted() {
        let sq = QuotaOrdering::canonicalize(&[0, 1, 0], &[2, 1, 0], 3).unwrap();
        assert_eq!((sq.q(), sq.p()), (&[1, 0, 0][..], &[1, 0, 2][..]));
    }

    #[test]
    fn swap_instance() {
        let a = AdditiveStrict::from_values(vec![
            Rational::from_integer(11),
            rational(1001, 100),
            Rational::from_integer(10),
        ])
        .unwrap();
        let b = AdditiveStrict::from_values(vec![
            Rational::from_integer(10),
            rational(101, 100),
            Rational::from_integer(1),
        ])
        .unwrap();
        let profile = vec![Preference::additive(a.clone()), Preference::additive(b.clone())];
        let sq = QuotaOrdering::identity_order(&[1, 2], 3).unwrap();
        let alloc = apply_serial_quota(&sq, &profile);
        assert_eq!(alloc.bundles(), &[GoodSet::from_goods([0]), GoodSet::from_goods([1, 2])]);
        assert_eq!(a.value(alloc.bundle(0)), Rational::from_integer(11));
        assert_eq!(b.value(alloc.bundle(1)), rational(201, 100));
    }

    #[test]
    fn identical_lexicographic_profile_gives_prefix_blocks() {
        let order = vec![2, 0, 3, 1];
        let pref = Preference::lexicographic(order.clone()).unwrap();
        let sq = QuotaOrdering::canonicalize(&[1, 2, 1], &[1, 2, 0], 4).unwrap();
        let alloc = apply_serial_quota(&sq, &vec![pref; 3]);
        assert_eq!(alloc.bundle(1), GoodSet::from_goods([2]));
        assert_eq!(alloc.bundle(2), GoodSet::from_goods([0, 3]));
        assert_eq!(alloc.bundle(0), GoodSet::from_goods([1]));
    }

    #[test]
    fn full_quota_takes_everything() {
        let class = PreferenceClass::strict_monotone(3).unwrap();
        let sq = QuotaOrdering::identity_order(&[3, 0], 3).unwrap();
        for a in class.members() {
            for b in class.members() {
                let alloc = apply_serial_quota(&sq, &[a.clone(), b.clone()]);
                assert_eq!(alloc.bundles(), &[GoodSet::full(3), GoodSet::EMPTY]);
            }
        }
    }

    #[test]
    fn json_canonicalizes() {
        let sq: QuotaOrdering = serde_json::from_str(r#"{"q":[0,2],"p":[0,1],"m":3}"#).unwrap();
        assert_eq!((sq.q(), sq.p(), sq.m()), (&[2, 0][..], &[1, 0][..], 3));
        assert!(serde_json::from_str::<QuotaOrdering>(r#"{"q":[2,2],"p":[0,1],"m":3}"#).is_err());
    }

    proptest! {
        #[test]
        fn canonicalize_is_idempotent_and_output_invariant(
            q in proptest::collection::vec(0usize..3, 3),
            p in Just(vec![0usize, 1, 2]).prop_shuffle(),
            orders in proptest::collection::vec(Just(vec![0usize, 1, 2, 3, 4, 5]).prop_shuffle(), 3),
        ) {
            let m = 6;
            let sq = QuotaOrdering::canonicalize(&q, &p, m).unwrap();
            prop_assert_eq!(&QuotaOrdering::canonicalize(sq.q(), sq.p(), m).unwrap(), &sq);
            let profile: Vec<Preference> =
                orders.into_iter().map(|o| Preference::lexicographic(o).unwrap()).collect();
            let raw = QuotaOrdering { q: q.clone(), p: p.clone(), m };
            let alloc = apply_serial_quota(&sq, &profile);
            prop_assert_eq!(&apply_serial_quota(&raw, &profile), &alloc);
            for (i, &agent) in sq.p().iter().enumerate() {
                prop_assert_eq!(alloc.bundle(agent).len(), sq.q()[i]);
            }
            let first = sq.p()[0];
            prop_assert_eq!(alloc.bundle(first), profile[first].demand(GoodSet::full(m), sq.q()[0]).unwrap());
        }
    }
}

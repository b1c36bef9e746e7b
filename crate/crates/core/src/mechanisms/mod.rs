//! Allocation mechanisms: serial-quota, explicit tables, Round Robin and
//! three small mechanisms that each break exactly one of truthfulness,
//! non-bossiness and neutrality.

mod allocation;
mod cardinal;
mod descriptor;
mod quota;

use std::sync::Arc;

use rayon::prelude::*;

pub use allocation::Allocation;
pub use cardinal::{cardinal_apply, CardinalInstance};
pub use descriptor::{MechanismDescriptor, RuleDescriptor};
pub use quota::{apply_serial_quota, QuotaOrdering};

use crate::error::{Error, Result};
use crate::goods::GoodSet;
use crate::prefs::{ClassTag, Preference, PreferenceClass};

/// Largest number of profiles a mechanism may be tabulated over.
pub const PROFILE_LIMIT: usize = 1 << 24;

/// Mixed-radix numbering of the profiles over an enumerated class, agent 0
/// being the most significant digit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProfileSpace {
    n: usize,
    k: usize,
    count: usize,
}

impl ProfileSpace {
    pub fn new(n: usize, k: usize) -> Result<ProfileSpace> {
        let count = (0..n)
            .try_fold(1usize, |acc, _| acc.checked_mul(k))
            .filter(|&c| c <= PROFILE_LIMIT)
            .ok_or_else(|| Error::TooLarge(format!("{k}^{n} profiles exceed the limit of {PROFILE_LIMIT}")))?;
        Ok(ProfileSpace { n, k, count })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Size of the preference class.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn stride(&self, agent: usize) -> usize {
        self.k.pow((self.n - 1 - agent) as u32)
    }

    pub fn index(&self, digits: &[usize]) -> usize {
        digits.iter().fold(0, |acc, &d| acc * self.k + d)
    }

    pub fn digit(&self, idx: usize, agent: usize) -> usize {
        idx / self.stride(agent) % self.k
    }

    pub fn digits(&self, idx: usize) -> Vec<usize> {
        (0..self.n).map(|i| self.digit(idx, i)).collect()
    }

    /// Index of the profile where `agent` reports class member `c` instead.
    pub fn with_digit(&self, idx: usize, agent: usize, c: usize) -> usize {
        let s = self.stride(agent);
        idx - self.digit(idx, agent) * s + c * s
    }
}

pub fn profile_index(profile: &[Preference], class: &PreferenceClass) -> Result<usize> {
    let space = ProfileSpace::new(profile.len(), class.len())?;
    let digits = profile.iter().map(|p| class.index_of(p)).collect::<Result<Vec<_>>>()?;
    Ok(space.index(&digits))
}

pub fn index_to_profile(idx: usize, class: &PreferenceClass, n: usize) -> Result<Vec<Preference>> {
    class.require_enumerable()?;
    let space = ProfileSpace::new(n, class.len())?;
    if idx >= space.count() {
        return Err(Error::DomainError(format!("profile index {idx} out of range {}", space.count())));
    }
    Ok(space.digits(idx).into_iter().map(|d| class.get(d).clone()).collect())
}

#[derive(Clone, Debug)]
pub enum Rule {
    SerialQuota(QuotaOrdering),
    /// One allocation per profile index.
    Table(Arc<[Allocation]>),
    /// Agents `0, 1, …, n-1` take turns picking their favourite remaining
    /// good until none are left.
    RoundRobin,
    /// Agent 0 gets everything when agents 0 and 1 report the same
    /// preference, agent 1 gets everything otherwise.
    CounterNonTruthful,
    /// Agent 1 gets agent 0's top good, agent 2 gets the rest.
    CounterBossy,
    /// Agent 0 takes her top good `x` outside `{a}`. If `x = b`, agent 1 picks
    /// next and agent 2 gets the rest; otherwise agent 2 picks next and agent
    /// 1 gets the rest.
    CounterNonNeutral {
        a: usize,
        b: usize,
    },
}

#[derive(Clone, Debug)]
pub struct Mechanism {
    n: usize,
    domain: Arc<PreferenceClass>,
    rule: Rule,
}

impl Mechanism {
    pub fn serial_quota(domain: Arc<PreferenceClass>, q: &[usize], p: &[usize]) -> Result<Mechanism> {
        let sq = QuotaOrdering::canonicalize(q, p, domain.m())?;
        Mechanism::from_quota_ordering(domain, sq)
    }

    pub fn from_quota_ordering(domain: Arc<PreferenceClass>, sq: QuotaOrdering) -> Result<Mechanism> {
        if sq.m() != domain.m() {
            return Err(Error::InvalidDomain(format!(
                "quotas are for {} goods but the domain has {}",
                sq.m(),
                domain.m()
            )));
        }
        Ok(Mechanism { n: sq.n(), domain, rule: Rule::SerialQuota(sq) })
    }

    pub fn table(n: usize, domain: Arc<PreferenceClass>, cells: Vec<Allocation>) -> Result<Mechanism> {
        domain.require_enumerable()?;
        let space = ProfileSpace::new(n, domain.len())?;
        if cells.len() != space.count() {
            return Err(Error::DomainError(format!(
                "table has {} cells but there are {} profiles",
                cells.len(),
                space.count()
            )));
        }
        let m = domain.m();
        for a in &cells {
            if a.n() != n {
                return Err(Error::DomainError(format!("allocation {a} is not for {n} agents")));
            }
            if let Some(b) = a.bundles().iter().find(|b| !b.within(m)) {
                return Err(Error::OutsideUniverse { set: b.0, m });
            }
        }
        Ok(Mechanism { n, domain, rule: Rule::Table(cells.into()) })
    }

    pub(crate) fn table_unchecked(n: usize, domain: Arc<PreferenceClass>, cells: Arc<[Allocation]>) -> Mechanism {
        Mechanism { n, domain, rule: Rule::Table(cells) }
    }

    pub fn round_robin(n: usize, domain: Arc<PreferenceClass>) -> Result<Mechanism> {
        if n == 0 {
            return Err(Error::TooSmall("Round Robin needs at least one agent".into()));
        }
        Ok(Mechanism { n, domain, rule: Rule::RoundRobin })
    }

    pub fn counter_non_truthful(n: usize, domain: Arc<PreferenceClass>) -> Result<Mechanism> {
        Mechanism::counterexample(n, 2, 0, domain, Rule::CounterNonTruthful)
    }

    pub fn counter_bossy(n: usize, domain: Arc<PreferenceClass>) -> Result<Mechanism> {
        Mechanism::counterexample(n, 3, 0, domain, Rule::CounterBossy)
    }

    pub fn counter_non_neutral(n: usize, domain: Arc<PreferenceClass>, a: usize, b: usize) -> Result<Mechanism> {
        let m = domain.m();
        let mech = Mechanism::counterexample(n, 3, 3, domain, Rule::CounterNonNeutral { a, b })?;
        if a == b || a >= m || b >= m {
            return Err(Error::Precondition(format!("a = {a} and b = {b} must be distinct goods below {m}")));
        }
        Ok(mech)
    }

    fn counterexample(
        n: usize,
        min_n: usize,
        min_m: usize,
        domain: Arc<PreferenceClass>,
        rule: Rule,
    ) -> Result<Mechanism> {
        if domain.tag() != ClassTag::Lexicographic {
            return Err(Error::InvalidDomain(format!(
                "counterexample mechanisms run on the lexicographic class, not {}",
                domain.tag()
            )));
        }
        if n < min_n || domain.m() < min_m {
            return Err(Error::TooSmall(format!(
                "needs n >= {min_n} and m >= {min_m}, got n = {n}, m = {}",
                domain.m()
            )));
        }
        Ok(Mechanism { n, domain, rule })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.domain.m()
    }

    pub fn domain(&self) -> &Arc<PreferenceClass> {
        &self.domain
    }

    pub fn rule(&self) -> &Rule {
        &self.rule
    }

    pub fn quota_ordering(&self) -> Option<&QuotaOrdering> {
        match &self.rule {
            Rule::SerialQuota(sq) => Some(sq),
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        match &self.rule {
            Rule::SerialQuota(sq) => format!("serial-quota q={:?} p={:?}", sq.q(), sq.p()),
            Rule::Table(_) => "table".into(),
            Rule::RoundRobin => "round robin".into(),
            Rule::CounterNonTruthful => "non-truthful counterexample".into(),
            Rule::CounterBossy => "bossy counterexample".into(),
            Rule::CounterNonNeutral { a, b } => format!("non-neutral counterexample a={a} b={b}"),
        }
    }

    pub fn profile_space(&self) -> Result<ProfileSpace> {
        self.domain.require_enumerable()?;
        ProfileSpace::new(self.n, self.domain.len())
    }

    /// The allocation chosen for `profile`.
    pub fn apply(&self, profile: &[Preference]) -> Result<Allocation> {
        if profile.len() != self.n {
            return Err(Error::DomainError(format!("{} preferences for {} agents", profile.len(), self.n)));
        }
        for (i, p) in profile.iter().enumerate() {
            if p.m() != self.m() || !self.domain.contains(p) {
                return Err(Error::DomainError(format!(
                    "preference of agent {i} is not in the {} class over {} goods",
                    self.domain.tag(),
                    self.m()
                )));
            }
        }
        match &self.rule {
            Rule::Table(cells) => Ok(cells[profile_index(profile, &self.domain)?].clone()),
            _ => Ok(self.apply_rule(profile)),
        }
    }

    pub(crate) fn apply_rule(&self, profile: &[Preference]) -> Allocation {
        let m = self.m();
        let full = GoodSet::full(m);
        let mut bundles = vec![GoodSet::EMPTY; self.n];
        match &self.rule {
            Rule::SerialQuota(sq) => return apply_serial_quota(sq, profile),
            Rule::Table(_) => unreachable!("tables are looked up by index"),
            Rule::RoundRobin => {
                let mut remaining = full;
                for agent in (0..self.n).cycle() {
                    let Some(g) = profile[agent].top_good(remaining) else { break };
                    bundles[agent] = bundles[agent].insert(g);
                    remaining = remaining.remove(g);
                }
            }
            Rule::CounterNonTruthful => {
                let winner = if profile[0] == profile[1] { 0 } else { 1 };
                bundles[winner] = full;
            }
            Rule::CounterBossy => {
                if let Some(x) = profile[0].top_good(full) {
                    bundles[1] = GoodSet::singleton(x);
                    bundles[2] = full.remove(x);
                }
            }
            Rule::CounterNonNeutral { a, b } => {
                let x = profile[0].top_good(full.remove(*a)).expect("m >= 3");
                let (picker, rest) = if x == *b { (1, 2) } else { (2, 1) };
                let y = profile[picker].top_good(full.remove(x)).expect("m >= 3");
                bundles[0] = GoodSet::singleton(x);
                bundles[picker] = GoodSet::singleton(y);
                bundles[rest] = full.remove(x).remove(y);
            }
        }
        Allocation::from_disjoint(bundles)
    }

    /// Allocation for every profile index of an enumerable domain.
    pub fn tabulate(&self) -> Result<Arc<[Allocation]>> {
        let space = self.profile_space()?;
        if let Rule::Table(cells) = &self.rule {
            return Ok(cells.clone());
        }
        let members = self.domain.members();
        Ok((0..space.count())
            .into_par_iter()
            .map(|idx| {
                let profile: Vec<Preference> = space.digits(idx).into_iter().map(|d| members[d].clone()).collect();
                self.apply_rule(&profile)
            })
            .collect::<Vec<_>>()
            .into())
    }

    /// The same mechanism stored as an explicit table.
    pub fn to_table(&self) -> Result<Mechanism> {
        Ok(Mechanism::table_unchecked(self.n, self.domain.clone(), self.tabulate()?))
    }

    /// The allocation at a profile index.
    pub fn at_index(&self, idx: usize) -> Result<Allocation> {
        let space = self.profile_space()?;
        match &self.rule {
            Rule::Table(cells) => Ok(cells[idx].clone()),
            _ => {
                let profile: Vec<Preference> =
                    space.digits(idx).into_iter().map(|d| self.domain.get(d).clone()).collect();
                Ok(self.apply_rule(&profile))
            }
        }
    }
}

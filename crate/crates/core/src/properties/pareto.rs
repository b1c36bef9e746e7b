use serde::Serialize;

use super::{scan, Checker, Property, PropertyReport, Tabulated, Witness};
use crate::error::{Error, Result};
use crate::mechanisms::{Allocation, Mechanism};
use crate::prefs::Preference;

/// Largest number of candidate allocations, `(n+1)^m`, the Pareto check enumerates.
pub const PARETO_LIMIT: usize = 4096;

/// A cyclic exchange of single goods: `agents[j]` gives away `goods[j]` and
/// receives `goods[j-1]` (indices taken cyclically).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TradingCycle {
    pub agents: Vec<usize>,
    pub goods: Vec<usize>,
}

impl TradingCycle {
    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    fn received(&self, j: usize) -> usize {
        self.goods[(j + self.len() - 1) % self.len()]
    }

    /// The allocation after the exchange.
    pub fn apply(&self, alloc: &Allocation) -> Allocation {
        let mut bundles = alloc.bundles().to_vec();
        for (j, &a) in self.agents.iter().enumerate() {
            bundles[a] = bundles[a].remove(self.goods[j]).insert(self.received(j));
        }
        Allocation::from_disjoint(bundles)
    }

    /// Distinct agents and goods, each good owned by its agent, and every
    /// participant strictly better off.
    pub fn is_improving(&self, alloc: &Allocation, profile: &[Preference]) -> bool {
        let k = self.len();
        if k < 2 || self.goods.len() != k {
            return false;
        }
        let distinct = |v: &[usize]| (0..v.len()).all(|i| !v[..i].contains(&v[i]));
        if !distinct(&self.agents) || !distinct(&self.goods) {
            return false;
        }
        if !self.agents.iter().zip(&self.goods).all(|(&a, &g)| a < alloc.n() && alloc.bundle(a).contains(g)) {
            return false;
        }
        let after = self.apply(alloc);
        self.agents.iter().all(|&a| profile[a].prefers(after.bundle(a), alloc.bundle(a)))
    }
}

/// A strictly improving single-good trading cycle, if one exists.
///
/// Each cycle is found from its lowest-indexed agent; starts and extensions
/// are tried in ascending (agent, good) order.
pub fn find_improving_cycle(alloc: &Allocation, profile: &[Preference]) -> Option<TradingCycle> {
    let n = alloc.n();
    let nodes: Vec<(usize, usize)> = (0..n).flat_map(|a| alloc.bundle(a).iter().map(move |g| (a, g))).collect();
    let gains = |agent: usize, gives: usize, gets: usize| {
        let own = alloc.bundle(agent);
        profile[agent].prefers(own.remove(gives).insert(gets), own)
    };

    fn extend(
        path: &mut Vec<(usize, usize)>,
        nodes: &[(usize, usize)],
        gains: &dyn Fn(usize, usize, usize) -> bool,
    ) -> bool {
        let (start_agent, start_good) = path[0];
        let &(_, last_good) = path.last().unwrap();
        if path.len() >= 2 && gains(start_agent, start_good, last_good) {
            return true;
        }
        for &(a, g) in nodes {
            if a <= start_agent || path.iter().any(|&(b, _)| b == a) || !gains(a, g, last_good) {
                continue;
            }
            path.push((a, g));
            if extend(path, nodes, gains) {
                return true;
            }
            path.pop();
        }
        false
    }

    for &start in &nodes {
        let mut path = vec![start];
        if extend(&mut path, &nodes, &gains) {
            return Some(TradingCycle {
                agents: path.iter().map(|&(a, _)| a).collect(),
                goods: path.iter().map(|&(_, g)| g).collect(),
            });
        }
    }
    None
}

fn candidates(n: usize, m: usize) -> Result<Vec<Allocation>> {
    match (n + 1).checked_pow(m as u32) {
        Some(c) if c <= PARETO_LIMIT => Ok(Allocation::enumerate(n, m, false)),
        _ => Err(Error::TooLarge(format!("Pareto check enumerates ({n}+1)^{m} allocations, limit {PARETO_LIMIT}"))),
    }
}

fn dominating(alloc: &Allocation, profile: &[Preference], candidates: &[Allocation]) -> Option<Allocation> {
    candidates
        .iter()
        .find(|b| {
            let mut strict = false;
            for (i, p) in profile.iter().enumerate() {
                match p.cmp_sets(b.bundle(i), alloc.bundle(i)) {
                    std::cmp::Ordering::Less => return false,
                    std::cmp::Ordering::Greater => strict = true,
                    std::cmp::Ordering::Equal => {}
                }
            }
            strict
        })
        .cloned()
}

/// The first allocation, goods possibly left unallocated, that weakly
/// improves every agent and strictly improves one.
pub fn pareto_blocking(alloc: &Allocation, profile: &[Preference]) -> Result<Option<Allocation>> {
    let m = profile.first().map_or(0, Preference::m);
    Ok(dominating(alloc, profile, &candidates(profile.len(), m)?))
}

/// Pareto check at a single profile, for domains that cannot be enumerated.
pub fn check_pareto_at(mech: &Mechanism, profile: &[Preference]) -> Result<PropertyReport> {
    let alloc = mech.apply(profile)?;
    let found = pareto_blocking(&alloc, profile)?.map(|blocking| Witness::Blocking {
        profile: profile.to_vec(),
        allocation: alloc,
        blocking,
    });
    Ok(PropertyReport::new(Property::ParetoEfficient, mech, (found, Vec::new()), 1))
}

impl Checker {
    pub fn pareto_efficient(&self, mech: &Mechanism) -> Result<PropertyReport> {
        let cands = candidates(mech.n(), mech.m())?;
        let t = Tabulated::new(mech)?;
        let found = scan(t.space.count(), self.collect_all, |idx| {
            let profile = t.profile(idx);
            let alloc = &t.table[idx];
            dominating(alloc, &profile, &cands).map(|blocking| Witness::Blocking {
                profile,
                allocation: alloc.clone(),
                blocking,
            })
        });
        Ok(PropertyReport::new(Property::ParetoEfficient, mech, found, t.space.count() as u64))
    }
}

use std::collections::HashMap;

use rayon::prelude::*;

use super::{Checker, Property, PropertyReport, Tabulated, Witness};
use crate::error::{Error, Result};
use crate::goods::GoodSet;
use crate::mechanisms::{Allocation, Mechanism};
use crate::prefs::Preference;

fn strongly_desiring(t: &Tabulated, s: GoodSet) -> Vec<bool> {
    t.class().members().iter().map(|p| p.strongly_desires(s)).collect()
}

/// Lowest profile index where `agent` strongly desires `s` without getting all of it.
fn control_violation(t: &Tabulated, desires: &[bool], agent: usize, s: GoodSet) -> Option<usize> {
    (0..t.space.count())
        .into_par_iter()
        .find_first(|&idx| desires[t.space.digit(idx, agent)] && !s.is_subset(t.table[idx].bundle(agent)))
}

/// Whether `agent` gets all of `s` whenever she strongly desires it.
pub fn controls(mech: &Mechanism, agent: usize, s: GoodSet) -> Result<PropertyReport> {
    let t = Tabulated::new(mech)?;
    if agent >= mech.n() || !s.within(mech.m()) {
        return Err(Error::Precondition(format!("agent {agent} and set {s} must exist")));
    }
    let desires = strongly_desiring(&t, s);
    let found = control_violation(&t, &desires, agent, s).map(|idx| Witness::Control {
        agent,
        set: s,
        profile: t.profile(idx),
        allocation: t.table[idx].clone(),
    });
    Ok(PropertyReport::new(Property::Control, mech, (found, Vec::new()), t.space.count() as u64))
}

pub fn check_control_claim(mech: &Mechanism) -> Result<PropertyReport> {
    Checker::default().control_claim(mech)
}

pub fn check_first_pick_independence(mech: &Mechanism) -> Result<PropertyReport> {
    Checker::default().first_pick_independence(mech)
}

/// Whether some ordering of the agents lays their bundles out as
/// consecutive blocks of the lexicographic good order, with the unallocated
/// goods forming the final block.
pub fn check_consecutive(alloc: &Allocation, pref: &Preference) -> Result<bool> {
    let order = pref
        .as_lexicographic()
        .ok_or_else(|| Error::UnsupportedPreference("consecutiveness needs a lexicographic preference".into()))?;
    let n = alloc.n();
    let labels: Vec<usize> = order.iter().map(|&g| alloc.owner(g).unwrap_or(n)).collect();
    let mut closed = vec![false; n + 1];
    for (j, &l) in labels.iter().enumerate() {
        if closed[l] {
            return Ok(false);
        }
        if j > 0 && labels[j - 1] != l {
            closed[labels[j - 1]] = true;
        }
    }
    let unallocated_last = labels.iter().position(|&l| l == n).is_none_or(|j| labels[j..].iter().all(|&l| l == n));
    Ok(unallocated_last)
}

impl Checker {
    /// For every set `S` (ascending bitmask) and agent `i`: if some profile
    /// has everyone strongly desiring `S` and `i` receiving all of it, then
    /// `i` must control `S`.
    pub fn control_claim(&self, mech: &Mechanism) -> Result<PropertyReport> {
        let t = Tabulated::new(mech)?;
        let mut all = Vec::new();
        for s in GoodSet::all(mech.m()) {
            let desires = strongly_desiring(&t, s);
            for agent in 0..mech.n() {
                let trigger = (0..t.space.count()).into_par_iter().find_first(|&idx| {
                    s.is_subset(t.table[idx].bundle(agent)) && (0..mech.n()).all(|j| desires[t.space.digit(idx, j)])
                });
                let Some(trigger) = trigger else { continue };
                if let Some(bad) = control_violation(&t, &desires, agent, s) {
                    all.push(Witness::ControlClaim {
                        set: s,
                        agent,
                        trigger: t.profile(trigger),
                        trigger_allocation: t.table[trigger].clone(),
                        violating: t.profile(bad),
                        violating_allocation: t.table[bad].clone(),
                    });
                    if !self.collect_all {
                        break;
                    }
                }
            }
            if !all.is_empty() && !self.collect_all {
                break;
            }
        }
        let first = all.first().cloned();
        if !self.collect_all {
            all.clear();
        }
        Ok(PropertyReport::new(Property::ControlClaim, mech, (first, all), t.space.count() as u64))
    }

    /// Serial-quota only: fixing the first picker's preference and everyone
    /// else's preferences over the goods she leaves fixes the allocation.
    pub fn first_pick_independence(&self, mech: &Mechanism) -> Result<PropertyReport> {
        let sq = mech.quota_ordering().ok_or_else(|| {
            Error::Precondition("first-pick independence is stated for serial-quota mechanisms".into())
        })?;
        let t = Tabulated::new(mech)?;
        let m = mech.m();
        let Some(first) = sq.first_picker() else {
            return Ok(PropertyReport::new(Property::FirstPickIndependence, mech, (None, Vec::new()), 0));
        };
        let q1 = sq.q()[0];
        let mut seen: HashMap<(usize, Vec<Vec<u16>>), usize> = HashMap::new();
        let mut all = Vec::new();
        for idx in 0..t.space.count() {
            let lead = t.pref(idx, first);
            let rest = lead.demand(GoodSet::full(m), q1)?.complement(m);
            let induced = (0..mech.n())
                .filter(|&j| j != first)
                .map(|j| Ok(t.pref(idx, j).induce(rest)?.ranks().to_vec()))
                .collect::<Result<Vec<_>>>()?;
            let key = (t.space.digit(idx, first), induced);
            match seen.get(&key) {
                Some(&prev) if t.table[prev] != t.table[idx] => {
                    all.push(Witness::FirstPick {
                        profile: t.profile(prev),
                        other: t.profile(idx),
                        before: t.table[prev].clone(),
                        after: t.table[idx].clone(),
                    });
                    if !self.collect_all {
                        break;
                    }
                }
                Some(_) => {}
                None => {
                    seen.insert(key, idx);
                }
            }
        }
        let first = all.first().cloned();
        if !self.collect_all {
            all.clear();
        }
        let found = (first, all);
        Ok(PropertyReport::new(Property::FirstPickIndependence, mech, found, t.space.count() as u64))
    }
}

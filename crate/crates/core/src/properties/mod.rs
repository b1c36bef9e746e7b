//! Exhaustive checkers for truthfulness, non-bossiness, neutrality,
//! partition, Pareto-efficiency, push-up invariance and control.
//!
//! Every checker tabulates the mechanism once and scans profile indices in
//! parallel. The reported witness is always the one at the lowest profile
//! index, so reports do not depend on the thread count.

mod control;
mod pareto;
mod pushup;
mod witness;

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use control::{check_consecutive, check_control_claim, check_first_pick_independence, controls};
pub use pareto::{check_pareto_at, find_improving_cycle, pareto_blocking, TradingCycle};
pub use pushup::{push_up_invariance_guaranteed, PushUpMode};
pub use witness::Witness;

use crate::error::{Error, Result};
use crate::goods::Permutation;
use crate::mechanisms::{Allocation, Mechanism, ProfileSpace};
use crate::prefs::{Preference, PreferenceClass};

/// Neutrality is checked against every permutation up to this many goods.
pub const NEUTRAL_EXHAUSTIVE_LIMIT: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Truthful,
    NonBossy,
    Neutral,
    Partition,
    ParetoEfficient,
    PushUpInvariance,
    Control,
    ControlClaim,
    FirstPickIndependence,
    Ef1,
    RhoMms,
}

impl Property {
    pub fn name(self) -> &'static str {
        match self {
            Property::Truthful => "truthful",
            Property::NonBossy => "non-bossy",
            Property::Neutral => "neutral",
            Property::Partition => "partition",
            Property::ParetoEfficient => "pareto-efficient",
            Property::PushUpInvariance => "push-up invariance",
            Property::Control => "control",
            Property::ControlClaim => "control claim",
            Property::FirstPickIndependence => "first-pick independence",
            Property::Ef1 => "EF1",
            Property::RhoMms => "rho-MMS",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyReport {
    pub property: Property,
    pub mechanism: String,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    /// Every violation, in collect-all mode.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub witnesses: Vec<Witness>,
    pub profiles_checked: u64,
}

impl PropertyReport {
    pub(crate) fn new(
        property: Property,
        mech: &Mechanism,
        found: (Option<Witness>, Vec<Witness>),
        profiles_checked: u64,
    ) -> PropertyReport {
        PropertyReport::named(property, mech.name(), found, profiles_checked)
    }

    pub(crate) fn named(
        property: Property,
        mechanism: String,
        (witness, witnesses): (Option<Witness>, Vec<Witness>),
        profiles_checked: u64,
    ) -> PropertyReport {
        let verdict = if witness.is_some() { Verdict::Fail } else { Verdict::Pass };
        PropertyReport { property, mechanism, verdict, witness, witnesses, profiles_checked }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Replays every witness against `mech`; true iff each reproduces.
    pub fn replay(&self, mech: &Mechanism) -> Result<bool> {
        for w in self.witness.iter().chain(&self.witnesses) {
            if !w.replay(mech)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "pass" } else { "FAIL" };
        write!(f, "{:<24} {verdict} ({} profiles)", self.property.name(), self.profiles_checked)?;
        if let Some(w) = &self.witness {
            write!(f, "\n  witness: {w}")?;
        }
        Ok(())
    }
}

/// Shared settings for the checkers.
#[derive(Clone, Debug)]
pub struct Checker {
    /// Keep scanning after the first violation and report all of them.
    pub collect_all: bool,
    /// Seed for sampled permutations and push-up trials.
    pub seed: u64,
    /// Random permutations tried by the neutrality check beyond the exhaustive limit.
    pub neutral_samples: usize,
}

impl Default for Checker {
    fn default() -> Self {
        Checker { collect_all: false, seed: 0, neutral_samples: 100 }
    }
}

/// A mechanism evaluated on every profile of its domain.
pub(crate) struct Tabulated<'a> {
    pub mech: &'a Mechanism,
    pub space: ProfileSpace,
    pub table: Arc<[Allocation]>,
}

impl<'a> Tabulated<'a> {
    pub fn new(mech: &'a Mechanism) -> Result<Tabulated<'a>> {
        Ok(Tabulated { mech, space: mech.profile_space()?, table: mech.tabulate()? })
    }

    pub fn class(&self) -> &PreferenceClass {
        self.mech.domain()
    }

    pub fn profile(&self, idx: usize) -> Vec<Preference> {
        self.space.digits(idx).into_iter().map(|d| self.class().get(d).clone()).collect()
    }

    pub fn pref(&self, idx: usize, agent: usize) -> &Preference {
        self.class().get(self.space.digit(idx, agent))
    }
}

/// Lowest-index witness, or every witness in order.
pub(crate) fn scan<F>(count: usize, collect_all: bool, f: F) -> (Option<Witness>, Vec<Witness>)
where
    F: Fn(usize) -> Option<Witness> + Sync + Send,
{
    if collect_all {
        let all: Vec<Witness> = (0..count).into_par_iter().filter_map(f).collect();
        (all.first().cloned(), all)
    } else {
        ((0..count).into_par_iter().find_map_first(f), Vec::new())
    }
}

impl Checker {
    pub fn collect_all() -> Checker {
        Checker { collect_all: true, ..Checker::default() }
    }

    pub fn check(&self, mech: &Mechanism, property: Property) -> Result<PropertyReport> {
        match property {
            Property::Truthful => self.truthful(mech),
            Property::NonBossy => self.non_bossy(mech),
            Property::Neutral => self.neutral(mech),
            Property::Partition => self.partition(mech),
            Property::ParetoEfficient => self.pareto_efficient(mech),
            Property::PushUpInvariance => self.push_up_invariance(mech, PushUpMode::Exhaustive),
            Property::ControlClaim => self.control_claim(mech),
            Property::FirstPickIndependence => self.first_pick_independence(mech),
            other => Err(Error::Precondition(format!("{other} is not a mechanism-wide table check"))),
        }
    }

    pub fn truthful(&self, mech: &Mechanism) -> Result<PropertyReport> {
        let t = Tabulated::new(mech)?;
        let k = t.space.k();
        let found = scan(t.space.count(), self.collect_all, |idx| {
            let alloc = &t.table[idx];
            (0..mech.n()).find_map(|i| {
                let truth = t.pref(idx, i);
                let own = alloc.bundle(i);
                (0..k).find_map(|c| {
                    let lie = t.space.with_digit(idx, i, c);
                    let got = t.table[lie].bundle(i);
                    truth.prefers(got, own).then(|| Witness::Manipulation {
                        profile: t.profile(idx),
                        agent: i,
                        alternate: t.class().get(c).clone(),
                        truthful: alloc.clone(),
                        misreported: t.table[lie].clone(),
                    })
                })
            })
        });
        Ok(PropertyReport::new(Property::Truthful, mech, found, t.space.count() as u64))
    }

    pub fn non_bossy(&self, mech: &Mechanism) -> Result<PropertyReport> {
        let t = Tabulated::new(mech)?;
        let k = t.space.k();
        let found = scan(t.space.count(), self.collect_all, |idx| {
            let alloc = &t.table[idx];
            (0..mech.n()).find_map(|i| {
                (0..k).find_map(|c| {
                    let other = &t.table[t.space.with_digit(idx, i, c)];
                    (other.bundle(i) == alloc.bundle(i) && other != alloc).then(|| Witness::Bossy {
                        profile: t.profile(idx),
                        agent: i,
                        alternate: t.class().get(c).clone(),
                        before: alloc.clone(),
                        after: other.clone(),
                    })
                })
            })
        });
        Ok(PropertyReport::new(Property::NonBossy, mech, found, t.space.count() as u64))
    }

    /// The permutations neutrality is checked against.
    pub fn neutral_permutations(&self, m: usize) -> Vec<Permutation> {
        if m <= NEUTRAL_EXHAUSTIVE_LIMIT {
            return Permutation::all(m).filter(|p| !p.is_identity()).collect();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut perms: Vec<Permutation> = Permutation::transpositions(m).collect();
        perms.extend((0..self.neutral_samples).map(|_| Permutation::random(m, &mut rng)));
        perms
    }

    pub fn neutral(&self, mech: &Mechanism) -> Result<PropertyReport> {
        let t = Tabulated::new(mech)?;
        if !t.class().is_permutation_closed() {
            return Err(Error::InvalidDomain("neutrality needs a class closed under renaming goods".into()));
        }
        let perms = self.neutral_permutations(mech.m());
        let actions = perms.iter().map(|pi| t.class().permutation_action(pi)).collect::<Result<Vec<_>>>()?;
        let found = scan(t.space.count(), self.collect_all, |idx| {
            let digits = t.space.digits(idx);
            let alloc = &t.table[idx];
            perms.iter().zip(&actions).find_map(|(pi, action)| {
                let moved: Vec<usize> = digits.iter().map(|&d| action[d]).collect();
                let got = &t.table[t.space.index(&moved)];
                let expected = alloc.permute(pi);
                (*got != expected).then(|| Witness::Renaming {
                    profile: t.profile(idx),
                    permutation: pi.clone(),
                    renamed_output: got.clone(),
                    expected,
                })
            })
        });
        Ok(PropertyReport::new(Property::Neutral, mech, found, t.space.count() as u64))
    }

    pub fn partition(&self, mech: &Mechanism) -> Result<PropertyReport> {
        let t = Tabulated::new(mech)?;
        let m = mech.m();
        let found = scan(t.space.count(), self.collect_all, |idx| {
            let alloc = &t.table[idx];
            (!alloc.is_partition(m)).then(|| Witness::Unallocated {
                profile: t.profile(idx),
                allocation: alloc.clone(),
                missing: alloc.unallocated(m),
            })
        });
        Ok(PropertyReport::new(Property::Partition, mech, found, t.space.count() as u64))
    }
}

pub fn check_truthful(mech: &Mechanism) -> Result<PropertyReport> {
    Checker::default().truthful(mech)
}

pub fn check_non_bossy(mech: &Mechanism) -> Result<PropertyReport> {
    Checker::default().non_bossy(mech)
}

pub fn check_neutral(mech: &Mechanism) -> Result<PropertyReport> {
    Checker::default().neutral(mech)
}

pub fn check_partition(mech: &Mechanism) -> Result<PropertyReport> {
    Checker::default().partition(mech)
}

pub fn check_pareto_efficient(mech: &Mechanism) -> Result<PropertyReport> {
    Checker::default().pareto_efficient(mech)
}

pub fn check_push_up_invariance(mech: &Mechanism, trials: usize, seed: u64) -> Result<PropertyReport> {
    Checker { seed, ..Checker::default() }.push_up_invariance(mech, PushUpMode::Sampled { trials })
}

/// Truthful, non-bossy and neutral.
pub fn check_axioms(mech: &Mechanism) -> Result<Vec<PropertyReport>> {
    let c = Checker::default();
    Ok(vec![c.truthful(mech)?, c.non_bossy(mech)?, c.neutral(mech)?])
}

#[cfg(test)]
mod tests;

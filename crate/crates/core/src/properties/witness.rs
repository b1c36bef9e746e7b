use std::fmt;

use itertools::Itertools;
use serde::Serialize;

use crate::error::Result;
use crate::fairness::{envies_beyond_one_good, mms};
use crate::goods::{GoodSet, Permutation};
use crate::mechanisms::{cardinal_apply, Allocation, CardinalInstance, Mechanism};
use crate::prefs::{rational_report, Preference, Rational};

/// Evidence of a violation. Every variant can be replayed from scratch
/// against the mechanism that produced it.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    /// `agent` strictly gains by reporting `alternate`.
    Manipulation {
        profile: Vec<Preference>,
        agent: usize,
        alternate: Preference,
        truthful: Allocation,
        misreported: Allocation,
    },
    /// `agent` reports `alternate`, keeps her bundle, and changes someone else's.
    Bossy {
        profile: Vec<Preference>,
        agent: usize,
        alternate: Preference,
        before: Allocation,
        after: Allocation,
    },
    /// `f(profile^π) ≠ π(f(profile))`.
    Renaming {
        profile: Vec<Preference>,
        permutation: Permutation,
        renamed_output: Allocation,
        expected: Allocation,
    },
    Unallocated {
        profile: Vec<Preference>,
        allocation: Allocation,
        missing: GoodSet,
    },
    /// `blocking` weakly improves every agent and strictly improves one.
    Blocking {
        profile: Vec<Preference>,
        allocation: Allocation,
        blocking: Allocation,
    },
    /// `pushed` is a push-up of `profile` for the mechanism, yet the outputs differ.
    PushUp {
        profile: Vec<Preference>,
        pushed: Vec<Preference>,
        before: Allocation,
        after: Allocation,
    },
    /// `agent` strongly desires `set` but does not get all of it.
    Control {
        agent: usize,
        set: GoodSet,
        profile: Vec<Preference>,
        allocation: Allocation,
    },
    /// Everyone strongly desires `set` in `trigger` and `agent` gets it, yet
    /// in `violating` she strongly desires it and does not get it.
    ControlClaim {
        set: GoodSet,
        agent: usize,
        trigger: Vec<Preference>,
        trigger_allocation: Allocation,
        violating: Vec<Preference>,
        violating_allocation: Allocation,
    },
    /// Same first pick and same preferences over what it leaves, different outputs.
    FirstPick {
        profile: Vec<Preference>,
        other: Vec<Preference>,
        before: Allocation,
        after: Allocation,
    },
    /// `envious` envies `envied` even after removing any single good.
    Envy {
        instance: CardinalInstance,
        allocation: Allocation,
        envious: usize,
        envied: usize,
    },
    /// `agent` gets less than `rho` times her maximin share.
    ShareShortfall {
        instance: CardinalInstance,
        allocation: Allocation,
        agent: usize,
        #[serde(with = "rational_report")]
        value: Rational,
        #[serde(with = "rational_report")]
        share: Rational,
        #[serde(with = "rational_report")]
        rho: Rational,
    },
}

fn replace(profile: &[Preference], agent: usize, pref: &Preference) -> Vec<Preference> {
    let mut p = profile.to_vec();
    p[agent] = pref.clone();
    p
}

impl Witness {
    /// Re-evaluates `mech` and confirms the violation; never trusts the
    /// allocations stored in the witness.
    pub fn replay(&self, mech: &Mechanism) -> Result<bool> {
        Ok(match self {
            Witness::Manipulation { profile, agent, alternate, .. } => {
                let a = mech.apply(profile)?;
                let b = mech.apply(&replace(profile, *agent, alternate))?;
                profile[*agent].prefers(b.bundle(*agent), a.bundle(*agent))
            }
            Witness::Bossy { profile, agent, alternate, .. } => {
                let a = mech.apply(profile)?;
                let b = mech.apply(&replace(profile, *agent, alternate))?;
                a.bundle(*agent) == b.bundle(*agent) && a != b
            }
            Witness::Renaming { profile, permutation, .. } => {
                let renamed: Vec<Preference> = profile.iter().map(|p| p.permute(permutation)).collect();
                mech.apply(&renamed)? != mech.apply(profile)?.permute(permutation)
            }
            Witness::Unallocated { profile, .. } => !mech.apply(profile)?.is_partition(mech.m()),
            Witness::Blocking { profile, blocking, .. } => {
                let a = mech.apply(profile)?;
                let valid =
                    Allocation::validate(blocking.bundles().to_vec(), mech.m()).is_ok() && blocking.n() == a.n();
                valid
                    && profile.iter().enumerate().all(|(i, p)| p.weakly_prefers(blocking.bundle(i), a.bundle(i)))
                    && profile.iter().enumerate().any(|(i, p)| p.prefers(blocking.bundle(i), a.bundle(i)))
            }
            Witness::PushUp { profile, pushed, .. } => {
                let a = mech.apply(profile)?;
                let b = mech.apply(pushed)?;
                let valid = profile.iter().zip(pushed).enumerate().all(|(i, (p, q))| q.is_push_up_of(p, a.bundle(i)));
                valid && a != b
            }
            Witness::Control { agent, set, profile, .. } => {
                profile[*agent].strongly_desires(*set) && !set.is_subset(mech.apply(profile)?.bundle(*agent))
            }
            Witness::ControlClaim { set, agent, trigger, violating, .. } => {
                trigger.iter().all(|p| p.strongly_desires(*set))
                    && set.is_subset(mech.apply(trigger)?.bundle(*agent))
                    && violating[*agent].strongly_desires(*set)
                    && !set.is_subset(mech.apply(violating)?.bundle(*agent))
            }
            Witness::FirstPick { profile, other, .. } => {
                let Some(sq) = mech.quota_ordering() else { return Ok(false) };
                let Some(first) = sq.first_picker() else { return Ok(false) };
                let d = profile[first].demand(GoodSet::full(mech.m()), sq.q()[0])?;
                let rest = d.complement(mech.m());
                let same_inputs = profile[first] == other[first]
                    && profile
                        .iter()
                        .zip(other)
                        .map(|(p, q)| Ok(p.induce(rest)? == q.induce(rest)?))
                        .collect::<Result<Vec<bool>>>()?
                        .into_iter()
                        .all(|b| b);
                same_inputs && mech.apply(profile)? != mech.apply(other)?
            }
            Witness::Envy { instance, envious, envied, .. } => {
                let a = cardinal_apply(mech, instance)?;
                envies_beyond_one_good(instance.valuation(*envious), a.bundle(*envious), a.bundle(*envied))
            }
            Witness::ShareShortfall { instance, agent, rho, .. } => {
                let a = cardinal_apply(mech, instance)?;
                let v = instance.valuation(*agent);
                v.value(a.bundle(*agent)) < rho * mms(v, instance.n())?
            }
        })
    }
}

fn show(profile: &[Preference]) -> String {
    profile
        .iter()
        .map(|p| match p.as_lexicographic() {
            Some(o) => format!("lex({})", o.iter().map(|g| format!("g{g}")).join(">")),
            None => format!("{p:?}"),
        })
        .join(" | ")
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::Manipulation { profile, agent, alternate, truthful, misreported } => write!(
                f,
                "at [{}] agent {agent} reports [{}] and gets {} instead of {}",
                show(profile),
                show(std::slice::from_ref(alternate)),
                misreported.bundle(*agent),
                truthful.bundle(*agent)
            ),
            Witness::Bossy { profile, agent, alternate, before, after } => write!(
                f,
                "at [{}] agent {agent} reports [{}]: {before} becomes {after}",
                show(profile),
                show(std::slice::from_ref(alternate))
            ),
            Witness::Renaming { profile, permutation, renamed_output, expected } => write!(
                f,
                "at [{}] renaming by {:?} gives {renamed_output}, expected {expected}",
                show(profile),
                permutation.map()
            ),
            Witness::Unallocated { profile, allocation, missing } => {
                write!(f, "at [{}] {allocation} leaves {missing} unallocated", show(profile))
            }
            Witness::Blocking { profile, allocation, blocking } => {
                write!(f, "at [{}] {blocking} Pareto-dominates {allocation}", show(profile))
            }
            Witness::PushUp { profile, pushed, before, after } => {
                write!(f, "push-up [{}] -> [{}] changes {before} to {after}", show(profile), show(pushed))
            }
            Witness::Control { agent, set, profile, allocation } => write!(
                f,
                "agent {agent} strongly desires {set} at [{}] but receives {}",
                show(profile),
                allocation.bundle(*agent)
            ),
            Witness::ControlClaim { set, agent, trigger, violating, violating_allocation, .. } => write!(
                f,
                "everyone strongly desires {set} at [{}] and agent {agent} gets it, but at [{}] she receives {}",
                show(trigger),
                show(violating),
                violating_allocation.bundle(*agent)
            ),
            Witness::FirstPick { profile, other, before, after } => {
                write!(f, "[{}] -> {before} but [{}] -> {after}", show(profile), show(other))
            }
            Witness::Envy { allocation, envious, envied, .. } => {
                write!(f, "in {allocation} agent {envious} envies agent {envied} beyond one good")
            }
            Witness::ShareShortfall { allocation, agent, value, share, rho, .. } => {
                write!(f, "in {allocation} agent {agent} gets {value} < {rho} * MMS {share}")
            }
        }
    }
}

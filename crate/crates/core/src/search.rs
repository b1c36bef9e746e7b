//! Brute-force evidence for the characterization of serial-quota
//! mechanisms: enumerate every table mechanism at tiny sizes, recognize
//! serial-quota tables, and mutate serial-quota tables at larger sizes.

use std::collections::BTreeSet;
use std::sync::Arc;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanisms::{apply_serial_quota, Allocation, Mechanism, MechanismDescriptor, ProfileSpace, QuotaOrdering};
use crate::prefs::{ClassTag, Preference, PreferenceClass};
use crate::properties::{Checker, Property, PropertyReport, Witness};

/// Most table mechanisms a full enumeration will visit.
pub const TABLE_LIMIT: u128 = 10_000_000;

/// The axioms every candidate is filtered by, in the order they are tried.
pub const AXIOMS: [Property; 3] = [Property::Truthful, Property::NonBossy, Property::Neutral];

/// Every canonical quota-ordering pair for `n` agents and `m` goods, sorted by `(q, p)`.
pub fn enumerate_q(n: usize, m: usize, partition_only: bool) -> Vec<QuotaOrdering> {
    let agents: Vec<usize> = (0..n).collect();
    let mut out = BTreeSet::new();
    for q in (0..n).map(|_| 0..=m).multi_cartesian_product() {
        let sum: usize = q.iter().sum();
        if sum > m || (partition_only && sum != m) {
            continue;
        }
        for p in agents.iter().copied().permutations(n) {
            out.insert(QuotaOrdering::canonicalize(&q, &p, m).expect("checked sum"));
        }
    }
    if n == 0 && (!partition_only || m == 0) {
        out.insert(QuotaOrdering::canonicalize(&[], &[], m).expect("empty"));
    }
    out.into_iter().collect()
}

/// The canonical pair whose serial-quota mechanism agrees with `mech` on
/// every profile of its domain.
pub fn recognize_serial_quota(mech: &Mechanism) -> Result<Option<QuotaOrdering>> {
    let space = mech.profile_space()?;
    let table = mech.tabulate()?;
    let members = mech.domain().members();
    let profiles: Vec<Vec<Preference>> =
        (0..space.count()).map(|idx| space.digits(idx).into_iter().map(|d| members[d].clone()).collect()).collect();
    Ok(enumerate_q(mech.n(), mech.m(), false).into_par_iter().find_first(|sq| {
        profiles.iter().zip(table.iter()).all(|(profile, alloc)| apply_serial_quota(sq, profile) == *alloc)
    }))
}

/// The space of table mechanisms over a class.
#[derive(Clone, Debug, Serialize)]
pub struct MechanismSpace {
    pub n: usize,
    pub m: usize,
    pub class: ClassTag,
    pub profile_count: usize,
    pub allocation_choices: usize,
    /// `allocation_choices ^ profile_count`, if it fits in 128 bits.
    pub total: Option<u128>,
}

impl MechanismSpace {
    pub fn new(n: usize, class: &PreferenceClass, partition_only: bool) -> Result<MechanismSpace> {
        let space = ProfileSpace::new(n, class.len())?;
        let m = class.m();
        let labels = if partition_only { n } else { n + 1 };
        let choices =
            labels.checked_pow(m as u32).ok_or_else(|| Error::TooLarge("allocation count overflows".into()))?;
        let total = (0..space.count()).try_fold(1u128, |acc, _| acc.checked_mul(choices as u128));
        Ok(MechanismSpace {
            n,
            m,
            class: class.tag(),
            profile_count: space.count(),
            allocation_choices: choices,
            total,
        })
    }

    pub fn enumerable(&self) -> bool {
        self.total.is_some_and(|t| t <= TABLE_LIMIT)
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum CharacterizationVerdict {
    SetsEqual,
    /// A table satisfying every axiom that is not serial-quota.
    CounterexampleFound {
        mechanism: MechanismDescriptor,
    },
    /// Serial-quota pairs that no satisfying table matched.
    MissingSerialQuota {
        pairs: Vec<QuotaOrdering>,
    },
}

/// A rejected candidate and the first check it failed.
#[derive(Clone, Debug)]
pub struct Rejection {
    pub mechanism: Mechanism,
    pub report: PropertyReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct CharacterizationReport {
    pub space: MechanismSpace,
    pub partition_only: bool,
    pub tables_enumerated: u128,
    /// Surviving tables and the pair each was recognized as.
    pub satisfying_mechanisms: Vec<MechanismDescriptor>,
    pub recognized: Vec<Option<QuotaOrdering>>,
    pub serial_quota_family: Vec<QuotaOrdering>,
    #[serde(flatten)]
    pub verdict: CharacterizationVerdict,
    #[serde(skip)]
    pub rejections: Vec<Rejection>,
}

impl CharacterizationReport {
    pub fn sets_equal(&self) -> bool {
        matches!(self.verdict, CharacterizationVerdict::SetsEqual)
    }
}

/// The first check `mech` fails among the axioms (plus partition when asked).
pub fn first_failure(mech: &Mechanism, with_partition: bool) -> Result<Option<PropertyReport>> {
    let checker = Checker::default();
    let extra = with_partition.then_some(Property::Partition);
    for property in AXIOMS.into_iter().chain(extra) {
        let report = checker.check(mech, property)?;
        if !report.passed() {
            return Ok(Some(report));
        }
    }
    Ok(None)
}

/// Enumerates every table mechanism over `class`, keeps those satisfying
/// the axioms, and compares them with the serial-quota family.
pub fn verify_characterization(
    n: usize,
    class: Arc<PreferenceClass>,
    partition_only: bool,
) -> Result<CharacterizationReport> {
    let space = MechanismSpace::new(n, &class, partition_only)?;
    if !space.enumerable() {
        return Err(Error::TooLarge(format!(
            "{}^{} table mechanisms exceed the limit of {TABLE_LIMIT}; use mutation mode",
            space.allocation_choices, space.profile_count
        )));
    }
    let m = class.m();
    let allocs = Allocation::enumerate(n, m, partition_only);
    let total = space.total.expect("enumerable");
    let cells = space.profile_count;
    let results: Vec<(Mechanism, Option<PropertyReport>)> = (0..total as u64)
        .into_par_iter()
        .map(|code| {
            let mut rest = code as usize;
            let table: Vec<Allocation> = (0..cells)
                .map(|_| {
                    let a = allocs[rest % allocs.len()].clone();
                    rest /= allocs.len();
                    a
                })
                .collect();
            let mech = Mechanism::table_unchecked(n, class.clone(), table.into());
            let failure = first_failure(&mech, partition_only)?;
            Ok((mech, failure))
        })
        .collect::<Result<_>>()?;

    let mut satisfying = Vec::new();
    let mut rejections = Vec::new();
    for (mech, failure) in results {
        match failure {
            None => satisfying.push(mech),
            Some(report) => rejections.push(Rejection { mechanism: mech, report }),
        }
    }
    let recognized = satisfying.iter().map(recognize_serial_quota).collect::<Result<Vec<_>>>()?;
    let family = enumerate_q(n, m, partition_only);
    let verdict = if let Some(i) = recognized.iter().position(Option::is_none) {
        CharacterizationVerdict::CounterexampleFound { mechanism: MechanismDescriptor::from(&satisfying[i]) }
    } else {
        let found: BTreeSet<&QuotaOrdering> = recognized.iter().flatten().collect();
        let missing: Vec<QuotaOrdering> = family.iter().filter(|sq| !found.contains(sq)).cloned().collect();
        if missing.is_empty() && found.len() == satisfying.len() {
            CharacterizationVerdict::SetsEqual
        } else {
            CharacterizationVerdict::MissingSerialQuota { pairs: missing }
        }
    };
    Ok(CharacterizationReport {
        space,
        partition_only,
        tables_enumerated: total,
        satisfying_mechanisms: satisfying.iter().map(MechanismDescriptor::from).collect(),
        recognized,
        serial_quota_family: family,
        verdict,
        rejections,
    })
}

/// One single-cell mutant and the first check it failed, if any.
#[derive(Clone, Debug, Serialize)]
pub struct MutantOutcome {
    pub profile_index: usize,
    pub original: Allocation,
    pub replacement: Allocation,
    pub failed: Option<Property>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip)]
    pub mechanism: Option<Mechanism>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MutationReport {
    pub base: QuotaOrdering,
    pub class: ClassTag,
    pub trials: usize,
    pub seed: u64,
    pub survivors: usize,
    pub mutants: Vec<MutantOutcome>,
}

impl MutationReport {
    pub fn passed(&self) -> bool {
        self.survivors == 0
    }

    pub fn killed_by(&self, property: Property) -> usize {
        self.mutants.iter().filter(|m| m.failed == Some(property)).count()
    }
}

/// Overwrites one random profile's allocation of the serial-quota table with
/// a different random partition, `trials` times, and runs the axioms plus
/// the partition check on each mutant.
pub fn mutate_and_falsify(
    base: &QuotaOrdering,
    class: Arc<PreferenceClass>,
    trials: usize,
    seed: u64,
) -> Result<MutationReport> {
    if !base.is_partition() {
        return Err(Error::Precondition("mutation starts from a partition serial-quota mechanism".into()));
    }
    let tag = class.tag();
    let mech = Mechanism::from_quota_ordering(class.clone(), base.clone())?;
    let table = mech.tabulate()?;
    let partitions = Allocation::enumerate(mech.n(), mech.m(), true);
    if partitions.len() < 2 {
        return Err(Error::TooSmall("only one partition exists, nothing to mutate".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plans: Vec<(usize, Allocation)> = (0..trials)
        .map(|_| {
            let idx = rng.gen_range(0..table.len());
            let others: Vec<&Allocation> = partitions.iter().filter(|a| **a != table[idx]).collect();
            (idx, others[rng.gen_range(0..others.len())].clone())
        })
        .collect();
    let mutants: Vec<MutantOutcome> = plans
        .into_par_iter()
        .map(|(idx, replacement)| {
            let mut cells = table.to_vec();
            let original = std::mem::replace(&mut cells[idx], replacement.clone());
            let mutant = Mechanism::table_unchecked(mech.n(), class.clone(), cells.into());
            let failure = first_failure(&mutant, true)?;
            Ok(MutantOutcome {
                profile_index: idx,
                original,
                replacement,
                failed: failure.as_ref().map(|r| r.property),
                witness: failure.and_then(|r| r.witness),
                mechanism: Some(mutant),
            })
        })
        .collect::<Result<_>>()?;
    let survivors = mutants.iter().filter(|m| m.failed.is_none()).count();
    Ok(MutationReport { base: base.clone(), class: tag, trials, seed, survivors, mutants })
}

/// The pair whose serial-quota mechanism agrees with `mech` on every
/// identical lexicographic profile `(≼, …, ≼)`.
pub fn identical_profile_quotas(mech: &Mechanism) -> Result<Option<QuotaOrdering>> {
    let (n, m) = (mech.n(), mech.m());
    let identical: Vec<(Vec<Preference>, Allocation)> = (0..m)
        .permutations(m)
        .map(|order| {
            let profile = vec![Preference::lexicographic(order)?; n];
            let alloc = mech.apply(&profile)?;
            Ok((profile, alloc))
        })
        .collect::<Result<_>>()?;
    Ok(enumerate_q(n, m, false)
        .into_iter()
        .find(|sq| identical.iter().all(|(profile, alloc)| apply_serial_quota(sq, profile) == *alloc)))
}

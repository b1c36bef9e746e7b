//! Maximin shares, EF1 and audits of mechanisms on additive instances.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::goods::GoodSet;
use crate::mechanisms::{cardinal_apply, Allocation, CardinalInstance, Mechanism, MechanismDescriptor, QuotaOrdering};
use crate::prefs::{rational, to_f64, AdditiveStrict, AdditiveValuation, Preference, Rational};
use crate::properties::{Property, PropertyReport, Witness};

/// Largest number of labeled partitions, `n^m`, the maximin share is computed over.
pub const MMS_LIMIT: u64 = 10_000_000;

/// Perturbation used to break ties between otherwise identical goods.
pub fn epsilon() -> Rational {
    rational(1, 1_000_000)
}

/// An exact ratio rendered as `{"num":..,"den":..,"decimal":..}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioReport {
    pub num: i64,
    pub den: i64,
    pub decimal: f64,
}

impl From<Rational> for RatioReport {
    fn from(r: Rational) -> Self {
        RatioReport { num: *r.numer(), den: *r.denom(), decimal: to_f64(r) }
    }
}

/// The maximin share: the best, over partitions of the goods into `n`
/// parts, of the least valuable part.
pub fn mms(valuation: &AdditiveValuation, n: usize) -> Result<Rational> {
    if n == 0 {
        return Err(Error::Precondition("maximin share needs at least one agent".into()));
    }
    let m = valuation.m();
    if (n as u64).checked_pow(m as u32).is_none_or(|c| c > MMS_LIMIT) {
        return Err(Error::TooLarge(format!("{n}^{m} partitions exceed the limit of {MMS_LIMIT}")));
    }
    let (values, den) = valuation.scaled();
    let mut parts = vec![0i128; n];
    let mut best = i128::MIN;

    // Goods are placed in index order; a good may open at most one new part,
    // which skips relabelings of the same partition.
    fn place(g: usize, used: usize, values: &[i128], parts: &mut [i128], best: &mut i128) {
        if g == values.len() {
            *best = (*best).max(*parts.iter().min().unwrap());
            return;
        }
        for part in 0..(used + 1).min(parts.len()) {
            parts[part] += values[g];
            place(g + 1, used.max(part + 1), values, parts, best);
            parts[part] -= values[g];
        }
    }
    place(0, 0, &values, &mut parts, &mut best);
    let num = i64::try_from(best).map_err(|_| Error::TooLarge("maximin share overflows i64".into()))?;
    Ok(Rational::new(num, den as i64))
}

/// `v(A_j ∖ {x}) > v(own)` for every `x ∈ A_j` (and `A_j` non-empty).
pub fn envies_beyond_one_good(v: &AdditiveValuation, own: GoodSet, other: GoodSet) -> bool {
    let mine = v.value(own);
    !other.is_empty() && other.iter().all(|x| v.value(other.remove(x)) > mine)
}

/// First ordered pair `(envious, envied)` violating EF1 under ordinal preferences.
pub fn ef1_violation(alloc: &Allocation, profile: &[Preference]) -> Option<(usize, usize)> {
    let n = alloc.n();
    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).find(|&(i, j)| {
        let other = alloc.bundle(j);
        i != j && !other.is_empty() && other.iter().all(|x| profile[i].prefers(other.remove(x), alloc.bundle(i)))
    })
}

fn ef1_violation_cardinal(alloc: &Allocation, inst: &CardinalInstance) -> Option<(usize, usize)> {
    let n = alloc.n();
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .find(|&(i, j)| i != j && envies_beyond_one_good(inst.valuation(i), alloc.bundle(i), alloc.bundle(j)))
}

/// EF1 for an allocation under the instance's valuations.
pub fn check_ef1(alloc: &Allocation, inst: &CardinalInstance) -> PropertyReport {
    let found = ef1_violation_cardinal(alloc, inst).map(|(envious, envied)| Witness::Envy {
        instance: inst.clone(),
        allocation: alloc.clone(),
        envious,
        envied,
    });
    PropertyReport::named(Property::Ef1, "allocation".into(), (found, Vec::new()), 1)
}

/// Whether serial-quota mechanisms with quota vector `q` (in picking order)
/// are EF1: every quota but the last is at most 1, and the last is at most
/// 2, with 2 allowed only when every earlier quota is exactly 1.
pub fn ef1_quota_feasibility(q: &[usize]) -> bool {
    let Some((&last, head)) = q.split_last() else { return true };
    if head.is_empty() {
        return true;
    }
    head.iter().all(|&x| x <= 1) && (last <= 1 || (last == 2 && head.iter().all(|&x| x == 1)))
}

/// Instance families used by the audits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Integer values drawn uniformly from `[1, 1000]`, redrawn on ties.
    Random,
    /// Every agent values good `g` at `1 + ε·2^g`.
    Identical,
    /// The last picker values exactly the bundle of an earlier picker whose quota is at least 2.
    Targeted,
    /// Random instances plus both deterministic families.
    Adversarial,
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "random" => Ok(Family::Random),
            "identical" => Ok(Family::Identical),
            "targeted" => Ok(Family::Targeted),
            "adversarial" | "all" => Ok(Family::Adversarial),
            other => Err(format!("unknown family `{other}` (random, identical, targeted, adversarial)")),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Random => "random",
            Family::Identical => "identical",
            Family::Targeted => "targeted",
            Family::Adversarial => "adversarial",
        };
        f.write_str(s)
    }
}

/// A strict valuation with integer values drawn uniformly from `[1, 1000]`.
pub fn random_valuation<R: Rng + ?Sized>(m: usize, rng: &mut R) -> AdditiveValuation {
    loop {
        let values: Vec<i64> = (0..m).map(|_| rng.gen_range(1..=1000)).collect();
        if let Ok(v) = AdditiveStrict::from_integers(&values) {
            return v.valuation().clone();
        }
    }
}

pub fn random_instances(n: usize, m: usize, count: usize, seed: u64) -> Vec<CardinalInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| CardinalInstance::new((0..n).map(|_| random_valuation(m, &mut rng)).collect()).expect("common m"))
        .collect()
}

/// Values `1 + ε·2^g`: nearly identical goods with distinct subset sums.
pub fn identical_goods_valuation(m: usize) -> AdditiveValuation {
    AdditiveValuation::new((0..m).map(|g| Rational::one() + epsilon() * Rational::from_integer(1 << g)).collect())
        .expect("positive values")
}

pub fn identical_goods_instance(n: usize, m: usize) -> CardinalInstance {
    CardinalInstance::new(vec![identical_goods_valuation(m); n]).expect("common m")
}

/// For quotas with an earlier picker `p_i` holding `q_i ≥ 2`: everyone but
/// the last picker shares the identical-goods valuation, so `p_i`'s bundle is
/// known in advance, and the last picker values each good of that bundle
/// above all other goods together.
pub fn targeted_ef1_instance(sq: &QuotaOrdering) -> Option<CardinalInstance> {
    let n = sq.n();
    let m = sq.m();
    let pos = sq.q()[..n.saturating_sub(1)].iter().position(|&x| x >= 2)?;
    let common = identical_goods_valuation(m);
    // identical-goods preference ranks goods from m-1 down to 0
    let start: usize = sq.q()[..pos].iter().sum();
    let target = GoodSet::from_goods((start..start + sq.q()[pos]).map(|r| m - 1 - r));
    let last = AdditiveValuation::new(
        (0..m).map(|g| Rational::from_integer(if target.contains(g) { 1i64 << (m + g) } else { 1i64 << g })).collect(),
    )
    .expect("positive values");
    let last_agent = sq.p()[n - 1];
    let vals = (0..n).map(|a| if a == last_agent { last.clone() } else { common.clone() }).collect();
    Some(CardinalInstance::new(vals).expect("common m"))
}

/// Instances for an audit. `Targeted` needs a serial-quota mechanism and
/// yields nothing otherwise.
pub fn generate_instances(
    family: Family,
    n: usize,
    m: usize,
    count: usize,
    seed: u64,
    sq: Option<&QuotaOrdering>,
) -> Vec<CardinalInstance> {
    match family {
        Family::Random => random_instances(n, m, count, seed),
        Family::Identical => vec![identical_goods_instance(n, m)],
        Family::Targeted => sq.and_then(targeted_ef1_instance).into_iter().collect(),
        Family::Adversarial => {
            let mut v = vec![identical_goods_instance(n, m)];
            v.extend(sq.and_then(targeted_ef1_instance));
            v.extend(random_instances(n, m, count, seed));
            v
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FairnessAudit {
    pub mechanism: MechanismDescriptor,
    pub instances_tested: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_ratio: Option<RatioReport>,
    /// Instance index and agent attaining the worst ratio.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_at: Option<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<RatioReport>,
    pub ef1_violations: Vec<Witness>,
    pub shortfalls: Vec<Witness>,
    #[serde(skip)]
    pub worst: Option<Rational>,
}

impl FairnessAudit {
    fn new(mech: &Mechanism, instances_tested: usize) -> FairnessAudit {
        FairnessAudit {
            mechanism: MechanismDescriptor::from(mech),
            instances_tested,
            worst_ratio: None,
            worst_at: None,
            rho: None,
            ef1_violations: Vec::new(),
            shortfalls: Vec::new(),
            worst: None,
        }
    }

    pub fn witnesses(&self) -> impl Iterator<Item = &Witness> {
        self.ef1_violations.iter().chain(&self.shortfalls)
    }
}

/// `v_i(f_i(v)) / MMS(v_i, n)` for every agent, 1 when the share is 0.
pub fn mms_ratios(mech: &Mechanism, inst: &CardinalInstance) -> Result<(Allocation, Vec<(Rational, Rational)>)> {
    let alloc = cardinal_apply(mech, inst)?;
    let ratios = (0..inst.n())
        .map(|i| {
            let v = inst.valuation(i);
            let share = mms(v, inst.n())?;
            let got = v.value(alloc.bundle(i));
            Ok((if share.is_zero() { Rational::one() } else { got / share }, share))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((alloc, ratios))
}

/// Worst ratio of received value to maximin share over the instances; with
/// `rho` given, every agent below `rho` times her share is reported.
pub fn rho_mms_audit(mech: &Mechanism, instances: &[CardinalInstance], rho: Option<Rational>) -> Result<FairnessAudit> {
    let per: Vec<(Allocation, Vec<(Rational, Rational)>)> =
        instances.par_iter().map(|inst| mms_ratios(mech, inst)).collect::<Result<_>>()?;
    let mut audit = FairnessAudit::new(mech, instances.len());
    audit.rho = rho.map(RatioReport::from);
    for (k, ((alloc, ratios), inst)) in per.iter().zip(instances).enumerate() {
        for (i, &(ratio, share)) in ratios.iter().enumerate() {
            if audit.worst.is_none_or(|w| ratio < w) {
                audit.worst = Some(ratio);
                audit.worst_at = Some((k, i));
            }
            if let Some(rho) = rho {
                let value = inst.valuation(i).value(alloc.bundle(i));
                if value < rho * share {
                    audit.shortfalls.push(Witness::ShareShortfall {
                        instance: inst.clone(),
                        allocation: alloc.clone(),
                        agent: i,
                        value,
                        share,
                        rho,
                    });
                }
            }
        }
    }
    audit.worst_ratio = audit.worst.map(RatioReport::from);
    Ok(audit)
}

/// EF1 violations over the instances, in instance order.
pub fn ef1_audit(mech: &Mechanism, instances: &[CardinalInstance]) -> Result<FairnessAudit> {
    let found: Vec<Option<Witness>> = instances
        .par_iter()
        .map(|inst| {
            let alloc = cardinal_apply(mech, inst)?;
            Ok(ef1_violation_cardinal(&alloc, inst).map(|(envious, envied)| Witness::Envy {
                instance: inst.clone(),
                allocation: alloc,
                envious,
                envied,
            }))
        })
        .collect::<Result<_>>()?;
    let mut audit = FairnessAudit::new(mech, instances.len());
    audit.ef1_violations = found.into_iter().flatten().collect();
    Ok(audit)
}

/// `⌊(m − n + 2) / 2⌋`, the denominator of the guaranteed share for quotas `(1, …, 1, m − n + 1)`.
pub fn approximation_denominator(n: usize, m: usize) -> usize {
    (m + 2 - n) / 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::goods::Permutation;
    use crate::prefs::PreferenceClass;
    use num_traits::Signed;
    use proptest::prelude::*;
    use std::sync::Arc;

    /// Brute force over all `n^m` labeled assignments.
    fn mms_oracle(values: &[i64], n: usize) -> i64 {
        let m = values.len();
        (0..n.pow(m as u32))
            .map(|mut code| {
                let mut parts = vec![0; n];
                for &v in values {
                    parts[code % n] += v;
                    code /= n;
                }
                *parts.iter().min().unwrap()
            })
            .max()
            .unwrap()
    }

    fn val(values: &[i64]) -> AdditiveValuation {
        AdditiveValuation::from_integers(values).unwrap()
    }

    #[test]
    fn mms_examples() {
        assert_eq!(mms(&val(&[3, 2, 1]), 2).unwrap(), Rational::from_integer(3));
        assert_eq!(mms(&val(&[3, 2, 1]), 1).unwrap(), Rational::from_integer(6));
        assert_eq!(mms(&val(&[1, 1, 1, 1]), 2).unwrap(), Rational::from_integer(2));
        assert_eq!(mms(&val(&[5, 1]), 3).unwrap(), Rational::zero());
        assert!(matches!(mms(&val(&[1; 16]), 3), Err(Error::TooLarge(_))));
    }

    #[test]
    fn ef1_feasibility_examples() {
        assert!(ef1_quota_feasibility(&[1, 1, 2]));
        assert!(!ef1_quota_feasibility(&[2, 1]));
        assert!(!ef1_quota_feasibility(&[2, 1, 1]));
        assert!(!ef1_quota_feasibility(&[1, 0, 2]));
        assert!(ef1_quota_feasibility(&[1, 0, 1]));
        assert!(!ef1_quota_feasibility(&[1, 3]));
        assert!(ef1_quota_feasibility(&[5]));
        assert!(ef1_quota_feasibility(&[]));
    }

    #[test]
    fn one_good_each_is_ef1() {
        let inst = CardinalInstance::from_integers(&[vec![5, 1, 9], vec![2, 8, 3], vec![1, 2, 4]]).unwrap();
        let alloc = Allocation::new(vec![GoodSet::singleton(2), GoodSet::singleton(0), GoodSet::singleton(1)]).unwrap();
        assert!(check_ef1(&alloc, &inst).passed());
        let single = CardinalInstance::from_integers(&[vec![1, 2]]).unwrap();
        assert!(check_ef1(&Allocation::new(vec![GoodSet::full(2)]).unwrap(), &single).passed());
    }

    #[test]
    fn empty_handed_agent_envies_two_goods() {
        let inst = CardinalInstance::from_integers(&[vec![1, 2, 4], vec![1, 2, 4], vec![1, 2, 4]]).unwrap();
        let alloc = Allocation::new(vec![GoodSet::EMPTY, GoodSet::from_goods([0, 1]), GoodSet::singleton(2)]).unwrap();
        let report = check_ef1(&alloc, &inst);
        assert!(!report.passed());
        assert!(matches!(report.witness, Some(Witness::Envy { envious: 0, envied: 1, .. })));
    }

    #[test]
    fn ordinal_and_cardinal_ef1_agree() {
        let inst = random_instances(3, 4, 50, 3);
        for inst in inst {
            let profile = inst.profile().unwrap();
            for alloc in Allocation::enumerate(3, 4, false) {
                assert_eq!(ef1_violation(&alloc, &profile), ef1_violation_cardinal(&alloc, &inst));
            }
        }
    }

    #[test]
    fn identical_goods_values_are_strict() {
        for m in 0..=8 {
            assert!(AdditiveStrict::new(identical_goods_valuation(m)).is_ok());
        }
    }

    #[test]
    fn identical_goods_ratio_is_within_the_perturbation_of_the_bound() {
        for (n, m) in [(2, 4), (2, 5), (2, 6), (3, 6)] {
            let mut q = vec![1; n - 1];
            q.push(m - n + 1);
            let domain = Arc::new(PreferenceClass::strict_additive(m).unwrap());
            let mech = Mechanism::serial_quota(domain, &q, &(0..n).collect::<Vec<_>>()).unwrap();
            let audit = rho_mms_audit(&mech, &[identical_goods_instance(n, m)], None).unwrap();
            let bound = Rational::new(1, approximation_denominator(n, m) as i64);
            let deviation = (audit.worst.unwrap() - bound).abs() / bound;
            assert!(deviation <= epsilon() * Rational::from_integer(1 << (m + 1)), "{n} {m}");
        }
    }

    #[test]
    fn targeted_instance_breaks_large_early_quota() {
        for (q, m) in [(vec![2, 1], 3), (vec![2, 2], 4), (vec![1, 2, 1], 4), (vec![2, 0], 2), (vec![1, 3, 0], 5)] {
            let sq = QuotaOrdering::identity_order(&q, m).unwrap();
            let domain = Arc::new(PreferenceClass::strict_additive(m).unwrap());
            let mech = Mechanism::from_quota_ordering(domain, sq.clone()).unwrap();
            let inst = targeted_ef1_instance(&sq).unwrap();
            let audit = ef1_audit(&mech, &[inst]).unwrap();
            assert_eq!(audit.ef1_violations.len(), 1, "{q:?}");
            assert!(audit.ef1_violations[0].replay(&mech).unwrap());
        }
        let sq = QuotaOrdering::identity_order(&[1, 1, 2], 4).unwrap();
        assert!(targeted_ef1_instance(&sq).is_none());
    }

    #[test]
    fn round_robin_is_ef1_on_identical_valuations() {
        for (n, m) in [(2, 5), (3, 7)] {
            let domain = Arc::new(PreferenceClass::strict_additive(m).unwrap());
            let rr = Mechanism::round_robin(n, domain).unwrap();
            let insts: Vec<CardinalInstance> = random_instances(1, m, 100, 9)
                .into_iter()
                .map(|i| CardinalInstance::new(vec![i.valuation(0).clone(); n]).unwrap())
                .chain([identical_goods_instance(n, m)])
                .collect();
            assert!(ef1_audit(&rr, &insts).unwrap().ef1_violations.is_empty());
        }
    }

    #[test]
    fn large_first_quota_can_leave_the_last_agent_nothing_she_values() {
        let sq = QuotaOrdering::identity_order(&[2, 1], 3).unwrap();
        let domain = Arc::new(PreferenceClass::strict_additive(3).unwrap());
        let mech = Mechanism::from_quota_ordering(domain, sq).unwrap();
        // the last agent values only the two goods the first agent takes
        let common = identical_goods_valuation(3);
        let last =
            AdditiveValuation::new(vec![rational(1, 1000), Rational::from_integer(1), Rational::from_integer(2)])
                .unwrap();
        let inst = CardinalInstance::new(vec![common, last]).unwrap();
        let audit = rho_mms_audit(&mech, &[inst], Some(rational(1, 100))).unwrap();
        assert!(audit.worst.unwrap() < rational(1, 100));
        assert!(audit.shortfalls.iter().all(|w| w.replay(&mech).unwrap()));
    }

    #[test]
    fn single_agent_ratio_is_one() {
        let domain = Arc::new(PreferenceClass::strict_additive(4).unwrap());
        let mech = Mechanism::serial_quota(domain, &[4], &[0]).unwrap();
        let audit = rho_mms_audit(&mech, &random_instances(1, 4, 20, 1), None).unwrap();
        assert_eq!(audit.worst, Some(Rational::one()));
    }

    proptest! {
        #[test]
        fn mms_matches_labeled_brute_force(values in proptest::collection::vec(0i64..50, 0..7), n in 1usize..4) {
            prop_assert_eq!(mms(&val(&values), n).unwrap(), Rational::from_integer(mms_oracle(&values, n)));
        }

        #[test]
        fn mms_is_monotone_in_n_and_scale_covariant(
            values in proptest::collection::vec(1i64..100, 1..7),
            n in 1usize..4,
            c in 1i64..20,
            d in 1i64..20,
        ) {
            let v = val(&values);
            prop_assert!(mms(&v, n + 1).unwrap() <= mms(&v, n).unwrap());
            let c = rational(c, d);
            prop_assert_eq!(mms(&v.scale(c).unwrap(), n).unwrap(), c * mms(&v, n).unwrap());
        }

        #[test]
        fn mms_is_symmetric(values in proptest::collection::vec(0i64..30, 5), n in 1usize..4) {
            let v = val(&values);
            let share = mms(&v, n).unwrap();
            for pi in Permutation::all(5) {
                prop_assert_eq!(mms(&v.permute(&pi), n).unwrap(), share);
            }
        }
    }
}

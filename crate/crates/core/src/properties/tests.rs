use std::sync::Arc;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::goods::GoodSet;
use crate::mechanisms::{CardinalInstance, QuotaOrdering};
use crate::prefs::{rational, AdditiveValuation, Rational};
use crate::search::enumerate_q;

fn lex_class(m: usize) -> Arc<PreferenceClass> {
    Arc::new(PreferenceClass::lexicographic(m).unwrap())
}

fn lex(order: &[usize]) -> Preference {
    Preference::lexicographic(order.to_vec()).unwrap()
}

fn set(goods: &[usize]) -> GoodSet {
    GoodSet::from_goods(goods.iter().copied())
}

fn sq(class: &Arc<PreferenceClass>, q: &[usize], p: &[usize]) -> Mechanism {
    Mechanism::serial_quota(class.clone(), q, p).unwrap()
}

fn random_lex_profile(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<Preference> {
    (0..n).map(|_| Preference::lexicographic(Permutation::random(m, rng).map()).unwrap()).collect()
}

fn random_allocation(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Allocation {
    let mut bundles = vec![GoodSet::EMPTY; n];
    for g in 0..m {
        let owner = rng.gen_range(0..=n);
        if owner < n {
            bundles[owner] = bundles[owner].insert(g);
        }
    }
    Allocation::new(bundles).unwrap()
}

#[test]
fn serial_quota_satisfies_the_axioms() {
    let class = lex_class(3);
    for q in enumerate_q(2, 3, false) {
        let mech = Mechanism::from_quota_ordering(class.clone(), q).unwrap();
        for report in check_axioms(&mech).unwrap() {
            assert!(report.passed(), "{report}");
        }
    }
    let all = Arc::new(PreferenceClass::strict_monotone(2).unwrap());
    for q in enumerate_q(2, 2, false) {
        let mech = Mechanism::from_quota_ordering(all.clone(), q).unwrap();
        assert!(check_axioms(&mech).unwrap().iter().all(PropertyReport::passed));
    }
}

#[test]
fn non_truthful_counterexample() {
    let mech = Mechanism::counter_non_truthful(2, lex_class(2)).unwrap();
    let report = check_truthful(&mech).unwrap();
    assert!(!report.passed());
    let Some(Witness::Manipulation { profile, agent, .. }) = &report.witness else { panic!("{report}") };
    assert_eq!(*agent, 1);
    assert_eq!(profile[0], profile[1]);
    assert!(report.replay(&mech).unwrap());
    assert!(check_non_bossy(&mech).unwrap().passed());
    assert!(check_neutral(&mech).unwrap().passed());
}

#[test]
fn round_robin_is_manipulable() {
    let mech = Mechanism::round_robin(2, lex_class(4)).unwrap();
    let report = check_truthful(&mech).unwrap();
    assert!(!report.passed());
    assert!(report.replay(&mech).unwrap());
    assert!(check_partition(&mech).unwrap().passed());
}

#[test]
fn bossy_counterexample() {
    let mech = Mechanism::counter_bossy(3, lex_class(3)).unwrap();
    let report = check_non_bossy(&mech).unwrap();
    let Some(Witness::Bossy { agent, before, after, .. }) = &report.witness else { panic!("{report}") };
    assert_eq!(*agent, 0);
    assert_eq!(before.bundle(0), GoodSet::EMPTY);
    assert_eq!(after.bundle(0), GoodSet::EMPTY);
    assert_ne!(before.bundle(1), after.bundle(1));
    assert!(report.replay(&mech).unwrap());
    assert!(check_truthful(&mech).unwrap().passed());
    assert!(check_neutral(&mech).unwrap().passed());
}

#[test]
fn non_neutral_counterexample() {
    let mech = Mechanism::counter_non_neutral(3, lex_class(3), 0, 1).unwrap();
    let report = check_neutral(&mech).unwrap();
    assert!(!report.passed());
    assert!(report.replay(&mech).unwrap());
    assert!(check_truthful(&mech).unwrap().passed());
    assert!(check_non_bossy(&mech).unwrap().passed());
}

#[test]
fn constant_table_is_not_neutral() {
    let class = lex_class(3);
    let fixed = Allocation::new(vec![set(&[0]), set(&[1, 2])]).unwrap();
    let mech = Mechanism::table(2, class, vec![fixed; 36]).unwrap();
    let report = check_neutral(&mech).unwrap();
    assert!(!report.passed());
    assert!(report.replay(&mech).unwrap());
    assert!(check_truthful(&mech).unwrap().passed());
}

#[test]
fn neutrality_needs_a_closed_domain() {
    let class = Arc::new(PreferenceClass::explicit(3, vec![lex(&[0, 1, 2]), lex(&[1, 0, 2])]).unwrap());
    let mech = Mechanism::serial_quota(class, &[1, 2], &[0, 1]).unwrap();
    assert!(matches!(check_neutral(&mech), Err(Error::InvalidDomain(_))));
}

#[test]
fn sampled_neutrality_beyond_four_goods() {
    let perms = Checker::default().neutral_permutations(5);
    assert_eq!(perms.len(), 10 + 100);
    assert_eq!(Checker::default().neutral_permutations(4).len(), 23);
    let class = lex_class(5);
    assert!(check_neutral(&sq(&class, &[2, 3], &[1, 0])).unwrap().passed());
    let bad = Mechanism::counter_non_neutral(3, lex_class(5), 0, 1).unwrap();
    assert!(!check_neutral(&bad).unwrap().passed());
}

#[test]
fn partition_check() {
    let class = lex_class(3);
    assert!(check_partition(&sq(&class, &[1, 2], &[0, 1])).unwrap().passed());
    let report = check_partition(&sq(&class, &[1, 1], &[0, 1])).unwrap();
    assert!(!report.passed());
    assert!(report.replay(&sq(&class, &[1, 1], &[0, 1])).unwrap());
}

#[test]
fn two_agent_partition_tables_are_non_bossy() {
    let class = lex_class(3);
    let partitions = Allocation::enumerate(2, 3, true);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let cells = (0..36).map(|_| partitions[rng.gen_range(0..partitions.len())].clone()).collect();
        let mech = Mechanism::table(2, class.clone(), cells).unwrap();
        assert!(check_non_bossy(&mech).unwrap().passed());
    }
}

/// Every cycle of distinct agents and owned goods, tried directly.
fn cycle_oracle(alloc: &Allocation, profile: &[Preference]) -> bool {
    let n = alloc.n();
    (2..=n).any(|k| {
        (0..n).permutations(k).any(|agents| {
            agents
                .iter()
                .map(|&a| alloc.bundle(a).iter().collect::<Vec<_>>())
                .multi_cartesian_product()
                .any(|goods| TradingCycle { agents: agents.clone(), goods }.is_improving(alloc, profile))
        })
    })
}

#[test]
fn improving_cycle_search_matches_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut found = 0;
    for _ in 0..3000 {
        let (n, m) = (rng.gen_range(1..=4), rng.gen_range(1..=5));
        let profile = random_lex_profile(n, m, &mut rng);
        let alloc = random_allocation(n, m, &mut rng);
        let cycle = find_improving_cycle(&alloc, &profile);
        assert_eq!(cycle.is_some(), cycle_oracle(&alloc, &profile));
        if let Some(c) = cycle {
            assert!(c.is_improving(&alloc, &profile));
            found += 1;
        }
    }
    assert!(found > 100);
}

#[test]
fn simple_swap_cycle() {
    let alloc = Allocation::new(vec![set(&[1]), set(&[0])]).unwrap();
    let profile = [lex(&[0, 1]), lex(&[1, 0])];
    let cycle = find_improving_cycle(&alloc, &profile).unwrap();
    assert_eq!(cycle, TradingCycle { agents: vec![0, 1], goods: vec![1, 0] });
    assert_eq!(cycle.apply(&alloc).bundles(), &[set(&[0]), set(&[1])]);
    let single = Allocation::new(vec![set(&[0, 1])]).unwrap();
    assert_eq!(find_improving_cycle(&single, &profile[..1]), None);
}

#[test]
fn serial_quota_on_identical_profiles_has_no_cycle() {
    let class = lex_class(3);
    for q in enumerate_q(3, 3, false) {
        for pref in class.members() {
            let profile = vec![pref.clone(); 3];
            let alloc = crate::mechanisms::apply_serial_quota(&q, &profile);
            assert_eq!(find_improving_cycle(&alloc, &profile), None);
            assert!(check_consecutive(&alloc, pref).unwrap());
        }
    }
}

fn swap_example() -> (Mechanism, CardinalInstance) {
    let domain = Arc::new(PreferenceClass::strict_additive(3).unwrap());
    let mech = Mechanism::serial_quota(domain, &[1, 2], &[0, 1]).unwrap();
    let inst = CardinalInstance::new(vec![
        AdditiveValuation::new(vec![Rational::from_integer(11), rational(1001, 100), Rational::from_integer(10)])
            .unwrap(),
        AdditiveValuation::new(vec![Rational::from_integer(10), rational(101, 100), Rational::from_integer(1)])
            .unwrap(),
    ])
    .unwrap();
    (mech, inst)
}

#[test]
fn swap_instance_is_blocked_by_the_bundle_swap() {
    let (mech, inst) = swap_example();
    let profile = inst.profile().unwrap();
    let report = check_pareto_at(&mech, &profile).unwrap();
    let Some(Witness::Blocking { allocation, blocking, .. }) = &report.witness else { panic!("{report}") };
    assert_eq!(allocation.bundles(), &[set(&[0]), set(&[1, 2])]);
    assert_eq!(blocking.bundles(), &[set(&[1, 2]), set(&[0])]);
    assert!(report.replay(&mech).unwrap());
    // every blocking allocation is the swap
    let blocking_all: Vec<Allocation> = Allocation::enumerate(2, 3, false)
        .into_iter()
        .filter(|b| {
            (0..2).all(|i| profile[i].weakly_prefers(b.bundle(i), allocation.bundle(i)))
                && (0..2).any(|i| profile[i].prefers(b.bundle(i), allocation.bundle(i)))
        })
        .collect();
    assert_eq!(blocking_all, vec![blocking.clone()]);
    // the swap moves two goods from one side, so no single-good cycle reaches it
    assert_eq!(find_improving_cycle(allocation, &profile), None);
}

/// Search over per-agent upper sets `{S : S ≽_i A_i}` with disjointness.
fn blocking_oracle(alloc: &Allocation, profile: &[Preference]) -> bool {
    let m = profile[0].m();
    let uppers: Vec<Vec<GoodSet>> = profile
        .iter()
        .enumerate()
        .map(|(i, p)| GoodSet::all(m).filter(|&s| p.weakly_prefers(s, alloc.bundle(i))).collect())
        .collect();
    fn go(i: usize, used: GoodSet, strict: bool, uppers: &[Vec<GoodSet>], alloc: &Allocation) -> bool {
        if i == uppers.len() {
            return strict;
        }
        uppers[i]
            .iter()
            .any(|&s| s.is_disjoint(used) && go(i + 1, used.union(s), strict || s != alloc.bundle(i), uppers, alloc))
    }
    go(0, GoodSet::EMPTY, false, &uppers, alloc)
}

#[test]
fn pareto_brute_force_matches_upper_set_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let all = PreferenceClass::strict_monotone(3).unwrap();
    for _ in 0..2000 {
        let n = rng.gen_range(1..=3);
        let profile: Vec<Preference> = (0..n).map(|_| all.get(rng.gen_range(0..all.len())).clone()).collect();
        let alloc = random_allocation(n, 3, &mut rng);
        assert_eq!(pareto_blocking(&alloc, &profile).unwrap().is_some(), blocking_oracle(&alloc, &profile));
    }
}

#[test]
fn serial_quota_partitions_are_pareto_efficient() {
    for (n, m) in [(2, 3), (3, 3), (1, 3)] {
        let class = lex_class(m);
        for q in enumerate_q(n, m, true) {
            let mech = Mechanism::from_quota_ordering(class.clone(), q).unwrap();
            assert!(check_pareto_efficient(&mech).unwrap().passed());
            for (idx, alloc) in mech.tabulate().unwrap().iter().enumerate() {
                let profile = crate::mechanisms::index_to_profile(idx, &class, n).unwrap();
                assert_eq!(find_improving_cycle(alloc, &profile), None);
            }
        }
    }
    let big = sq(&lex_class(7), &[3, 4], &[0, 1]);
    assert!(matches!(check_pareto_efficient(&big), Err(Error::TooLarge(_))));
}

#[test]
fn non_partition_serial_quota_is_not_pareto_efficient() {
    let mech = sq(&lex_class(3), &[1, 1], &[0, 1]);
    let report = check_pareto_efficient(&mech).unwrap();
    assert!(!report.passed());
    assert!(report.replay(&mech).unwrap());
}

#[test]
fn push_up_invariance_for_serial_quota() {
    for (n, m) in [(2, 3), (3, 3)] {
        let class = lex_class(m);
        for q in enumerate_q(n, m, true) {
            let mech = Mechanism::from_quota_ordering(class.clone(), q).unwrap();
            let c = Checker::default();
            assert!(c.push_up_invariance(&mech, PushUpMode::OwnBundleLex).unwrap().passed());
            assert!(c.push_up_invariance(&mech, PushUpMode::Sampled { trials: 200 }).unwrap().passed());
        }
    }
    let all = Arc::new(PreferenceClass::strict_monotone(3).unwrap());
    let mech = sq(&all, &[1, 2], &[1, 0]);
    assert!(Checker::default().push_up_invariance(&mech, PushUpMode::Exhaustive).unwrap().passed());
}

#[test]
fn push_up_can_change_a_non_truthful_mechanism() {
    let mech = Mechanism::counter_non_truthful(2, lex_class(2)).unwrap();
    assert!(!push_up_invariance_guaranteed(&mech).unwrap());
    let report = Checker::default().push_up_invariance(&mech, PushUpMode::Exhaustive).unwrap();
    assert!(!report.passed());
    assert!(report.replay(&mech).unwrap());
    let trivial = sq(&lex_class(3), &[1, 2], &[0, 1]);
    assert!(push_up_invariance_guaranteed(&trivial).unwrap());
}

#[test]
fn first_picker_controls_small_sets() {
    let class = lex_class(3);
    let mech = sq(&class, &[2, 1], &[1, 0]);
    for s in GoodSet::all(3) {
        let report = controls(&mech, 1, s).unwrap();
        assert_eq!(report.passed(), s.len() <= 2, "{s}");
        assert!(report.replay(&mech).unwrap());
    }
    for agent in 0..2 {
        assert!(controls(&mech, agent, GoodSet::EMPTY).unwrap().passed());
    }
}

#[test]
fn control_claim_holds_for_serial_quota() {
    let class = lex_class(3);
    for q in enumerate_q(3, 3, false) {
        let mech = Mechanism::from_quota_ordering(class.clone(), q).unwrap();
        assert!(check_control_claim(&mech).unwrap().passed());
    }
}

#[test]
fn control_claim_fails_for_the_counterexamples() {
    let nt = Mechanism::counter_non_truthful(2, lex_class(2)).unwrap();
    let bossy = Mechanism::counter_bossy(3, lex_class(3)).unwrap();
    let nn = Mechanism::counter_non_neutral(3, lex_class(3), 0, 1).unwrap();
    for (mech, expected) in [(&nt, set(&[0])), (&bossy, set(&[0])), (&nn, set(&[0]))] {
        let report = check_control_claim(mech).unwrap();
        let Some(Witness::ControlClaim { set: s, .. }) = &report.witness else { panic!("{report}") };
        assert_eq!(*s, expected);
        assert!(report.replay(mech).unwrap());
        let all = Checker::collect_all().control_claim(mech).unwrap();
        assert!(all.replay(mech).unwrap());
    }
    let Some(Witness::ControlClaim { agent, .. }) = check_control_claim(&bossy).unwrap().witness else {
        unreachable!()
    };
    assert_eq!(agent, 1);
}

#[test]
fn consecutive_examples() {
    let e = lex(&[0, 1, 2]);
    assert!(check_consecutive(&Allocation::new(vec![set(&[0]), set(&[1, 2])]).unwrap(), &e).unwrap());
    assert!(!check_consecutive(&Allocation::new(vec![set(&[0, 2]), set(&[1])]).unwrap(), &e).unwrap());
    assert!(check_consecutive(&Allocation::new(vec![set(&[1]), set(&[0])]).unwrap(), &e).unwrap());
    assert!(!check_consecutive(&Allocation::new(vec![set(&[0]), set(&[2])]).unwrap(), &e).unwrap());
    assert!(check_consecutive(&Allocation::new(vec![set(&[1]), set(&[0])]).unwrap(), &e).unwrap());
    let r = Preference::from_ranks(2, vec![0, 1, 2, 3]).unwrap();
    assert!(check_consecutive(&Allocation::empty(1), &r).is_ok());
    let non_lex = Preference::from_ranks(3, vec![0, 1, 2, 4, 3, 5, 6, 7]).unwrap();
    assert!(matches!(check_consecutive(&Allocation::empty(1), &non_lex), Err(Error::UnsupportedPreference(_))));
}

#[test]
fn first_pick_independence_for_serial_quota() {
    for n in [2, 3] {
        let class = lex_class(3);
        for q in enumerate_q(n, 3, false) {
            let mech = Mechanism::from_quota_ordering(class.clone(), q).unwrap();
            assert!(check_first_pick_independence(&mech).unwrap().passed());
        }
    }
    let rr = Mechanism::round_robin(2, lex_class(3)).unwrap();
    assert!(check_first_pick_independence(&rr).is_err());
}

#[test]
fn collected_witnesses_all_replay() {
    let mechs = vec![
        Mechanism::counter_non_truthful(2, lex_class(3)).unwrap(),
        Mechanism::counter_bossy(3, lex_class(3)).unwrap(),
        Mechanism::counter_non_neutral(3, lex_class(3), 2, 0).unwrap(),
        Mechanism::round_robin(2, lex_class(3)).unwrap(),
        sq(&lex_class(3), &[1, 1], &[1, 0]),
    ];
    let c = Checker::collect_all();
    for mech in &mechs {
        for property in [
            Property::Truthful,
            Property::NonBossy,
            Property::Neutral,
            Property::Partition,
            Property::ParetoEfficient,
            Property::ControlClaim,
        ] {
            let report = c.check(mech, property).unwrap();
            assert_eq!(report.passed(), report.witnesses.is_empty());
            assert!(report.replay(mech).unwrap(), "{} {property}", mech.name());
        }
    }
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let mech = Mechanism::round_robin(3, lex_class(3)).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            [Property::Truthful, Property::NonBossy, Property::ParetoEfficient]
                .map(|p| serde_json::to_string(&Checker::default().check(&mech, p).unwrap()).unwrap())
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn quota_ordering_of_a_serial_quota_mechanism() {
    let class = lex_class(3);
    let mech = sq(&class, &[0, 3], &[0, 1]);
    assert_eq!(mech.quota_ordering(), Some(&QuotaOrdering::canonicalize(&[3, 0], &[1, 0], 3).unwrap()));
}

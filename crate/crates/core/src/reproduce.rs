//! The ten acceptance criteria as runnable scenarios. Each runner reports a
//! verdict, a one-line summary and every failure witness it produced, so the
//! witness replay criterion can re-check them against their mechanisms.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use num_traits::{One, Signed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::fairness::{
    approximation_denominator, ef1_audit, ef1_quota_feasibility, generate_instances, identical_goods_instance,
    random_instances, random_valuation, rho_mms_audit, targeted_ef1_instance, Family,
};
use crate::mechanisms::{cardinal_apply, CardinalInstance, Mechanism};
use crate::prefs::{rational, AdditiveValuation, PreferenceClass, Rational};
use crate::properties::{
    check_axioms, check_control_claim, check_pareto_at, check_pareto_efficient, Checker, Property, PushUpMode, Witness,
};
use crate::search::{enumerate_q, mutate_and_falsify, verify_characterization, AXIOMS};

/// Seed shared by every randomized criterion.
pub const SEED: u64 = 20_240_601;

/// Id, title and runtime budget in seconds.
pub const CRITERIA: [(usize, &str, Option<u64>); 10] = [
    (1, "serial-quota mechanisms are truthful, non-bossy and neutral", Some(60)),
    (2, "exhaustive search at n=2, m=2 finds exactly the serial-quota family", Some(1)),
    (3, "single-cell mutants of serial-quota tables all fail a check", Some(120)),
    (4, "serial-quota partitions are Pareto efficient; a two-agent instance is blocked by a bundle swap", Some(60)),
    (5, "control claim holds for serial-quota and fails for the three counterexamples", Some(30)),
    (6, "quotas (1,...,1,m-n+1) guarantee the MMS fraction and the bound is tight", Some(60)),
    (7, "EF1 audit verdict equals quota feasibility for n<=3, m<=5", Some(90)),
    (8, "serial-quota outputs are invariant under push-ups", Some(30)),
    (9, "valuations inducing the same preferences give the same allocation", Some(10)),
    (10, "every failure witness from criteria 2-7 replays", None),
];

/// A witness together with the mechanism it was found against.
#[derive(Clone, Debug)]
pub struct Replayable {
    pub mechanism: Mechanism,
    pub witness: Witness,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionOutcome {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_ms: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_ms: Option<u128>,
    pub witness_count: usize,
    #[serde(skip)]
    pub witnesses: Vec<Replayable>,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{verdict}] criterion {:>2}: {} ({}; {} ms)", self.id, self.title, self.detail, self.elapsed_ms)
    }
}

struct Body {
    passed: bool,
    detail: String,
    witnesses: Vec<Replayable>,
}

impl Body {
    fn new(passed: bool, detail: String) -> Body {
        Body { passed, detail, witnesses: Vec::new() }
    }
}

fn lex(m: usize) -> Result<Arc<PreferenceClass>> {
    Ok(Arc::new(PreferenceClass::lexicographic(m)?))
}

fn keep(witnesses: &mut Vec<Replayable>, mech: &Mechanism, witness: Option<&Witness>) {
    witnesses.extend(witness.map(|w| Replayable { mechanism: mech.clone(), witness: w.clone() }));
}

fn finish(id: usize, started: Instant, body: Body) -> CriterionOutcome {
    let (_, title, budget) = CRITERIA[id - 1];
    let elapsed_ms = started.elapsed().as_millis();
    let budget_ms = budget.map(|s| s as u128 * 1000);
    let in_time = budget_ms.is_none_or(|b| elapsed_ms <= b);
    let detail = if in_time { body.detail } else { format!("{}; over the {}s budget", body.detail, budget.unwrap()) };
    CriterionOutcome {
        id,
        title,
        passed: body.passed && in_time,
        detail,
        elapsed_ms,
        budget_ms,
        witness_count: body.witnesses.len(),
        witnesses: body.witnesses,
    }
}

/// Runs one criterion. Criterion 10 runs 2 through 7 first.
pub fn run_criterion(id: usize) -> Result<CriterionOutcome> {
    if id == 10 {
        let earlier = (2..=7).map(run_criterion).collect::<Result<Vec<_>>>()?;
        return Ok(replay_criterion(&earlier));
    }
    let started = Instant::now();
    let body = match id {
        1 => axioms_forward()?,
        2 => tiny_characterization()?,
        3 => mutation_proxy()?,
        4 => pareto()?,
        5 => control()?,
        6 => mms_bound()?,
        7 => ef1_feasibility()?,
        8 => push_up()?,
        9 => cardinal_layer()?,
        _ => return Err(crate::Error::Precondition(format!("no criterion {id}; criteria are 1 to 10"))),
    };
    Ok(finish(id, started, body))
}

/// Runs every criterion in order, invoking `each` as soon as one finishes.
pub fn run_all(mut each: impl FnMut(&CriterionOutcome)) -> Result<Vec<CriterionOutcome>> {
    let mut out = Vec::new();
    for id in 1..=9 {
        let outcome = run_criterion(id)?;
        each(&outcome);
        out.push(outcome);
    }
    let replay = replay_criterion(&out);
    each(&replay);
    out.push(replay);
    Ok(out)
}

/// Criterion 10 over already computed outcomes.
pub fn replay_criterion(earlier: &[CriterionOutcome]) -> CriterionOutcome {
    let started = Instant::now();
    let mut total = 0;
    let mut failed = Vec::new();
    for outcome in earlier.iter().filter(|o| (2..=7).contains(&o.id)) {
        for r in &outcome.witnesses {
            total += 1;
            if !r.witness.replay(&r.mechanism).unwrap_or(false) {
                failed.push(format!("criterion {}: {}", outcome.id, r.witness));
            }
        }
    }
    let covered = (2..=7).all(|id| earlier.iter().any(|o| o.id == id));
    let mut detail = format!("{}/{total} witnesses replayed", total - failed.len());
    if !covered {
        detail.push_str("; criteria 2-7 were not all run");
    }
    if let Some(first) = failed.first() {
        detail.push_str(&format!("; first failure {first}"));
    }
    finish(10, started, Body::new(covered && failed.is_empty() && total > 0, detail))
}

fn axioms_forward() -> Result<Body> {
    let mut domains = Vec::new();
    for (n, m) in [(2, 2), (2, 3), (2, 4), (3, 3), (3, 4)] {
        domains.push((n, lex(m)?));
    }
    domains.push((2, Arc::new(PreferenceClass::strict_monotone(3)?)));
    let (mut mechanisms, mut failures) = (0, Vec::new());
    for (n, class) in domains {
        for q in enumerate_q(n, class.m(), false) {
            let mech = Mechanism::from_quota_ordering(class.clone(), q)?;
            mechanisms += 1;
            failures.extend(check_axioms(&mech)?.into_iter().filter(|r| !r.passed()).map(|r| r.to_string()));
        }
    }
    let mut detail = format!("{mechanisms} mechanisms checked, {} axiom failures", failures.len());
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; first: {f}"));
    }
    Ok(Body::new(failures.is_empty(), detail))
}

fn tiny_characterization() -> Result<Body> {
    let report = verify_characterization(2, lex(2)?, true)?;
    let mut body = Body::new(
        report.tables_enumerated == 256
            && report.satisfying_mechanisms.len() == 4
            && report.serial_quota_family.len() == 4
            && report.sets_equal(),
        format!(
            "{} tables, {} satisfy the axioms, family of {}, sets equal: {}",
            report.tables_enumerated,
            report.satisfying_mechanisms.len(),
            report.serial_quota_family.len(),
            report.sets_equal()
        ),
    );
    for r in &report.rejections {
        body.passed &= r.report.witness.is_some();
        keep(&mut body.witnesses, &r.mechanism, r.report.witness.as_ref());
    }
    Ok(body)
}

fn mutation_proxy() -> Result<Body> {
    let (mut mutants, mut survivors, mut witnesses) = (0, 0, Vec::new());
    let mut killed = [0usize; 4];
    for (n, m) in [(2, 3), (3, 3)] {
        let class = lex(m)?;
        let bases = enumerate_q(n, m, true);
        let trials = 800usize.div_ceil(bases.len());
        for (k, base) in bases.iter().enumerate() {
            let report = mutate_and_falsify(base, class.clone(), trials, SEED + k as u64)?;
            mutants += report.mutants.len();
            survivors += report.survivors;
            for (slot, p) in AXIOMS.iter().chain([&Property::Partition]).enumerate() {
                killed[slot] += report.killed_by(*p);
            }
            for o in &report.mutants {
                if let Some(mech) = &o.mechanism {
                    keep(&mut witnesses, mech, o.witness.as_ref());
                }
            }
        }
    }
    Ok(Body {
        passed: mutants >= 1500 && survivors == 0,
        detail: format!(
            "{mutants} mutants, {survivors} survivors (killed by truthful {}, non-bossy {}, neutral {}, partition {})",
            killed[0], killed[1], killed[2], killed[3]
        ),
        witnesses,
    })
}

/// The two-agent instance whose serial-quota outcome both agents would trade away.
pub fn swap_instance() -> Result<(Mechanism, CardinalInstance)> {
    let domain = Arc::new(PreferenceClass::strict_additive(3)?);
    let mech = Mechanism::serial_quota(domain, &[1, 2], &[0, 1])?;
    let int = Rational::from_integer;
    let inst = CardinalInstance::new(vec![
        AdditiveValuation::new(vec![int(11), rational(1001, 100), int(10)])?,
        AdditiveValuation::new(vec![int(10), rational(101, 100), int(1)])?,
    ])?;
    Ok((mech, inst))
}

fn pareto() -> Result<Body> {
    let (mut mechanisms, mut failures) = (0, Vec::new());
    for m in 1..=4 {
        let class = lex(m)?;
        for n in 1..=3 {
            for q in enumerate_q(n, m, true) {
                let mech = Mechanism::from_quota_ordering(class.clone(), q)?;
                mechanisms += 1;
                let report = check_pareto_efficient(&mech)?;
                if !report.passed() {
                    failures.push(report.to_string());
                }
            }
        }
    }
    let (mech, inst) = swap_instance()?;
    let report = check_pareto_at(&mech, &inst.profile()?)?;
    let swapped = match &report.witness {
        Some(Witness::Blocking { allocation, blocking, .. }) => {
            blocking.bundle(0) == allocation.bundle(1) && blocking.bundle(1) == allocation.bundle(0)
        }
        _ => false,
    };
    let mut body = Body::new(
        failures.is_empty() && swapped,
        format!(
            "{mechanisms} mechanisms efficient on every profile ({} failures); swap instance blocked by the bundle swap: {swapped}",
            failures.len()
        ),
    );
    keep(&mut body.witnesses, &mech, report.witness.as_ref());
    Ok(body)
}

fn control() -> Result<Body> {
    let class = lex(3)?;
    let qs = enumerate_q(3, 3, false);
    let mut ok = true;
    for q in &qs {
        let mech = Mechanism::from_quota_ordering(class.clone(), q.clone())?;
        ok &= check_control_claim(&mech)?.passed();
    }
    let counters = [
        (Mechanism::counter_non_truthful(2, lex(2)?)?, Property::Truthful),
        (Mechanism::counter_bossy(3, class.clone())?, Property::NonBossy),
        (Mechanism::counter_non_neutral(3, class.clone(), 0, 1)?, Property::Neutral),
    ];
    let mut witnesses = Vec::new();
    let mut notes = Vec::new();
    for (mech, designated) in &counters {
        let claim = check_control_claim(mech)?;
        let axioms = check_axioms(mech)?;
        let failed: Vec<Property> = axioms.iter().filter(|r| !r.passed()).map(|r| r.property).collect();
        let exact = failed == [*designated];
        ok &= !claim.passed() && claim.witness.is_some() && exact;
        notes.push(format!("{} fails {}", mech.name(), failed.iter().map(|p| p.name()).collect::<Vec<_>>().join("+")));
        keep(&mut witnesses, mech, claim.witness.as_ref());
        for r in &axioms {
            keep(&mut witnesses, mech, r.witness.as_ref());
        }
    }
    Ok(Body {
        passed: ok,
        detail: format!("{} serial-quota mechanisms checked; {}", qs.len(), notes.join(", ")),
        witnesses,
    })
}

fn mms_bound() -> Result<Body> {
    let tolerance = rational(1, 1000);
    let mut ok = true;
    let mut notes = Vec::new();
    let mut witnesses = Vec::new();
    for (k, (n, m)) in [(2, 4), (2, 6), (3, 6)].into_iter().enumerate() {
        let mut q = vec![1; n - 1];
        q.push(m - n + 1);
        let p: Vec<usize> = (0..n).collect();
        let mech = Mechanism::serial_quota(Arc::new(PreferenceClass::strict_additive(m)?), &q, &p)?;
        let rho = Rational::new(1, approximation_denominator(n, m) as i64);
        let tight = rho_mms_audit(&mech, &[identical_goods_instance(n, m)], None)?;
        let worst = tight.worst.unwrap_or_else(Rational::one);
        let close = (worst - rho).abs() / rho <= tolerance;
        let random = rho_mms_audit(&mech, &random_instances(n, m, 10_000, SEED + k as u64), Some(rho))?;
        ok &= close && random.shortfalls.is_empty();
        notes.push(format!(
            "({n},{m}) identical {:.6} vs {rho}, {} random shortfalls",
            crate::prefs::to_f64(worst),
            random.shortfalls.len()
        ));
        for w in &random.shortfalls {
            keep(&mut witnesses, &mech, Some(w));
        }
    }
    Ok(Body { passed: ok, detail: notes.join("; "), witnesses })
}

fn ef1_feasibility() -> Result<Body> {
    let (mut vectors, mut mismatches, mut witnesses) = (0, Vec::new(), Vec::new());
    let mut targeted_misses = 0;
    for m in 1..=5 {
        let domain = Arc::new(PreferenceClass::strict_additive(m)?);
        for n in 1..=3 {
            for (k, sq) in enumerate_q(n, m, false).into_iter().enumerate() {
                vectors += 1;
                let expected = ef1_quota_feasibility(sq.q());
                let count = if expected { 10_000 } else { 200 };
                let seed = SEED ^ ((n * 100 + m) as u64) << 16 ^ k as u64;
                let mech = Mechanism::from_quota_ordering(domain.clone(), sq.clone())?;
                let audit = ef1_audit(&mech, &generate_instances(Family::Adversarial, n, m, count, seed, Some(&sq)))?;
                if audit.ef1_violations.is_empty() != expected {
                    mismatches.push(format!("q={:?} p={:?}", sq.q(), sq.p()));
                }
                if sq.q()[..n - 1].iter().any(|&x| x >= 2) {
                    let hit = targeted_ef1_instance(&sq)
                        .map(|inst| ef1_audit(&mech, &[inst]))
                        .transpose()?
                        .is_some_and(|a| !a.ef1_violations.is_empty());
                    targeted_misses += usize::from(!hit);
                }
                for w in &audit.ef1_violations {
                    keep(&mut witnesses, &mech, Some(w));
                }
            }
        }
    }
    let mut detail = format!(
        "{vectors} quota vectors, {} verdict mismatches, {targeted_misses} targeted witnesses missed",
        mismatches.len()
    );
    if let Some(first) = mismatches.first() {
        detail.push_str(&format!("; first mismatch {first}"));
    }
    Ok(Body { passed: mismatches.is_empty() && targeted_misses == 0, detail, witnesses })
}

fn push_up() -> Result<Body> {
    let checker = Checker { seed: SEED, ..Checker::default() };
    let (mut mechanisms, mut failures) = (0, Vec::new());
    for (n, m) in [(2, 3), (3, 3)] {
        let class = lex(m)?;
        for q in enumerate_q(n, m, false) {
            let mech = Mechanism::from_quota_ordering(class.clone(), q)?;
            mechanisms += 1;
            for mode in [PushUpMode::Sampled { trials: 1000 }, PushUpMode::OwnBundleLex] {
                let report = checker.push_up_invariance(&mech, mode)?;
                if !report.passed() {
                    failures.push(report.to_string());
                }
            }
        }
    }
    let mut detail = format!("{mechanisms} mechanisms, sampled and own-bundle push-ups, {} failures", failures.len());
    if let Some(first) = failures.first() {
        detail.push_str(&format!("; first: {first}"));
    }
    Ok(Body::new(failures.is_empty(), detail))
}

fn cardinal_layer() -> Result<Body> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut domains = Vec::new();
    for m in 3..=5 {
        let domain = Arc::new(PreferenceClass::strict_additive(m)?);
        for n in 2..=3 {
            domains.push((n, m, domain.clone(), enumerate_q(n, m, false)));
        }
    }
    let (mut same_prefs, mut same_alloc) = (0, 0);
    let trials = 1000;
    for trial in 0..trials {
        let (n, m, domain, qs) = &domains[rng.gen_range(0..domains.len())];
        let mech = Mechanism::from_quota_ordering(domain.clone(), qs[rng.gen_range(0..qs.len())].clone())?;
        let base: Vec<AdditiveValuation> = (0..*n).map(|_| random_valuation(*m, &mut rng)).collect();
        let other: Vec<AdditiveValuation> = base
            .iter()
            .map(|v| {
                if trial % 2 == 0 {
                    v.scale(rational(rng.gen_range(1..=50), rng.gen_range(1..=50)))
                } else {
                    // integer subset sums differ by at least 1, and the shifts add up to less than 1/2
                    let shifted = v.values().iter().map(|x| x + rational(rng.gen_range(0..10), 1000)).collect();
                    AdditiveValuation::new(shifted)
                }
            })
            .collect::<Result<_>>()?;
        let (a, b) = (CardinalInstance::new(base)?, CardinalInstance::new(other)?);
        let induced_equal = a.profile()?.iter().zip(&b.profile()?).all(|(x, y)| x.order_identical(y));
        same_prefs += usize::from(induced_equal);
        same_alloc += usize::from(cardinal_apply(&mech, &a)? == cardinal_apply(&mech, &b)?);
    }
    Ok(Body::new(
        same_prefs == trials && same_alloc == trials,
        format!("{trials} pairs, {same_prefs} with equal induced preferences, {same_alloc} with equal allocations"),
    ))
}

//! `sqverify`: check mechanisms against the axioms, search for
//! characterization counterexamples, audit fairness and run the acceptance
//! scenarios. Reports are JSON; exit codes are 0 (pass), 1 (violation found)
//! and 2 (usage or limit error).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;
use serde_json::Value;

use serial_quota::fairness::{ef1_audit, generate_instances, rho_mms_audit, FairnessAudit, Family};
use serial_quota::mechanisms::{Mechanism, MechanismDescriptor};
use serial_quota::properties::{Checker, Property, PropertyReport};
use serial_quota::reproduce::{replay_criterion, run_all, run_criterion, CriterionOutcome};
use serial_quota::search::{
    enumerate_q, mutate_and_falsify, verify_characterization, CharacterizationReport, MutationReport,
};
use serial_quota::{ClassTag, PreferenceClass, Rational};

#[derive(Parser, Debug)]
#[command(name = "sqverify", version, about = "Verify serial quota mechanisms and their properties")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SQVERIFY_THREADS")]
    threads: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Leave timestamps and timings out of the report.
    #[arg(long, global = true)]
    no_timestamp: bool,
    /// Print a human readable summary to stderr.
    #[arg(long, global = true)]
    table: bool,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run property checks on one mechanism.
    Check(CheckArgs),
    /// Compare the mechanisms satisfying the axioms with the serial-quota family.
    Verify(VerifyArgs),
    /// Audit maximin share or EF1 guarantees on generated instances.
    Fairness(FairnessArgs),
    /// Run the acceptance scenarios.
    ReproducePaper(ReproduceArgs),
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Mechanism description: a JSON file or an inline JSON object.
    #[arg(long)]
    mech: String,
    /// Comma separated checks: truthful, nonbossy, neutral, partition, pareto, pushup, control, firstpick.
    #[arg(long, default_value = "truthful,nonbossy,neutral")]
    axioms: String,
    /// Preference class when the description has none.
    #[arg(long)]
    class: Option<ClassTag>,
    /// Number of goods when the description has none.
    #[arg(long)]
    m: Option<usize>,
    /// Report every witness instead of the first.
    #[arg(long)]
    all_witnesses: bool,
    /// Seed for sampled checks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum VerifyMode {
    Exhaustive,
    Mutate,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value = "lex")]
    class: ClassTag,
    #[arg(long, value_enum, default_value_t = VerifyMode::Exhaustive)]
    mode: VerifyMode,
    /// Allow mechanisms that leave goods unallocated.
    #[arg(long)]
    allocations: bool,
    /// Total mutants, spread over the partition serial-quota mechanisms.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Audit {
    Mms,
    Ef1,
}

#[derive(Args, Debug)]
struct FairnessArgs {
    #[arg(value_enum)]
    audit: Audit,
    /// Quotas in picking order, e.g. "1,3".
    #[arg(long, conflicts_with = "mech")]
    q: Option<String>,
    /// Picking order of the agents (default 0,1,...).
    #[arg(long, requires = "q")]
    p: Option<String>,
    /// Mechanism description instead of quotas.
    #[arg(long)]
    mech: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value = "adversarial")]
    family: Family,
    /// Random instances to generate.
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Required fraction of the maximin share, e.g. "1/2".
    #[arg(long)]
    rho: Option<String>,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    /// Comma separated criteria to run (default: all).
    #[arg(long)]
    criteria: Option<String>,
}

#[derive(Serialize)]
struct Envelope<T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<u64>,
    exit_code: u8,
    report: T,
}

#[derive(Serialize)]
struct CheckReport {
    mechanism: MechanismDescriptor,
    results: Vec<PropertyReport>,
}

#[derive(Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
enum VerifyReport {
    Exhaustive(Box<CharacterizationReport>),
    Mutate { trials: usize, mutants: usize, survivors: usize, bases: Vec<MutationReport> },
}

#[derive(Serialize)]
struct FairnessReport {
    audit: &'static str,
    family: Family,
    count: usize,
    seed: u64,
    #[serde(flatten)]
    result: FairnessAudit,
}

#[derive(Serialize)]
struct ReproduceReport {
    passed: usize,
    total: usize,
    criteria: Vec<CriterionOutcome>,
}

/// A finished command: exit code, report and summary lines.
struct Outcome {
    command: &'static str,
    code: u8,
    report: Value,
    summary: Vec<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    let outcome = match &cli.command {
        Command::Check(args) => check(args)?,
        Command::Verify(args) => verify(args)?,
        Command::Fairness(args) => fairness(args)?,
        Command::ReproducePaper(args) => reproduce(args)?,
    };
    emit(cli, outcome)
}

fn emit(cli: &Cli, outcome: Outcome) -> anyhow::Result<u8> {
    let timestamp =
        (!cli.no_timestamp).then(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
    let mut report = outcome.report;
    if cli.no_timestamp {
        strip_timings(&mut report);
    }
    let envelope = Envelope {
        tool: "sqverify",
        version: env!("CARGO_PKG_VERSION"),
        command: outcome.command,
        timestamp,
        exit_code: outcome.code,
        report,
    };
    let json = serde_json::to_string_pretty(&envelope)?;
    match &cli.out {
        Some(path) => {
            fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
            info!("report written to {}", path.display());
        }
        None => println!("{json}"),
    }
    if cli.table || cli.out.is_some() {
        for line in &outcome.summary {
            eprintln!("{line}");
        }
    }
    Ok(outcome.code)
}

fn strip_timings(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("elapsed_ms");
            map.values_mut().for_each(strip_timings);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timings),
        _ => {}
    }
}

fn load_descriptor(source: &str) -> anyhow::Result<MechanismDescriptor> {
    let text = if source.trim_start().starts_with('{') {
        source.to_string()
    } else {
        fs::read_to_string(Path::new(source)).with_context(|| format!("reading mechanism file {source}"))?
    };
    serde_json::from_str(&text).with_context(|| format!("parsing mechanism description from {source}"))
}

fn parse_property(name: &str) -> anyhow::Result<Property> {
    let key: String = name.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
    Ok(match key.as_str() {
        "truthful" => Property::Truthful,
        "nonbossy" => Property::NonBossy,
        "neutral" => Property::Neutral,
        "partition" => Property::Partition,
        "pareto" | "paretoefficient" => Property::ParetoEfficient,
        "pushup" | "pushupinvariance" => Property::PushUpInvariance,
        "control" | "controlclaim" => Property::ControlClaim,
        "firstpick" | "firstpickindependence" => Property::FirstPickIndependence,
        _ => bail!(
            "unknown check `{name}`; expected truthful, nonbossy, neutral, partition, pareto, pushup, control or firstpick"
        ),
    })
}

fn parse_list(s: &str, what: &str) -> anyhow::Result<Vec<usize>> {
    s.split(',')
        .map(|x| x.trim().parse::<usize>().with_context(|| format!("`{x}` in {what} is not a non-negative integer")))
        .collect()
}

fn parse_rational(s: &str) -> anyhow::Result<Rational> {
    let parse = |x: &str| x.trim().parse::<i64>().with_context(|| format!("`{s}` is not a fraction like 1/2"));
    let r = match s.split_once('/') {
        Some((a, b)) => {
            let den = parse(b)?;
            if den == 0 {
                bail!("`{s}` has a zero denominator");
            }
            Rational::new(parse(a)?, den)
        }
        None => Rational::from_integer(parse(s)?),
    };
    if r < Rational::from_integer(0) {
        bail!("rho must be non-negative");
    }
    Ok(r)
}

fn check(args: &CheckArgs) -> anyhow::Result<Outcome> {
    let properties = args.axioms.split(',').map(parse_property).collect::<anyhow::Result<Vec<_>>>()?;
    let mech = load_descriptor(&args.mech)?.build(args.class, args.m)?;
    let checker = Checker { collect_all: args.all_witnesses, seed: args.seed, ..Checker::default() };
    let mut results = Vec::new();
    for property in properties {
        info!("checking {property} on {}", mech.name());
        results.push(checker.check(&mech, property)?);
    }
    let code = if results.iter().all(PropertyReport::passed) { 0 } else { 1 };
    let summary = results.iter().map(|r| r.to_string()).collect();
    let report = CheckReport { mechanism: MechanismDescriptor::from(&mech), results };
    Ok(Outcome { command: "check", code, report: serde_json::to_value(report)?, summary })
}

fn verify(args: &VerifyArgs) -> anyhow::Result<Outcome> {
    let class = Arc::new(PreferenceClass::new(args.class, args.m)?);
    match args.mode {
        VerifyMode::Exhaustive => {
            let report = verify_characterization(args.n, class, !args.allocations)?;
            let code = if report.sets_equal() { 0 } else { 1 };
            let summary = vec![format!(
                "{} tables enumerated, {} satisfy the axioms, serial-quota family of {}: {:?}",
                report.tables_enumerated,
                report.satisfying_mechanisms.len(),
                report.serial_quota_family.len(),
                report.verdict
            )];
            Ok(Outcome {
                command: "verify",
                code,
                report: serde_json::to_value(VerifyReport::Exhaustive(Box::new(report)))?,
                summary,
            })
        }
        VerifyMode::Mutate => {
            if args.allocations {
                bail!("mutation mode starts from partition mechanisms; drop --allocations");
            }
            let bases = enumerate_q(args.n, args.m, true);
            let per_base = args.trials.div_ceil(bases.len().max(1));
            let reports = bases
                .iter()
                .enumerate()
                .map(|(k, base)| mutate_and_falsify(base, class.clone(), per_base, args.seed.wrapping_add(k as u64)))
                .collect::<serial_quota::Result<Vec<_>>>()?;
            let mutants = reports.iter().map(|r| r.mutants.len()).sum();
            let survivors = reports.iter().map(|r| r.survivors).sum();
            let code = if survivors == 0 { 0 } else { 1 };
            let summary = vec![format!("{mutants} mutants over {} bases, {survivors} survivors", bases.len())];
            let report = VerifyReport::Mutate { trials: args.trials, mutants, survivors, bases: reports };
            Ok(Outcome { command: "verify", code, report: serde_json::to_value(report)?, summary })
        }
    }
}

fn fairness_mechanism(args: &FairnessArgs) -> anyhow::Result<Mechanism> {
    if let Some(q) = &args.q {
        let q = parse_list(q, "--q")?;
        let p = match &args.p {
            Some(p) => parse_list(p, "--p")?,
            None => (0..q.len()).collect(),
        };
        if let Some(n) = args.n.filter(|&n| n != q.len()) {
            bail!("--n {n} does not match the {} quotas in --q", q.len());
        }
        let m = args.m.unwrap_or_else(|| q.iter().sum());
        let domain = Arc::new(PreferenceClass::strict_additive(m)?);
        return Ok(Mechanism::serial_quota(domain, &q, &p)?);
    }
    let Some(source) = &args.mech else { bail!("give the mechanism with --q or --mech") };
    let mech = load_descriptor(source)?.build(Some(ClassTag::StrictAdditive), args.m)?;
    if let Some(n) = args.n.filter(|&n| n != mech.n()) {
        bail!("--n {n} does not match the mechanism's {} agents", mech.n());
    }
    Ok(mech)
}

fn fairness(args: &FairnessArgs) -> anyhow::Result<Outcome> {
    let mech = fairness_mechanism(args)?;
    let (n, m) = (mech.n(), mech.m());
    let instances = generate_instances(args.family, n, m, args.count, args.seed, mech.quota_ordering());
    if instances.is_empty() {
        bail!("the {} family produced no instances for {}", args.family, mech.name());
    }
    info!("auditing {} on {} instances", mech.name(), instances.len());
    let (audit, result) = match args.audit {
        Audit::Mms => {
            let rho = args.rho.as_deref().map(parse_rational).transpose()?;
            ("mms", rho_mms_audit(&mech, &instances, rho)?)
        }
        Audit::Ef1 => {
            if args.rho.is_some() {
                bail!("--rho applies to the mms audit only");
            }
            ("ef1", ef1_audit(&mech, &instances)?)
        }
    };
    let violations = result.ef1_violations.len() + result.shortfalls.len();
    let code = if violations == 0 { 0 } else { 1 };
    let mut summary = vec![format!("{} instances audited, {violations} violations", result.instances_tested)];
    if let Some(w) = &result.worst_ratio {
        summary.push(format!("worst ratio {}/{} ({:.6})", w.num, w.den, w.decimal));
    }
    summary.extend(result.witnesses().take(3).map(|w| w.to_string()));
    let report = FairnessReport { audit, family: args.family, count: args.count, seed: args.seed, result };
    Ok(Outcome { command: "fairness", code, report: serde_json::to_value(report)?, summary })
}

fn reproduce(args: &ReproduceArgs) -> anyhow::Result<Outcome> {
    let criteria = match &args.criteria {
        None => run_all(|o| eprintln!("{o}"))?,
        Some(list) => {
            let mut ids = parse_list(list, "--criteria")?;
            ids.sort_unstable();
            ids.dedup();
            let mut done: Vec<CriterionOutcome> = Vec::new();
            for id in ids {
                let outcome = if id == 10 && (2..=7).all(|k| done.iter().any(|o| o.id == k)) {
                    replay_criterion(&done)
                } else {
                    run_criterion(id)?
                };
                eprintln!("{outcome}");
                done.push(outcome);
            }
            done
        }
    };
    let passed = criteria.iter().filter(|o| o.passed).count();
    let total = criteria.len();
    let code = if passed == total { 0 } else { 1 };
    let summary = vec![format!("{passed}/{total} criteria passed")];
    let report = ReproduceReport { passed, total, criteria };
    Ok(Outcome { command: "reproduce-paper", code, report: serde_json::to_value(report)?, summary })
}

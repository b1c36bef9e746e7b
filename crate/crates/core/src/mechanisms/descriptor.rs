use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Allocation, Mechanism, Rule};
use crate::error::{Error, Result};
use crate::goods::GoodSet;
use crate::prefs::{ClassDescriptor, ClassTag, PreferenceClass};

/// The rule part of a mechanism's JSON description.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleDescriptor {
    SerialQuota {
        q: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<Vec<usize>>,
    },
    Table {
        alloc: Vec<Vec<GoodSet>>,
    },
    RoundRobin,
    CounterNonTruthful,
    CounterBossy,
    CounterNonNeutral {
        a: usize,
        b: usize,
    },
}

/// A class given either by its tag alone or in full.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassSpec {
    Tag(ClassTag),
    Full(ClassDescriptor),
}

/// JSON description of a mechanism, e.g.
/// `{"kind":"serial_quota","q":[1,2],"p":[0,1],"m":3,"class":"lex"}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MechanismDescriptor {
    #[serde(flatten)]
    pub rule: RuleDescriptor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<ClassSpec>,
}

impl MechanismDescriptor {
    pub fn new(rule: RuleDescriptor) -> MechanismDescriptor {
        MechanismDescriptor { rule, n: None, m: None, class: None }
    }

    /// Builds the mechanism. `class` and `m` fill in whatever the
    /// description leaves open; the class defaults to lexicographic and
    /// serial-quota mechanisms default to `m = Σq`.
    pub fn build(&self, class: Option<ClassTag>, m: Option<usize>) -> Result<Mechanism> {
        let domain = Arc::new(match &self.class {
            Some(ClassSpec::Full(d)) => d.build()?,
            spec => {
                let tag = match spec {
                    Some(ClassSpec::Tag(t)) => *t,
                    _ => class.unwrap_or(ClassTag::Lexicographic),
                };
                let m = self.m.or(m).or(match &self.rule {
                    RuleDescriptor::SerialQuota { q, .. } => Some(q.iter().sum()),
                    _ => None,
                });
                let m = m.ok_or_else(|| Error::Precondition("the number of goods `m` is not given".into()))?;
                PreferenceClass::new(tag, m)?
            }
        });
        let n = self.n.or(match &self.rule {
            RuleDescriptor::SerialQuota { q, .. } => Some(q.len()),
            RuleDescriptor::Table { alloc } => alloc.first().map(Vec::len),
            _ => None,
        });
        let n = n.ok_or_else(|| Error::Precondition("the number of agents `n` is not given".into()))?;
        match &self.rule {
            RuleDescriptor::SerialQuota { q, p } => {
                if q.len() != n {
                    return Err(Error::InvalidOrdering(format!("{} quotas for {n} agents", q.len())));
                }
                let p = p.clone().unwrap_or_else(|| (0..n).collect());
                Mechanism::serial_quota(domain, q, &p)
            }
            RuleDescriptor::Table { alloc } => {
                let cells = alloc.iter().map(|b| Allocation::new(b.clone())).collect::<Result<Vec<_>>>()?;
                Mechanism::table(n, domain, cells)
            }
            RuleDescriptor::RoundRobin => Mechanism::round_robin(n, domain),
            RuleDescriptor::CounterNonTruthful => Mechanism::counter_non_truthful(n, domain),
            RuleDescriptor::CounterBossy => Mechanism::counter_bossy(n, domain),
            RuleDescriptor::CounterNonNeutral { a, b } => Mechanism::counter_non_neutral(n, domain, *a, *b),
        }
    }
}

impl From<&Mechanism> for MechanismDescriptor {
    fn from(mech: &Mechanism) -> Self {
        let rule = match mech.rule() {
            Rule::SerialQuota(sq) => RuleDescriptor::SerialQuota { q: sq.q().to_vec(), p: Some(sq.p().to_vec()) },
            Rule::Table(cells) => RuleDescriptor::Table { alloc: cells.iter().map(|a| a.bundles().to_vec()).collect() },
            Rule::RoundRobin => RuleDescriptor::RoundRobin,
            Rule::CounterNonTruthful => RuleDescriptor::CounterNonTruthful,
            Rule::CounterBossy => RuleDescriptor::CounterBossy,
            Rule::CounterNonNeutral { a, b } => RuleDescriptor::CounterNonNeutral { a: *a, b: *b },
        };
        MechanismDescriptor {
            rule,
            n: Some(mech.n()),
            m: Some(mech.m()),
            class: Some(ClassSpec::Full(ClassDescriptor::from(mech.domain().as_ref()))),
        }
    }
}

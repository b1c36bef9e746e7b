use serde::{Deserialize, Serialize};

use super::{Allocation, Mechanism};
use crate::error::{Error, Result};
use crate::goods::check_universe;
use crate::prefs::{AdditiveStrict, AdditiveValuation, Preference, Rational};

/// One additive valuation per agent over a common set of goods.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance")]
pub struct CardinalInstance {
    n: usize,
    m: usize,
    valuations: Vec<AdditiveValuation>,
}

#[derive(Deserialize)]
struct RawInstance {
    n: Option<usize>,
    m: Option<usize>,
    valuations: Vec<AdditiveValuation>,
}

impl TryFrom<RawInstance> for CardinalInstance {
    type Error = Error;

    fn try_from(r: RawInstance) -> Result<Self> {
        let inst = CardinalInstance::new(r.valuations)?;
        if r.n.is_some_and(|n| n != inst.n) || r.m.is_some_and(|m| m != inst.m) {
            return Err(Error::InvalidPreference(format!(
                "declared size ({:?}, {:?}) does not match {} valuations over {} goods",
                r.n, r.m, inst.n, inst.m
            )));
        }
        Ok(inst)
    }
}

impl CardinalInstance {
    pub fn new(valuations: Vec<AdditiveValuation>) -> Result<CardinalInstance> {
        let m = valuations.first().map_or(0, AdditiveValuation::m);
        check_universe(m)?;
        if let Some((i, v)) = valuations.iter().enumerate().find(|(_, v)| v.m() != m) {
            return Err(Error::InvalidPreference(format!("agent {i} values {} goods, agent 0 values {m}", v.m())));
        }
        Ok(CardinalInstance { n: valuations.len(), m, valuations })
    }

    pub fn from_integers(rows: &[Vec<i64>]) -> Result<CardinalInstance> {
        CardinalInstance::new(rows.iter().map(|r| AdditiveValuation::from_integers(r)).collect::<Result<_>>()?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn valuations(&self) -> &[AdditiveValuation] {
        &self.valuations
    }

    pub fn valuation(&self, agent: usize) -> &AdditiveValuation {
        &self.valuations[agent]
    }

    /// Every valuation as a strict preference, or the first tie found.
    pub fn strict(&self) -> Result<Vec<AdditiveStrict>> {
        self.valuations.iter().cloned().map(AdditiveStrict::new).collect()
    }

    /// The induced ordinal profile.
    pub fn profile(&self) -> Result<Vec<Preference>> {
        Ok(self.strict()?.into_iter().map(Preference::additive).collect())
    }

    /// `v_i(A_i)` for every agent.
    pub fn utilities(&self, alloc: &Allocation) -> Vec<Rational> {
        self.valuations.iter().zip(alloc.bundles()).map(|(v, b)| v.value(*b)).collect()
    }
}

/// Runs an ordinal mechanism on the preferences induced by the valuations.
pub fn cardinal_apply(mech: &Mechanism, inst: &CardinalInstance) -> Result<Allocation> {
    if inst.n() != mech.n() || inst.m() != mech.m() {
        return Err(Error::DomainError(format!(
            "instance has {} agents and {} goods, mechanism expects {} and {}",
            inst.n(),
            inst.m(),
            mech.n(),
            mech.m()
        )));
    }
    mech.apply(&inst.profile()?)
}

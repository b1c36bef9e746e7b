//! Additive valuations over goods with exact rational values.

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::goods::{check_universe, GoodSet};

/// Exact rational number used for every value, share and ratio.
pub type Rational = Ratio<i64>;

pub fn rational(num: i64, den: i64) -> Rational {
    Ratio::new(num, den)
}

/// JSON form of a rational: `[numerator, denominator]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalRepr(pub i64, pub i64);

impl From<Rational> for RationalRepr {
    fn from(r: Rational) -> Self {
        RationalRepr(*r.numer(), *r.denom())
    }
}

impl TryFrom<RationalRepr> for Rational {
    type Error = Error;

    fn try_from(r: RationalRepr) -> Result<Self> {
        if r.1 == 0 {
            return Err(Error::InvalidPreference("zero denominator".into()));
        }
        Ok(Ratio::new(r.0, r.1))
    }
}

/// Serde adapter rendering a rational as `{"num":..,"den":..,"decimal":..}`.
pub mod rational_report {
    use super::Rational;
    use serde::ser::SerializeStruct;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Rational", 3)?;
        st.serialize_field("num", r.numer())?;
        st.serialize_field("den", r.denom())?;
        st.serialize_field("decimal", &(*r.numer() as f64 / *r.denom() as f64))?;
        st.end()
    }
}

pub fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// An additive valuation `v(S) = Σ_{x∈S} v({x})` with non-negative values.
/// Ties between subsets are allowed here.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<RationalRepr>", into = "Vec<RationalRepr>")]
pub struct AdditiveValuation {
    values: Vec<Rational>,
}

impl AdditiveValuation {
    pub fn new(values: Vec<Rational>) -> Result<AdditiveValuation> {
        check_universe(values.len())?;
        if let Some(v) = values.iter().find(|v| v.is_negative()) {
            return Err(Error::InvalidPreference(format!("negative value {v}")));
        }
        Ok(AdditiveValuation { values })
    }

    pub fn from_integers(values: &[i64]) -> Result<AdditiveValuation> {
        AdditiveValuation::new(values.iter().map(|&v| Rational::from_integer(v)).collect())
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn value(&self, set: GoodSet) -> Rational {
        set.iter().fold(Rational::zero(), |acc, g| acc + self.values[g])
    }

    /// Values rescaled to integers over their least common denominator.
    pub fn scaled(&self) -> (Vec<i128>, i128) {
        let den = self.values.iter().fold(1i64, |acc, v| acc.lcm(v.denom()));
        let nums = self.values.iter().map(|v| *v.numer() as i128 * (den / v.denom()) as i128).collect();
        (nums, den as i128)
    }

    /// Multiplies every value by `c`.
    pub fn scale(&self, c: Rational) -> Result<AdditiveValuation> {
        AdditiveValuation::new(self.values.iter().map(|v| v * c).collect())
    }

    /// `values'[π(i)] = values[i]`.
    pub fn permute(&self, pi: &crate::goods::Permutation) -> AdditiveValuation {
        let mut values = vec![Rational::zero(); self.values.len()];
        for (i, v) in self.values.iter().enumerate() {
            values[pi.image(i)] = *v;
        }
        AdditiveValuation { values }
    }
}

impl TryFrom<Vec<RationalRepr>> for AdditiveValuation {
    type Error = Error;

    fn try_from(v: Vec<RationalRepr>) -> Result<Self> {
        AdditiveValuation::new(v.into_iter().map(Rational::try_from).collect::<Result<_>>()?)
    }
}

impl From<AdditiveValuation> for Vec<RationalRepr> {
    fn from(v: AdditiveValuation) -> Self {
        v.values.into_iter().map(RationalRepr::from).collect()
    }
}

/// An additive valuation whose `2^m` subset sums are pairwise distinct, so
/// that it induces a strict preference.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AdditiveStrict {
    valuation: AdditiveValuation,
    scaled: Vec<i128>,
}

impl AdditiveStrict {
    pub fn new(valuation: AdditiveValuation) -> Result<AdditiveStrict> {
        let (scaled, _) = valuation.scaled();
        let m = valuation.m();
        let mut sums: Vec<(i128, GoodSet)> = GoodSet::all(m).map(|s| (s.iter().map(|g| scaled[g]).sum(), s)).collect();
        sums.sort_unstable();
        if let Some(w) = sums.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::TieDetected(w[0].1, w[1].1));
        }
        Ok(AdditiveStrict { valuation, scaled })
    }

    pub fn from_values(values: Vec<Rational>) -> Result<AdditiveStrict> {
        AdditiveStrict::new(AdditiveValuation::new(values)?)
    }

    pub fn from_integers(values: &[i64]) -> Result<AdditiveStrict> {
        AdditiveStrict::new(AdditiveValuation::from_integers(values)?)
    }

    pub fn m(&self) -> usize {
        self.valuation.m()
    }

    pub fn valuation(&self) -> &AdditiveValuation {
        &self.valuation
    }

    pub fn values(&self) -> &[Rational] {
        self.valuation.values()
    }

    pub fn value(&self, set: GoodSet) -> Rational {
        self.valuation.value(set)
    }

    /// Subset value on the common-denominator integer scale.
    pub(crate) fn scaled_value(&self, set: GoodSet) -> i128 {
        set.iter().map(|g| self.scaled[g]).sum()
    }

    pub(crate) fn scaled_good(&self, good: usize) -> i128 {
        self.scaled[good]
    }
}

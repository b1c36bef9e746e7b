use itertools::Itertools;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{scan, Checker, Property, PropertyReport, Tabulated, Witness};
use crate::error::{Error, Result};
use crate::goods::GoodSet;
use crate::mechanisms::Mechanism;
use crate::prefs::Preference;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PushUpMode {
    /// Random profiles, each agent moved to a random push-up for her bundle.
    Sampled { trials: usize },
    /// Every profile with every combination of lexicographic preferences that
    /// rank the agent's own bundle first.
    OwnBundleLex,
    /// Every profile with every combination of push-ups in the class.
    Exhaustive,
}

/// Whether the mechanism is truthful and non-bossy, so that outputs must be
/// invariant under push-ups.
pub fn push_up_invariance_guaranteed(mech: &Mechanism) -> Result<bool> {
    let c = Checker::default();
    Ok(c.truthful(mech)?.passed() && c.non_bossy(mech)?.passed())
}

impl Checker {
    pub fn push_up_invariance(&self, mech: &Mechanism, mode: PushUpMode) -> Result<PropertyReport> {
        let t = Tabulated::new(mech)?;
        let class = t.class();
        let (k, m, n) = (class.len(), mech.m(), mech.n());
        // choices[s][c]: members that may replace member c when the agent holds s
        let choices: Vec<Vec<Vec<usize>>> = match mode {
            PushUpMode::OwnBundleLex => GoodSet::all(m)
                .map(|s| {
                    let rest = s.complement(m);
                    let members = s
                        .iter()
                        .permutations(s.len())
                        .cartesian_product(rest.iter().permutations(rest.len()).collect_vec())
                        .map(|(mut head, tail)| {
                            head.extend(tail);
                            class.index_of(&Preference::lexicographic(head)?)
                        })
                        .collect::<Result<Vec<usize>>>()?;
                    (0..k)
                        .map(|c| {
                            if members.iter().all(|&d| class.get(d).is_push_up_of(class.get(c), s)) {
                                Ok(members.clone())
                            } else {
                                Err(Error::Precondition(format!("lexicographic order led by {s} is not a push-up")))
                            }
                        })
                        .collect()
                })
                .collect::<Result<_>>()?,
            _ => GoodSet::all(m)
                .map(|s| {
                    (0..k).map(|c| (0..k).filter(|&d| class.get(d).is_push_up_of(class.get(c), s)).collect()).collect()
                })
                .collect(),
        };
        let options = |idx: usize| -> Vec<&Vec<usize>> {
            let alloc = &t.table[idx];
            (0..n).map(|i| &choices[alloc.bundle(i).0 as usize][t.space.digit(idx, i)]).collect()
        };
        let witness = |idx: usize, pushed: &[usize]| -> Option<Witness> {
            let other = t.space.index(pushed);
            (t.table[other] != t.table[idx]).then(|| Witness::PushUp {
                profile: t.profile(idx),
                pushed: t.profile(other),
                before: t.table[idx].clone(),
                after: t.table[other].clone(),
            })
        };
        let (found, checked) = match mode {
            PushUpMode::Sampled { trials } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let mut all = Vec::new();
                for _ in 0..trials {
                    let idx = rng.gen_range(0..t.space.count());
                    let pushed: Vec<usize> = options(idx).into_iter().map(|o| o[rng.gen_range(0..o.len())]).collect();
                    if let Some(w) = witness(idx, &pushed) {
                        all.push(w);
                        if !self.collect_all {
                            break;
                        }
                    }
                }
                let first = all.first().cloned();
                if !self.collect_all {
                    all.clear();
                }
                ((first, all), trials)
            }
            _ => {
                let found = scan(t.space.count(), self.collect_all, |idx| {
                    options(idx)
                        .into_iter()
                        .map(|o| o.iter().copied())
                        .multi_cartesian_product()
                        .find_map(|pushed| witness(idx, &pushed))
                });
                (found, t.space.count())
            }
        };
        Ok(PropertyReport::new(Property::PushUpInvariance, mech, found, checked as u64))
    }
}

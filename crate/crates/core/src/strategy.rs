//! Reference social learning heuristics.
//!
//! A strategy combines a social option (best imitator, conformist, random
//! imitator, or none) with an individual learning variant. Candidates are
//! adopted only when their payoff is strictly greater than the current one.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{NkLandscape, Solution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Social {
    BestImitator,
    Conformist,
    RandomImitator,
    PureIndividualist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Individual {
    None,
    SingleBitFlip,
    ProbabilisticFlip,
    RandomResample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StrategySpec {
    social: Social,
    individual: Individual,
}

/// The twelve reference baselines, in canonical order.
pub const BASELINES: [&str; 12] = [
    "BI", "BI-I", "BI-P", "BI-R", "CF", "CF-I", "CF-P", "CF-R", "PI-I", "PI-P", "PI-R", "RI",
];

impl StrategySpec {
    pub fn new(social: Social, individual: Individual) -> Result<Self> {
        if social == Social::PureIndividualist && individual == Individual::None {
            return Err(Error::invalid("PI without an individual learning variant is a no-op"));
        }
        Ok(StrategySpec { social, individual })
    }

    pub fn social(&self) -> Social {
        self.social
    }

    pub fn individual(&self) -> Individual {
        self.individual
    }

    pub fn baselines() -> Vec<StrategySpec> {
        BASELINES.iter().map(|s| s.parse().unwrap()).collect()
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.social {
            Social::BestImitator => "BI",
            Social::Conformist => "CF",
            Social::RandomImitator => "RI",
            Social::PureIndividualist => "PI",
        };
        let i = match self.individual {
            Individual::None => "",
            Individual::SingleBitFlip => "-I",
            Individual::ProbabilisticFlip => "-P",
            Individual::RandomResample => "-R",
        };
        write!(f, "{s}{i}")
    }
}

impl FromStr for StrategySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, tail) = match s.split_once('-') {
            Some((h, t)) => (h, Some(t)),
            None => (s, None),
        };
        let social = match head {
            "BI" => Social::BestImitator,
            "CF" => Social::Conformist,
            "RI" => Social::RandomImitator,
            "PI" => Social::PureIndividualist,
            _ => return Err(Error::invalid(format!("unknown strategy {s:?}"))),
        };
        let individual = match tail {
            None => Individual::None,
            Some("I") => Individual::SingleBitFlip,
            Some("P") => Individual::ProbabilisticFlip,
            Some("R") => Individual::RandomResample,
            Some(_) => return Err(Error::invalid(format!("unknown strategy {s:?}"))),
        };
        StrategySpec::new(social, individual)
    }
}

impl Serialize for StrategySpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StrategySpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Solution and payoff of one observed neighbor.
pub type Observed = (Solution, f64);

/// The socially learned candidate, if the heuristic yields one.
pub fn social_option<R: Rng + ?Sized>(
    spec: &StrategySpec,
    sample: &[Observed],
    rng: &mut R,
) -> Result<Option<Solution>> {
    if sample.is_empty() {
        return Err(Error::invalid("empty neighbor sample"));
    }
    Ok(match spec.social {
        Social::PureIndividualist => None,
        Social::RandomImitator => Some(sample[rng.gen_range(0..sample.len())].0),
        Social::BestImitator => {
            let best = sample.iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max);
            let tied = sample.iter().filter(|o| o.1 == best).count();
            let pick = if tied == 1 { 0 } else { rng.gen_range(0..tied) };
            sample.iter().filter(|o| o.1 == best).nth(pick).map(|o| o.0)
        }
        Social::Conformist => conformist(sample, rng),
    })
}

fn conformist<R: Rng + ?Sized>(sample: &[Observed], rng: &mut R) -> Option<Solution> {
    // distinct solutions with multiplicities, in first-seen order
    let mut counts: Vec<(Solution, usize)> = Vec::with_capacity(sample.len());
    for (s, _) in sample {
        match counts.iter_mut().find(|(t, _)| t == s) {
            Some(c) => c.1 += 1,
            None => counts.push((*s, 1)),
        }
    }
    let top = counts.iter().map(|c| c.1).max().unwrap_or(0);
    if counts.len() > 1 && counts.iter().all(|c| c.1 == top) {
        return None;
    }
    let modes: Vec<Solution> = counts.iter().filter(|c| c.1 == top).map(|c| c.0).collect();
    Some(if modes.len() == 1 {
        modes[0]
    } else {
        modes[rng.gen_range(0..modes.len())]
    })
}

/// The individually learned candidate for the given variant.
pub fn individual_option<R: Rng + ?Sized>(
    variant: Individual,
    current: &Solution,
    rng: &mut R,
) -> Option<Solution> {
    let n = current.len();
    match variant {
        Individual::None => None,
        Individual::SingleBitFlip => Some(current.flipped(rng.gen_range(0..n))),
        Individual::ProbabilisticFlip => {
            let p = 1.0 / n as f64;
            let mut mask = 0u32;
            for _ in 0..n {
                mask = (mask << 1) | (rng.gen::<f64>() < p) as u32;
            }
            Some(current.xor_code(mask))
        }
        Individual::RandomResample => Some(Solution::random(n, rng)),
    }
}

/// One adopt-if-better update: social option first, individual option as fallback.
pub fn strategy_step<R: Rng + ?Sized>(
    spec: &StrategySpec,
    current: Observed,
    sample: &[Observed],
    landscape: &NkLandscape,
    rng: &mut R,
) -> Result<Observed> {
    let n = landscape.n_loci();
    for s in std::iter::once(&current.0).chain(sample.iter().map(|o| &o.0)) {
        if s.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: s.len(),
            });
        }
    }
    if let Some(cand) = social_option(spec, sample, rng)? {
        let p = landscape.payoff_unchecked(&cand);
        if p > current.1 {
            return Ok((cand, p));
        }
    }
    if let Some(cand) = individual_option(spec.individual, &current.0, rng) {
        let p = landscape.payoff_unchecked(&cand);
        if p > current.1 {
            return Ok((cand, p));
        }
    }
    Ok(current)
}

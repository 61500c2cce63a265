//! Observation encoding shared by training, evaluation and probes.
//!
//! Row 0 is the observing agent; rows 1..=S are the sampled neighbors. Each
//! row holds the solution bits followed by the enabled scalar features in a
//! fixed order: payoff / 100, self indicator, normalized competition rank,
//! neighbor frequency of the row's solution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::PAYOFF_SCALE;
use crate::strategy::Observed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureFlags {
    pub include_payoff: bool,
    pub include_self_indicator: bool,
    pub include_ranking: bool,
    pub include_frequency: bool,
}

impl Default for FeatureFlags {
    fn default() -> Self {
        FeatureFlags::PIRF
    }
}

impl FeatureFlags {
    pub const PIRF: FeatureFlags = FeatureFlags {
        include_payoff: true,
        include_self_indicator: true,
        include_ranking: true,
        include_frequency: true,
    };
    pub const PIR: FeatureFlags = FeatureFlags {
        include_frequency: false,
        ..FeatureFlags::PIRF
    };
    pub const PI: FeatureFlags = FeatureFlags {
        include_ranking: false,
        include_frequency: false,
        ..FeatureFlags::PIRF
    };

    pub fn preset(name: &str) -> Option<FeatureFlags> {
        match name {
            "PIRF" => Some(Self::PIRF),
            "PIR" => Some(Self::PIR),
            "PI" => Some(Self::PI),
            _ => None,
        }
    }

    /// Number of scalar columns after the solution bits.
    pub fn n_scalar(&self) -> usize {
        [
            self.include_payoff,
            self.include_self_indicator,
            self.include_ranking,
            self.include_frequency,
        ]
        .iter()
        .filter(|&&b| b)
        .count()
    }

    pub fn width(&self, n_loci: usize) -> usize {
        n_loci + self.n_scalar()
    }

    /// Column of the payoff feature, if enabled.
    pub fn payoff_column(&self, n_loci: usize) -> Option<usize> {
        self.include_payoff.then_some(n_loci)
    }

    /// Column of the self indicator, if enabled.
    pub fn indicator_column(&self, n_loci: usize) -> Option<usize> {
        self.include_self_indicator
            .then_some(n_loci + self.include_payoff as usize)
    }
}

/// An `(S + 1) x width` feature matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    n_loci: usize,
    flags: FeatureFlags,
    rows: usize,
    data: Vec<f64>,
}

impl ObservationMatrix {
    pub fn n_loci(&self) -> usize {
        self.n_loci
    }

    pub fn flags(&self) -> FeatureFlags {
        self.flags
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.flags.width(self.n_loci)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.width();
        &self.data[r * w..(r + 1) * w]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Builds a matrix from raw rows (used by tests and permutation checks).
    pub fn from_rows(n_loci: usize, flags: FeatureFlags, rows: &[Vec<f64>]) -> Result<Self> {
        let w = flags.width(n_loci);
        if rows.is_empty() {
            return Err(Error::invalid("observation needs at least one row"));
        }
        let mut data = Vec::with_capacity(rows.len() * w);
        for r in rows {
            if r.len() != w {
                return Err(Error::DimensionMismatch {
                    expected: w,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(ObservationMatrix {
            n_loci,
            flags,
            rows: rows.len(),
            data,
        })
    }

    /// Same observation with rows reordered: row `i` of the result is row `perm[i]` here.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let rows: Vec<Vec<f64>> = perm.iter().map(|&p| self.row(p).to_vec()).collect();
        Self::from_rows(self.n_loci, self.flags, &rows).expect("same shape")
    }

    /// Index of the row flagged as self, if the indicator column exists.
    pub fn self_row(&self) -> Option<usize> {
        let c = self.flags.indicator_column(self.n_loci)?;
        (0..self.rows).find(|&r| self.row(r)[c] == 1.0)
    }

    /// Payoff of a row on the 0..=100 scale, if the payoff column exists.
    pub fn payoff(&self, r: usize) -> Option<f64> {
        self.flags
            .payoff_column(self.n_loci)
            .map(|c| self.row(r)[c] * PAYOFF_SCALE)
    }

    pub fn bits(&self, r: usize) -> &[f64] {
        &self.row(r)[..self.n_loci]
    }
}

/// Encodes an agent's view of itself and its sampled neighbors.
pub fn build_observation(me: Observed, neighbors: &[Observed], flags: FeatureFlags) -> Result<ObservationMatrix> {
    let s = neighbors.len();
    if s == 0 {
        return Err(Error::invalid("observation needs at least one neighbor"));
    }
    let n = me.0.len();
    let w = flags.width(n);
    let mut data = Vec::with_capacity((s + 1) * w);
    let all = || std::iter::once(&me).chain(neighbors.iter());
    for (r, (sol, pay)) in all().enumerate() {
        if sol.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: sol.len(),
            });
        }
        for i in 0..n {
            data.push(sol.bit(i) as f64);
        }
        if flags.include_payoff {
            data.push(pay / PAYOFF_SCALE);
        }
        if flags.include_self_indicator {
            data.push(if r == 0 { 1.0 } else { 0.0 });
        }
        if flags.include_ranking {
            // competition ranking: 1 + number of strictly better rows
            let better = all().filter(|o| o.1 > *pay).count();
            data.push(better as f64 / s as f64);
        }
        if flags.include_frequency {
            let same = neighbors.iter().filter(|o| o.0 == *sol).count();
            data.push(same as f64 / s as f64);
        }
    }
    Ok(ObservationMatrix {
        n_loci: n,
        flags,
        rows: s + 1,
        data,
    })
}

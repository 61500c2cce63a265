//! NK fitness landscapes.
//!
//! Each of the `N` loci contributes a value looked up from its own random
//! table, indexed by the bits of the locus itself followed by distinct others
//! chosen at random. Under [`Interaction::Inclusive`] there are `K` inputs in
//! total (`K - 1` others); under [`Interaction::Exclusive`] `K` counts the
//! others, so tables have `2^(K+1)` entries. The raw payoff is the mean
//! contribution; the reported payoff is `100 * (raw / raw_max)^8`, where
//! `raw_max` is found by exhaustive enumeration.
//!
//! Solutions are packed into an integer code with locus 0 as the most
//! significant bit, so integer order equals lexicographic order of the bit
//! vector.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Default cap on `N` for exhaustive normalization.
pub const DEFAULT_ENUMERATION_CAP: usize = 25;
/// Largest `N` whose full payoff table is cached in memory (2^20 doubles = 8 MiB).
const PAYOFF_CACHE_MAX_N: usize = 20;
pub const PAYOFF_SCALE: f64 = 100.0;
pub const PAYOFF_EXPONENT: i32 = 8;
const FILE_VERSION: u32 = 1;

/// How `K` relates to the number of inputs per contribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interaction {
    /// `K` inputs: the locus plus `K - 1` others.
    #[default]
    Inclusive,
    /// `K + 1` inputs: the locus plus `K` others.
    Exclusive,
}

impl Interaction {
    pub fn inputs(self, k: usize) -> usize {
        match self {
            Interaction::Inclusive => k,
            Interaction::Exclusive => k + 1,
        }
    }

    fn k_from_inputs(self, inputs: usize) -> usize {
        match self {
            Interaction::Inclusive => inputs,
            Interaction::Exclusive => inputs.saturating_sub(1),
        }
    }
}

/// A binary solution of length `N <= 32`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Solution {
    code: u32,
    len: u8,
}

impl Solution {
    pub fn from_code(code: u32, len: usize) -> Self {
        assert!((1..=32).contains(&len), "solution length must be in 1..=32");
        let mask = if len == 32 { u32::MAX } else { (1u32 << len) - 1 };
        Solution {
            code: code & mask,
            len: len as u8,
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self::from_code(0, len)
    }

    pub fn ones(len: usize) -> Self {
        Self::from_code(u32::MAX, len)
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.is_empty() || bits.len() > 32 {
            return Err(Error::invalid(format!(
                "solution length {} outside 1..=32",
                bits.len()
            )));
        }
        let mut code = 0u32;
        for &b in bits {
            if b > 1 {
                return Err(Error::invalid(format!("bit value {b} is not 0 or 1")));
            }
            code = (code << 1) | b as u32;
        }
        Ok(Solution {
            code,
            len: bits.len() as u8,
        })
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self::from_code(rng.gen::<u32>(), len)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn code(&self) -> u32 {
        self.code
    }

    #[inline]
    pub fn bit(&self, i: usize) -> u8 {
        debug_assert!(i < self.len());
        ((self.code >> (self.len() - 1 - i)) & 1) as u8
    }

    #[inline]
    pub fn flipped(&self, i: usize) -> Self {
        debug_assert!(i < self.len());
        Solution {
            code: self.code ^ (1 << (self.len() - 1 - i)),
            len: self.len,
        }
    }

    /// Bitwise XOR with a mask expressed in the same packed code convention.
    #[inline]
    pub fn xor_code(&self, mask: u32) -> Self {
        Self::from_code(self.code ^ mask, self.len())
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.len()).map(|i| self.bit(i)).collect()
    }

    pub fn count_ones(&self) -> u32 {
        self.code.count_ones()
    }

    pub fn hamming(&self, other: &Solution) -> u32 {
        (self.code ^ other.code).count_ones()
    }
}

impl fmt::Debug for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Solution({self})")
    }
}

impl fmt::Display for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            write!(f, "{}", self.bit(i))?;
        }
        Ok(())
    }
}

impl Serialize for Solution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Solution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bits: Vec<u8> = s
            .bytes()
            .map(|c| c.wrapping_sub(b'0'))
            .collect::<Vec<_>>();
        Solution::from_bits(&bits).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LandscapeFile {
    version: u32,
    n_loci: usize,
    k_inputs: usize,
    #[serde(default)]
    interaction: Interaction,
    seed: Option<u64>,
    deps: Vec<Vec<usize>>,
    tables: Vec<Vec<f64>>,
    p_max_raw: f64,
}

/// An immutable NK landscape.
#[derive(Clone)]
pub struct NkLandscape {
    n_loci: usize,
    k_inputs: usize,
    interaction: Interaction,
    seed: Option<u64>,
    deps: Vec<Vec<usize>>,
    tables: Vec<Vec<f64>>,
    p_max_raw: f64,
    argmax: Solution,
    /// Normalized payoff for every code, when `N` is small enough.
    cache: Option<Arc<[f64]>>,
}

impl fmt::Debug for NkLandscape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NkLandscape")
            .field("n_loci", &self.n_loci)
            .field("k_inputs", &self.k_inputs)
            .field("seed", &self.seed)
            .field("p_max_raw", &self.p_max_raw)
            .finish_non_exhaustive()
    }
}

impl PartialEq for NkLandscape {
    fn eq(&self, other: &Self) -> bool {
        self.n_loci == other.n_loci
            && self.k_inputs == other.k_inputs
            && self.interaction == other.interaction
            && self.seed == other.seed
            && self.deps == other.deps
            && self.tables.len() == other.tables.len()
            && self
                .tables
                .iter()
                .zip(&other.tables)
                .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()))
            && self.p_max_raw.to_bits() == other.p_max_raw.to_bits()
    }
}

impl NkLandscape {
    /// Generates a random landscape with `K` total inputs per locus.
    pub fn generate(n_loci: usize, k_inputs: usize, seed: u64) -> Result<Self> {
        Self::generate_with(n_loci, k_inputs, Interaction::Inclusive, seed)
    }

    pub fn generate_with(n_loci: usize, k: usize, interaction: Interaction, seed: u64) -> Result<Self> {
        Self::generate_capped(n_loci, k, interaction, seed, DEFAULT_ENUMERATION_CAP)
    }

    pub fn generate_capped(
        n_loci: usize,
        k: usize,
        interaction: Interaction,
        seed: u64,
        cap: usize,
    ) -> Result<Self> {
        check_dims(n_loci, k, interaction, cap)?;
        let inputs = interaction.inputs(k);
        let mut rng = rng::stream(seed, &[rng::tag::LANDSCAPE]);
        let mut deps = Vec::with_capacity(n_loci);
        for i in 0..n_loci {
            let mut d = Vec::with_capacity(inputs);
            d.push(i);
            for j in index::sample(&mut rng, n_loci - 1, inputs - 1).into_iter() {
                d.push(if j >= i { j + 1 } else { j });
            }
            deps.push(d);
        }
        let tables = (0..n_loci)
            .map(|_| (0..1usize << inputs).map(|_| rng.gen::<f64>()).collect())
            .collect();
        Self::build(n_loci, k, interaction, Some(seed), deps, tables, cap)
    }

    /// Builds a landscape from explicit dependency lists and tables; `K` is
    /// the number of inputs per locus.
    pub fn from_parts(deps: Vec<Vec<usize>>, tables: Vec<Vec<f64>>) -> Result<Self> {
        let n = deps.len();
        let k = deps.first().map_or(0, Vec::len);
        check_dims(n, k, Interaction::Inclusive, DEFAULT_ENUMERATION_CAP)?;
        Self::build(n, k, Interaction::Inclusive, None, deps, tables, DEFAULT_ENUMERATION_CAP)
    }

    fn build(
        n_loci: usize,
        k_inputs: usize,
        interaction: Interaction,
        seed: Option<u64>,
        deps: Vec<Vec<usize>>,
        tables: Vec<Vec<f64>>,
        cap: usize,
    ) -> Result<Self> {
        validate_parts(n_loci, interaction.inputs(k_inputs), &deps, &tables)?;
        let mut land = NkLandscape {
            n_loci,
            k_inputs,
            interaction,
            seed,
            deps,
            tables,
            p_max_raw: f64::NAN,
            argmax: Solution::zeros(n_loci),
            cache: None,
        };
        let (argmax, p_max_raw, raw) = land.enumerate(cap)?;
        if !(p_max_raw > 0.0 && p_max_raw <= 1.0) {
            return Err(Error::Numerical(format!(
                "maximum raw payoff {p_max_raw} outside (0, 1]"
            )));
        }
        land.argmax = argmax;
        land.p_max_raw = p_max_raw;
        if let Some(raw) = raw {
            land.cache = Some(raw.into_iter().map(|r| normalize(r, p_max_raw)).collect());
        }
        Ok(land)
    }

    /// Exhaustive pass: returns the lowest-code maximizer, the maximum, and
    /// (for small `N`) every raw payoff.
    fn enumerate(&self, cap: usize) -> Result<(Solution, f64, Option<Vec<f64>>)> {
        if self.n_loci > cap {
            return Err(Error::EnumerationCap {
                n: self.n_loci,
                cap,
            });
        }
        let total = 1u64 << self.n_loci;
        let keep = self.n_loci <= PAYOFF_CACHE_MAX_N;
        let mut raw = keep.then(|| Vec::with_capacity(total as usize));
        let mut best = f64::NEG_INFINITY;
        let mut best_code = 0u32;
        for code in 0..total {
            let v = self.raw_code(code as u32);
            if v > best {
                best = v;
                best_code = code as u32;
            }
            if let Some(r) = raw.as_mut() {
                r.push(v);
            }
        }
        Ok((Solution::from_code(best_code, self.n_loci), best, raw))
    }

    #[inline]
    fn raw_code(&self, code: u32) -> f64 {
        let n = self.n_loci;
        let mut sum = 0.0;
        for (dep, table) in self.deps.iter().zip(&self.tables) {
            let mut idx = 0usize;
            for &j in dep {
                idx = (idx << 1) | ((code >> (n - 1 - j)) & 1) as usize;
            }
            sum += table[idx];
        }
        sum / n as f64
    }

    pub fn n_loci(&self) -> usize {
        self.n_loci
    }

    /// `K` as configured; see [`Interaction`] for how it maps to inputs.
    pub fn k_inputs(&self) -> usize {
        self.k_inputs
    }

    pub fn interaction(&self) -> Interaction {
        self.interaction
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn deps(&self) -> &[Vec<usize>] {
        &self.deps
    }

    pub fn tables(&self) -> &[Vec<f64>] {
        &self.tables
    }

    pub fn p_max_raw(&self) -> f64 {
        self.p_max_raw
    }

    fn check(&self, x: &Solution) -> Result<()> {
        if x.len() != self.n_loci {
            return Err(Error::DimensionMismatch {
                expected: self.n_loci,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Mean contribution over loci, in `[0, 1)`.
    pub fn raw_payoff(&self, x: &Solution) -> Result<f64> {
        self.check(x)?;
        Ok(self.raw_code(x.code()))
    }

    /// Normalized payoff in `[0, 100]`.
    pub fn payoff(&self, x: &Solution) -> Result<f64> {
        self.check(x)?;
        Ok(self.payoff_unchecked(x))
    }

    /// Payoff without the dimension check; the caller guarantees `x.len() == N`.
    #[inline]
    pub fn payoff_unchecked(&self, x: &Solution) -> f64 {
        debug_assert_eq!(x.len(), self.n_loci);
        match &self.cache {
            Some(c) => c[x.code() as usize],
            None => normalize(self.raw_code(x.code()), self.p_max_raw),
        }
    }

    /// The maximizing solution (lowest code among ties) and its raw payoff.
    pub fn global_argmax(&self) -> (Solution, f64) {
        (self.argmax, self.p_max_raw)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = LandscapeFile {
            version: FILE_VERSION,
            n_loci: self.n_loci,
            k_inputs: self.k_inputs,
            interaction: self.interaction,
            seed: self.seed,
            deps: self.deps.clone(),
            tables: self.tables.clone(),
            p_max_raw: self.p_max_raw,
        };
        let text = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: LandscapeFile = serde_json::from_str(&text)?;
        if file.version != FILE_VERSION {
            return Err(Error::Version {
                found: file.version,
                expected: FILE_VERSION,
            });
        }
        let cap = DEFAULT_ENUMERATION_CAP.max(file.n_loci);
        let land = Self::build(
            file.n_loci,
            file.k_inputs,
            file.interaction,
            file.seed,
            file.deps,
            file.tables,
            cap,
        )?;
        if land.p_max_raw.to_bits() != file.p_max_raw.to_bits() {
            return Err(Error::Numerical(format!(
                "stored maximum {} disagrees with recomputed {}",
                file.p_max_raw, land.p_max_raw
            )));
        }
        Ok(land)
    }
}

#[inline]
fn normalize(raw: f64, p_max_raw: f64) -> f64 {
    PAYOFF_SCALE * (raw / p_max_raw).powi(PAYOFF_EXPONENT)
}

fn check_dims(n: usize, k: usize, interaction: Interaction, cap: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("N must be positive"));
    }
    let inputs = interaction.inputs(k);
    if inputs == 0 || inputs > n {
        let lo = interaction.k_from_inputs(1);
        let hi = interaction.k_from_inputs(n);
        return Err(Error::invalid(format!("K = {k} outside {lo}..={hi}")));
    }
    if n > cap {
        return Err(Error::EnumerationCap { n, cap });
    }
    if n > 32 {
        return Err(Error::invalid("N above 32 is not representable"));
    }
    Ok(())
}

fn validate_parts(n: usize, k: usize, deps: &[Vec<usize>], tables: &[Vec<f64>]) -> Result<()> {
    if deps.len() != n || tables.len() != n {
        return Err(Error::invalid("deps/tables must have one entry per locus"));
    }
    for (i, d) in deps.iter().enumerate() {
        if d.len() != k {
            return Err(Error::invalid(format!("locus {i} has {} inputs, expected {k}", d.len())));
        }
        if d[0] != i {
            return Err(Error::invalid(format!("locus {i} must list itself first")));
        }
        for (a, &x) in d.iter().enumerate() {
            if x >= n || d[..a].contains(&x) {
                return Err(Error::invalid(format!("locus {i} has invalid dependency {x}")));
            }
        }
    }
    for (i, t) in tables.iter().enumerate() {
        if t.len() != 1 << k {
            return Err(Error::invalid(format!("table {i} must have 2^K entries")));
        }
        if t.iter().any(|v| !(0.0..1.0).contains(v)) {
            return Err(Error::invalid(format!("table {i} has an entry outside [0, 1)")));
        }
    }
    Ok(())
}

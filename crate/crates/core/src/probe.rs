//! Strategy diagnosis with fixed solution templates and swept payoffs.
//!
//! A template fixes the solutions of the observing agent and three neighbors;
//! only the payoffs vary. Feeding every payoff combination to a policy and
//! recording its per-bit output shows which neighbor (if any) it copies.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::landscape::Solution;
use crate::policy::{build_observation, FeatureFlags, ObservationMatrix, Policy};
use crate::rng::{self, tag};
use crate::strategy::{individual_option, social_option, Individual, Observed, StrategySpec};

pub const P_MAX: u32 = 100;
pub const EXPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    /// Three neighbors with `p3 <= p2 <= p1`.
    Bi,
    /// A unique best neighbor and a duplicated majority with `p2 = p3 < p1`.
    Cf,
}

impl std::str::FromStr for TemplateKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bi" => Ok(TemplateKind::Bi),
            "cf" => Ok(TemplateKind::Cf),
            _ => Err(Error::invalid(format!("unknown template kind {s:?} (expected bi or cf)"))),
        }
    }
}

/// The four fixed solutions of a template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub own: Solution,
    pub best: Solution,
    pub second: Solution,
    pub third: Solution,
}

/// Canonical templates: own = all zeros, best = all ones, second = alternating
/// starting with 1, third = `N/2` zeros followed by ones.
pub fn canonical_template(n: usize) -> Result<Template> {
    if !(4..=32).contains(&n) {
        return Err(Error::invalid(format!("templates need 4 <= N <= 32, got {n}")));
    }
    let alt: Vec<u8> = (0..n).map(|i| (i % 2 == 0) as u8).collect();
    let half: Vec<u8> = (0..n).map(|i| (i >= n / 2) as u8).collect();
    Ok(Template {
        own: Solution::zeros(n),
        best: Solution::ones(n),
        second: Solution::from_bits(&alt)?,
        third: Solution::from_bits(&half)?,
    })
}

/// Template for region averages. Its best solution mixes zeros and ones so
/// both "best" and "non-best" dimensions exist.
pub fn region_template(n: usize) -> Result<Template> {
    let c = canonical_template(n)?;
    Ok(Template {
        own: c.own,
        best: c.third,
        second: c.second,
        third: c.best,
    })
}

impl Template {
    /// The four (solution, payoff) pairs: own first, then the neighbors.
    pub fn observed(&self, kind: TemplateKind, p: [u32; 4]) -> (Observed, [Observed; 3]) {
        let f = |v: u32| v as f64;
        let third = match kind {
            TemplateKind::Bi => (self.third, f(p[3])),
            TemplateKind::Cf => (self.second, f(p[2])),
        };
        (
            (self.own, f(p[0])),
            [(self.best, f(p[1])), (self.second, f(p[2])), third],
        )
    }

    pub fn observation(&self, kind: TemplateKind, p: [u32; 4], flags: FeatureFlags) -> Result<ObservationMatrix> {
        let (me, nb) = self.observed(kind, p);
        build_observation(me, &nb, flags)
    }
}

/// All `(p1, p2, p3)` with `0 <= p3 <= p2 <= p1 <= p_max`, lexicographic.
pub fn enumerate_bi_inputs(p_max: u32) -> Vec<(u32, u32, u32)> {
    let mut out = Vec::new();
    for p1 in 0..=p_max {
        for p2 in 0..=p1 {
            for p3 in 0..=p2 {
                out.push((p1, p2, p3));
            }
        }
    }
    out
}

/// All `(p1, p2)` with `0 <= p2 < p1 <= p_max`, lexicographic.
pub fn enumerate_cf_inputs(p_max: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for p1 in 0..=p_max {
        for p2 in 0..p1 {
            out.push((p1, p2));
        }
    }
    out
}

fn distance(p: &[f64], x: &Solution) -> f64 {
    let n = p.len() as f64;
    (p.iter().enumerate().map(|(i, v)| (v - x.bit(i) as f64).powi(2)).sum::<f64>() / n).sqrt()
}

/// Root-mean-square distances from an output vector to the own, second and best solutions.
pub fn strategy_distances(p1: &[f64], template: &Template) -> Result<[f64; 3]> {
    if p1.len() != template.own.len() {
        return Err(Error::DimensionMismatch {
            expected: template.own.len(),
            actual: p1.len(),
        });
    }
    Ok([
        distance(p1, &template.own),
        distance(p1, &template.second),
        distance(p1, &template.best),
    ])
}

/// `(r, g, b, a)` for distances `(own, second, best)`.
pub fn voxel_color(d: [f64; 3]) -> [f64; 4] {
    let m = d[0].min(d[1]).min(d[2]);
    [1.0 - d[0], 1.0 - d[1], 1.0 - d[2], 0.3 * (1.0 - m).powi(2)]
}

/// Anything that maps an observation to per-bit probabilities of producing a 1.
pub trait ProbePolicy: Sync {
    fn bit_probabilities(&self, obs: &ObservationMatrix) -> Result<Vec<f64>>;

    /// Features the policy expects.
    fn flags(&self) -> FeatureFlags {
        FeatureFlags::PIRF
    }
}

impl ProbePolicy for Policy {
    fn bit_probabilities(&self, obs: &ObservationMatrix) -> Result<Vec<f64>> {
        self.probabilities(obs)
    }

    fn flags(&self) -> FeatureFlags {
        Policy::flags(self)
    }
}

/// Hand-written reference policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scripted {
    /// Copy the highest-paying neighbor; tied neighbors are averaged.
    CopyBest,
    UniformRandom,
    KeepSelf,
    /// Best imitation with random resampling, in closed form.
    BestImitatorAnalytic,
    /// Best imitation with random resampling, estimated from `samples` draws.
    BestImitatorSampled { samples: usize, seed: u64 },
}

fn decode(obs: &ObservationMatrix) -> Result<(Observed, Vec<Observed>)> {
    let own = obs
        .self_row()
        .ok_or_else(|| Error::invalid("scripted policies need the self indicator"))?;
    let mut me = None;
    let mut nb = Vec::with_capacity(obs.n_rows() - 1);
    for r in 0..obs.n_rows() {
        let bits: Vec<u8> = obs.bits(r).iter().map(|&b| b as u8).collect();
        let pay = obs
            .payoff(r)
            .ok_or_else(|| Error::invalid("scripted policies need the payoff feature"))?;
        let o = (Solution::from_bits(&bits)?, pay);
        if r == own {
            me = Some(o);
        } else {
            nb.push(o);
        }
    }
    Ok((me.expect("self row"), nb))
}

fn mean_bits<'a>(sols: impl Iterator<Item = &'a Solution>) -> Vec<f64> {
    let mut acc: Vec<f64> = vec![];
    let mut count = 0.0;
    for s in sols {
        if acc.is_empty() {
            acc = vec![0.0; s.len()];
        }
        for (i, a) in acc.iter_mut().enumerate() {
            *a += s.bit(i) as f64;
        }
        count += 1.0;
    }
    acc.iter().map(|a| a / count).collect()
}

impl ProbePolicy for Scripted {
    fn bit_probabilities(&self, obs: &ObservationMatrix) -> Result<Vec<f64>> {
        let (me, nb) = decode(obs)?;
        let n = me.0.len();
        let best = nb.iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max);
        let tied = || nb.iter().filter(|o| o.1 == best).map(|o| &o.0);
        Ok(match *self {
            Scripted::CopyBest => mean_bits(tied()),
            Scripted::UniformRandom => vec![0.5; n],
            Scripted::KeepSelf => mean_bits(std::iter::once(&me.0)),
            Scripted::BestImitatorAnalytic => {
                if best > me.1 {
                    mean_bits(tied())
                } else {
                    vec![0.5; n]
                }
            }
            Scripted::BestImitatorSampled { samples, seed } => {
                let keys: Vec<u64> = std::iter::once(tag::PROBE)
                    .chain(obs.data().iter().map(|v| v.to_bits()))
                    .collect();
                let mut r = rng::stream(seed, &keys);
                let spec: StrategySpec = "BI-R".parse()?;
                let mut ones = vec![0usize; n];
                for _ in 0..samples {
                    let social = social_option(&spec, &nb, &mut r)?;
                    let pay = |s: &Solution| nb.iter().find(|o| o.0 == *s).map(|o| o.1);
                    let produced = match social {
                        Some(s) if pay(&s).is_some_and(|p| p > me.1) => s,
                        _ => individual_option(Individual::RandomResample, &me.0, &mut r).expect("resample"),
                    };
                    for (i, o) in ones.iter_mut().enumerate() {
                        *o += produced.bit(i) as usize;
                    }
                }
                ones.iter().map(|&o| o as f64 / samples as f64).collect()
            }
        })
    }
}

/// Per-tuple output probabilities; rows follow the enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputDiagram {
    pub kind: TemplateKind,
    pub own_payoff: u32,
    /// `(p1, p2, p3)`; for CF, `p3 = p2`.
    pub inputs: Vec<[u32; 3]>,
    pub probabilities: Vec<Vec<f64>>,
}

pub fn output_diagram<P: ProbePolicy>(
    policy: &P,
    template: &Template,
    kind: TemplateKind,
    own_payoff: u32,
    p_max: u32,
    exec: Execution,
) -> Result<OutputDiagram> {
    if own_payoff > p_max {
        return Err(Error::invalid("own payoff exceeds p_max"));
    }
    let inputs: Vec<[u32; 3]> = match kind {
        TemplateKind::Bi => enumerate_bi_inputs(p_max).into_iter().map(|(a, b, c)| [a, b, c]).collect(),
        TemplateKind::Cf => enumerate_cf_inputs(p_max).into_iter().map(|(a, b)| [a, b, b]).collect(),
    };
    let flags = policy.flags();
    let probabilities = exec.try_map(inputs.len(), |i| {
        let [p1, p2, p3] = inputs[i];
        let obs = template.observation(kind, [own_payoff, p1, p2, p3], flags)?;
        policy.bit_probabilities(&obs)
    })?;
    Ok(OutputDiagram {
        kind,
        own_payoff,
        inputs,
        probabilities,
    })
}

impl OutputDiagram {
    /// CSV with columns `p1,p2,p3,bit_0..bit_{N-1}`.
    pub fn to_csv(&self) -> String {
        let n = self.probabilities.first().map_or(0, Vec::len);
        let mut out = String::from("p1,p2,p3");
        for d in 0..n {
            let _ = write!(out, ",bit_{d}");
        }
        out.push('\n');
        for (inp, row) in self.inputs.iter().zip(&self.probabilities) {
            let _ = write!(out, "{},{},{}", inp[0], inp[1], inp[2]);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagramPoint {
    pub p3: u32,
    pub p2: u32,
    pub p1: u32,
    pub distances: [f64; 3],
    pub color: [f64; 4],
}

/// BI-template voxels at payoffs that are multiples of `stride`.
pub fn voxel_diagram<P: ProbePolicy>(
    policy: &P,
    template: &Template,
    own_payoff: u32,
    stride: u32,
    p_max: u32,
    exec: Execution,
) -> Result<Vec<DiagramPoint>> {
    if stride == 0 || p_max % stride != 0 {
        return Err(Error::invalid(format!("stride {stride} must divide p_max {p_max}")));
    }
    let coords: Vec<(u32, u32, u32)> = enumerate_bi_inputs(p_max / stride)
        .into_iter()
        .map(|(a, b, c)| (a * stride, b * stride, c * stride))
        .collect();
    let flags = policy.flags();
    exec.try_map(coords.len(), |i| {
        let (p1, p2, p3) = coords[i];
        let obs = template.observation(TemplateKind::Bi, [own_payoff, p1, p2, p3], flags)?;
        let probs = policy.bit_probabilities(&obs)?;
        let distances = strategy_distances(&probs, template)?;
        Ok(DiagramPoint {
            p3,
            p2,
            p1,
            distances,
            color: voxel_color(distances),
        })
    })
}

pub const VOXEL_HEADER: &str = "p3,p2,p1,r,g,b,a";

pub fn voxel_csv(points: &[DiagramPoint]) -> String {
    let mut out = format!("{VOXEL_HEADER}\n");
    for p in points {
        let [r, g, b, a] = p.color;
        let _ = writeln!(out, "{},{},{},{r},{g},{b},{a}", p.p3, p.p2, p.p1);
    }
    out
}

/// Parses a voxel CSV back into `(p3, p2, p1, [r, g, b, a])` rows.
pub fn parse_voxel_csv(text: &str) -> Result<Vec<([u32; 3], [f64; 4])>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == VOXEL_HEADER => {}
        _ => return Err(Error::Serde(format!("voxel CSV must start with {VOXEL_HEADER:?}"))),
    }
    let bad = |line: usize, msg: &str| Error::Parse {
        path: "<voxel csv>".into(),
        line: line + 1,
        msg: msg.into(),
    };
    lines
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 7 {
                return Err(bad(i, "expected 7 fields"));
            }
            let mut c = [0u32; 3];
            for k in 0..3 {
                c[k] = f[k].parse().map_err(|_| bad(i, "bad coordinate"))?;
            }
            let mut col = [0.0; 4];
            for k in 0..4 {
                col[k] = f[3 + k].parse().map_err(|_| bad(i, "bad color"))?;
            }
            Ok((c, col))
        })
        .collect()
}

/// Average probability of producing a 1 in four regions of the `(p0, p1)` sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionAverages {
    /// Non-best dimensions, `p0 >= p1`.
    pub region_i: f64,
    /// Best dimensions, `p0 >= p1`.
    pub region_ii: f64,
    /// Non-best dimensions, `p0 < p1`.
    pub region_iii: f64,
    /// Best dimensions, `p0 < p1`.
    pub region_iv: f64,
}

/// Sweeps every integer `(p0, p1)` in `[0, p_max]^2` with the other two payoffs at 0.
pub fn region_averages<P: ProbePolicy>(
    policy: &P,
    template: &Template,
    p_max: u32,
    exec: Execution,
) -> Result<RegionAverages> {
    let side = (p_max + 1) as usize;
    let flags = policy.flags();
    let best_bits = template.best.bits();
    let per = exec.try_map(side * side, |k| -> Result<[f64; 8]> {
        let (p0, p1) = ((k / side) as u32, (k % side) as u32);
        let obs = template.observation(TemplateKind::Bi, [p0, p1, 0, 0], flags)?;
        let probs = policy.bit_probabilities(&obs)?;
        let hi = p0 < p1;
        // sums and counts for regions I..IV
        let mut acc = [0.0; 8];
        for (d, &p) in probs.iter().enumerate() {
            let region = (hi as usize) * 2 + best_bits[d] as usize;
            acc[region] += p;
            acc[4 + region] += 1.0;
        }
        Ok(acc)
    })?;
    let mut tot = [0.0; 8];
    for a in per {
        for (t, v) in tot.iter_mut().zip(a) {
            *t += v;
        }
    }
    for r in 0..4 {
        if tot[4 + r] == 0.0 {
            return Err(Error::invalid("template leaves a region empty"));
        }
    }
    Ok(RegionAverages {
        region_i: tot[0] / tot[4],
        region_ii: tot[1] / tot[5],
        region_iii: tot[2] / tot[6],
        region_iv: tot[3] / tot[7],
    })
}

/// Describes a probe export directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeMeta {
    pub schema_version: u32,
    pub own_payoff: u32,
    pub stride: u32,
    pub p_max: u32,
    pub template: Template,
    pub region_template: Template,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub meta: ProbeMeta,
    pub voxels: Vec<DiagramPoint>,
    pub bi: OutputDiagram,
    pub cf: OutputDiagram,
    pub regions: RegionAverages,
}

/// Runs every probe for one policy.
pub fn run_probe<P: ProbePolicy>(
    policy: &P,
    n_loci: usize,
    own_payoff: u32,
    stride: u32,
    exec: Execution,
) -> Result<ProbeReport> {
    let template = canonical_template(n_loci)?;
    let rtemplate = region_template(n_loci)?;
    Ok(ProbeReport {
        voxels: voxel_diagram(policy, &template, own_payoff, stride, P_MAX, exec)?,
        bi: output_diagram(policy, &template, TemplateKind::Bi, own_payoff, P_MAX, exec)?,
        cf: output_diagram(policy, &template, TemplateKind::Cf, own_payoff, P_MAX, exec)?,
        regions: region_averages(policy, &rtemplate, P_MAX, exec)?,
        meta: ProbeMeta {
            schema_version: EXPORT_SCHEMA_VERSION,
            own_payoff,
            stride,
            p_max: P_MAX,
            template,
            region_template: rtemplate,
        },
    })
}

impl ProbeReport {
    /// Writes `voxels.csv`, `output_bi.csv`, `output_cf.csv`, `regions.json`
    /// and `probe_meta.json` into `dir`. Returns the file names written.
    pub fn export(&self, dir: &Path) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("voxels.csv", voxel_csv(&self.voxels)),
            ("output_bi.csv", self.bi.to_csv()),
            ("output_cf.csv", self.cf.to_csv()),
            ("regions.json", serde_json::to_string_pretty(&self.regions)?),
            ("probe_meta.json", serde_json::to_string_pretty(&self.meta)?),
        ];
        let mut names = vec![];
        for (name, text) in files {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            names.push(name.to_string());
        }
        Ok(names)
    }
}

/// Convenience: a uniformly random payoff tuple for the BI template.
pub fn random_bi_payoffs<R: Rng + ?Sized>(rng: &mut R) -> [u32; 4] {
    let mut v = [rng.gen_range(0..=P_MAX), rng.gen_range(0..=P_MAX), rng.gen_range(0..=P_MAX)];
    v.sort_unstable_by(|a, b| b.cmp(a));
    [rng.gen_range(0..=P_MAX), v[0], v[1], v[2]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_distances() {
        let t = canonical_template(15).unwrap();
        assert_eq!(t.third.to_string(), "000000011111111");
        assert_eq!(t.second.to_string(), "101010101010101");
        let own: Vec<f64> = vec![0.0; 15];
        let d = strategy_distances(&own, &t).unwrap();
        assert_eq!(d[0], 0.0);
        assert_eq!(d[2], 1.0);
        assert!((d[1] - (8.0f64 / 15.0).sqrt()).abs() < 1e-15);
        let half = strategy_distances(&[0.5; 15], &t).unwrap();
        assert_eq!(half, [0.5; 3]);
        let sols = [t.own, t.best, t.second, t.third];
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(sols[i], sols[j]);
            }
        }
        for n in 4..=20 {
            let t = canonical_template(n).unwrap();
            let s = [t.own, t.best, t.second, t.third];
            assert!((0..4).all(|i| (i + 1..4).all(|j| s[i] != s[j])));
        }
        assert!(canonical_template(3).is_err());
        assert!(strategy_distances(&[0.0; 4], &t).is_err());
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_bi_inputs(1), vec![(0, 0, 0), (1, 0, 0), (1, 1, 0), (1, 1, 1)]);
        assert_eq!(enumerate_bi_inputs(2).len(), 10);
        assert_eq!(enumerate_cf_inputs(1), vec![(1, 0)]);
        assert_eq!(enumerate_cf_inputs(3).len(), 6);
        assert_eq!(enumerate_bi_inputs(100).len(), 176_851);
        assert_eq!(enumerate_cf_inputs(100).len(), 5_050);
    }

    #[test]
    fn colors() {
        assert_eq!(voxel_color([0.5; 3]), [0.5, 0.5, 0.5, 0.075]);
        assert_eq!(voxel_color([0.0, 1.0, 1.0]), [1.0, 0.0, 0.0, 0.3]);
    }

    #[test]
    fn cf_template_frequencies() {
        let t = canonical_template(15).unwrap();
        let obs = t.observation(TemplateKind::Cf, [10, 80, 30, 30], FeatureFlags::PIRF).unwrap();
        let freq: Vec<f64> = (0..4).map(|r| obs.row(r)[18]).collect();
        assert_eq!(freq, vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn scripted_oracles() {
        let t = canonical_template(15).unwrap();
        let ex = Execution::Sequential;
        let d = output_diagram(&Scripted::UniformRandom, &t, TemplateKind::Cf, 5, 10, ex).unwrap();
        assert!(d.probabilities.iter().flatten().all(|&p| p == 0.5));
        let d = output_diagram(&Scripted::CopyBest, &t, TemplateKind::Cf, 5, 10, ex).unwrap();
        assert!(d.probabilities.iter().all(|r| r.iter().all(|&p| p == 1.0)));
        let vox = voxel_diagram(&Scripted::BestImitatorAnalytic, &t, 50, 5, 100, ex).unwrap();
        assert_eq!(vox.len(), 1771);
        for v in vox.iter().filter(|v| v.p1 > 50 && v.p2 < v.p1) {
            assert_eq!(v.color[2], 1.0);
            assert_eq!(v.color[3], 0.3);
        }
        assert_eq!(voxel_diagram(&Scripted::KeepSelf, &t, 0, 100, 100, ex).unwrap().len(), 4);
    }

    #[test]
    fn region_oracles() {
        let t = region_template(15).unwrap();
        let ex = Execution::Parallel;
        let r = region_averages(&Scripted::BestImitatorAnalytic, &t, 100, ex).unwrap();
        assert_eq!((r.region_i, r.region_ii, r.region_iii, r.region_iv), (0.5, 0.5, 0.0, 1.0));
        let r = region_averages(&Scripted::KeepSelf, &t, 100, ex).unwrap();
        assert_eq!((r.region_i, r.region_ii, r.region_iii, r.region_iv), (0.0, 0.0, 0.0, 0.0));
        let sampled = Scripted::BestImitatorSampled { samples: 50, seed: 1 };
        let r = region_averages(&sampled, &t, 20, ex).unwrap();
        assert!((r.region_i - 0.5).abs() < 0.02 && (r.region_ii - 0.5).abs() < 0.02);
        assert!(r.region_iii.abs() < 0.02 && (r.region_iv - 1.0).abs() < 0.02);
        // all-ones best leaves no non-best dimensions
        assert!(region_averages(&Scripted::KeepSelf, &canonical_template(15).unwrap(), 10, ex).is_err());
    }

    #[test]
    fn voxel_csv_round_trip() {
        let t = canonical_template(8).unwrap();
        let vox = voxel_diagram(&Scripted::CopyBest, &t, 30, 10, 100, Execution::Sequential).unwrap();
        let text = voxel_csv(&vox);
        let back = parse_voxel_csv(&text).unwrap();
        assert_eq!(back.len(), vox.len());
        for (v, (c, col)) in vox.iter().zip(&back) {
            assert_eq!(*c, [v.p3, v.p2, v.p1]);
            assert_eq!(*col, v.color);
        }
        assert!(parse_voxel_csv("x,y\n").is_err());
    }
}

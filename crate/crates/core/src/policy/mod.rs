//! Neural social-learning policy: an actor giving a two-class logit pair per
//! solution bit, and a critic estimating state value. Both read the same
//! observation encoding and use separate weights.

mod net;
mod observation;

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use net::{NetShape, SetNet, Tape};
pub use observation::{build_observation, FeatureFlags, ObservationMatrix};

use crate::error::{Error, Result};
use crate::landscape::{NkLandscape, Solution};
use crate::rng::{self, StreamRng};
use crate::sim::{Learner, StepContext};
use crate::strategy::Observed;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyArch {
    pub embed: usize,
    /// 0 disables attention and keeps mean pooling only.
    pub heads: usize,
    pub hidden: usize,
    /// Scale applied to the initial actor output layer, keeping early outputs near 0.5.
    pub actor_output_scale: f64,
}

impl Default for PolicyArch {
    fn default() -> Self {
        PolicyArch {
            embed: 64,
            heads: 4,
            hidden: 64,
            actor_output_scale: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_loci: usize,
    flags: FeatureFlags,
    arch: PolicyArch,
    pub actor: SetNet,
    pub critic: SetNet,
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Probability of a 1 at each bit from logits laid out as `[class * N + bit]`.
pub fn bit_probabilities(logits: &[f64]) -> Vec<f64> {
    let n = logits.len() / 2;
    (0..n).map(|d| sigmoid(logits[n + d] - logits[d])).collect()
}

/// Log-probability of `action` under independent per-bit distributions.
pub fn log_prob(logits: &[f64], action: &Solution) -> f64 {
    let n = logits.len() / 2;
    (0..n)
        .map(|d| {
            let delta = logits[n + d] - logits[d];
            if action.bit(d) == 1 {
                -softplus(-delta)
            } else {
                -softplus(delta)
            }
        })
        .sum()
}

/// Mean per-bit entropy (nats) computed from logits.
pub fn logit_entropy(logits: &[f64]) -> f64 {
    let n = logits.len() / 2;
    (0..n)
        .map(|d| {
            let delta = logits[n + d] - logits[d];
            softplus(delta) - sigmoid(delta) * delta
        })
        .sum::<f64>()
        / n as f64
}

/// Mean per-bit entropy (nats), with `0 ln 0 = 0`.
pub fn output_entropy(p1: &[f64]) -> f64 {
    let h = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.ln() };
    p1.iter().map(|&p| h(p) + h(1.0 - p)).sum::<f64>() / p1.len() as f64
}

pub fn sample_bits<R: Rng + ?Sized>(p1: &[f64], rng: &mut R) -> Solution {
    let code = p1
        .iter()
        .fold(0u32, |acc, &p| (acc << 1) | (rng.gen::<f64>() < p) as u32);
    Solution::from_code(code, p1.len())
}

/// Samples a solution and adopts it only if it strictly beats the current payoff.
/// Returns the resulting state and the raw sample.
pub fn sample_and_correct<R: Rng + ?Sized>(
    p1: &[f64],
    current: Observed,
    landscape: &NkLandscape,
    rng: &mut R,
) -> Result<(Observed, Solution)> {
    if p1.len() != landscape.n_loci() {
        return Err(Error::DimensionMismatch {
            expected: landscape.n_loci(),
            actual: p1.len(),
        });
    }
    let sample = sample_bits(p1, rng);
    let pay = landscape.payoff_unchecked(&sample);
    let next = if pay > current.1 { (sample, pay) } else { current };
    Ok((next, sample))
}

impl Policy {
    pub fn new(n_loci: usize, flags: FeatureFlags, arch: PolicyArch, seed: u64) -> Result<Self> {
        if n_loci == 0 || n_loci > 32 {
            return Err(Error::invalid(format!("unsupported solution length {n_loci}")));
        }
        let mut r = rng::stream(seed, &[rng::tag::PARAMS]);
        let actor = SetNet::new(Self::shape(n_loci, flags, &arch, 2 * n_loci), arch.actor_output_scale, &mut r)?;
        let critic = SetNet::new(Self::shape(n_loci, flags, &arch, 1), 1.0, &mut r)?;
        Ok(Policy {
            n_loci,
            flags,
            arch,
            actor,
            critic,
        })
    }

    fn shape(n_loci: usize, flags: FeatureFlags, arch: &PolicyArch, output: usize) -> NetShape {
        NetShape {
            input: flags.width(n_loci),
            embed: arch.embed,
            heads: arch.heads,
            hidden: arch.hidden,
            output,
            indicator: flags.indicator_column(n_loci),
        }
    }

    pub fn n_loci(&self) -> usize {
        self.n_loci
    }

    pub fn flags(&self) -> FeatureFlags {
        self.flags
    }

    pub fn arch(&self) -> PolicyArch {
        self.arch
    }

    fn check(&self, obs: &ObservationMatrix) -> Result<()> {
        if obs.n_loci() != self.n_loci {
            return Err(Error::DimensionMismatch {
                expected: self.n_loci,
                actual: obs.n_loci(),
            });
        }
        if obs.flags() != self.flags {
            return Err(Error::invalid("observation features differ from the policy's"));
        }
        Ok(())
    }

    /// Actor logits, `2N` values laid out as `[class * N + bit]`.
    pub fn logits(&self, obs: &ObservationMatrix) -> Result<Vec<f64>> {
        self.check(obs)?;
        self.actor.forward(obs.data())
    }

    pub fn value(&self, obs: &ObservationMatrix) -> Result<f64> {
        self.check(obs)?;
        Ok(self.critic.forward(obs.data())?[0])
    }

    pub fn probabilities(&self, obs: &ObservationMatrix) -> Result<Vec<f64>> {
        Ok(bit_probabilities(&self.logits(obs)?))
    }

    pub fn to_checkpoint(&self, epoch: Option<usize>, config: Option<serde_json::Value>) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            n_loci: self.n_loci,
            flags: self.flags,
            arch: self.arch,
            actor: self.actor.params().to_vec(),
            critic: self.critic.params().to_vec(),
            epoch,
            config,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint(None, None).save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::load(path)?.policy()
    }
}

/// One actor decision, kept for training.
#[derive(Debug, Clone)]
pub struct Decision {
    pub observation: ObservationMatrix,
    pub action: Solution,
    pub log_prob: f64,
    pub entropy: f64,
}

impl Policy {
    pub fn decide(&self, ctx: &StepContext<'_>, rng: &mut StreamRng) -> Result<(Observed, Decision)> {
        let obs = build_observation(ctx.current, ctx.sample, self.flags)?;
        let logits = self.logits(&obs)?;
        let p1 = bit_probabilities(&logits);
        let (next, action) = sample_and_correct(&p1, ctx.current, ctx.landscape, rng)?;
        Ok((
            next,
            Decision {
                log_prob: log_prob(&logits, &action),
                entropy: output_entropy(&p1),
                observation: obs,
                action,
            },
        ))
    }
}

impl Learner for Policy {
    type Record = ();

    fn step(&self, ctx: &StepContext<'_>, rng: &mut StreamRng) -> Result<(Observed, ())> {
        self.decide(ctx, rng).map(|(o, _)| (o, ()))
    }
}

/// A policy that keeps its per-step decisions.
pub struct Recording<'a>(pub &'a Policy);

impl Learner for Recording<'_> {
    type Record = Decision;

    fn step(&self, ctx: &StepContext<'_>, rng: &mut StreamRng) -> Result<(Observed, Decision)> {
        self.0.decide(ctx, rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub n_loci: usize,
    pub flags: FeatureFlags,
    pub arch: PolicyArch,
    pub actor: Vec<f64>,
    pub critic: Vec<f64>,
    #[serde(default)]
    pub epoch: Option<usize>,
    /// Echo of the training configuration that produced the weights.
    #[serde(default)]
    pub config: Option<serde_json::Value>,
}

impl Checkpoint {
    pub fn policy(&self) -> Result<Policy> {
        let actor = SetNet::from_params(
            Policy::shape(self.n_loci, self.flags, &self.arch, 2 * self.n_loci),
            self.actor.clone(),
        )?;
        let critic = SetNet::from_params(Policy::shape(self.n_loci, self.flags, &self.arch, 1), self.critic.clone())?;
        Ok(Policy {
            n_loci: self.n_loci,
            flags: self.flags,
            arch: self.arch,
            actor,
            critic,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: ck.version,
                expected: CHECKPOINT_VERSION,
            });
        }
        Ok(ck)
    }
}

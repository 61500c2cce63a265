//! Actor-critic training with generalized advantage estimation.
//!
//! Each epoch runs one on-policy episode with every agent sharing the current
//! policy, then performs a number of minibatch updates. The actor objective is
//! the importance-weighted advantage without clipping plus an entropy bonus;
//! the critic regresses onto GAE return targets. Both use Adam.

use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::landscape::{NkLandscape, Solution};
use crate::policy::{self, FeatureFlags, ObservationMatrix, Policy, PolicyArch, Recording};
use crate::rng::{self, tag};
use crate::sim::{run_episode_with, EpisodeConfig};
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Payoff of the state held after each step.
    #[default]
    PerStepPayoff,
    /// Zero until the last step, which pays the final payoff times the episode length.
    FinalPayoffScaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardScope {
    #[default]
    Individual,
    /// Every agent receives the population mean payoff.
    GroupAveraged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LandscapeMode {
    #[default]
    FreshPerEpoch,
    /// Cycle through a fixed set of `count` landscapes.
    FixedSet { count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumStep {
    pub epoch: usize,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EarlyStopping {
    pub enabled: bool,
    /// Moving-average window, in epochs.
    pub window: usize,
    /// Stop after this many epochs without an improvement of `min_delta`.
    pub patience: usize,
    pub min_delta: f64,
}

impl Default for EarlyStopping {
    fn default() -> Self {
        EarlyStopping {
            enabled: true,
            window: 200,
            patience: 500,
            min_delta: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub env: EpisodeConfig,
    pub flags: FeatureFlags,
    pub arch: PolicyArch,
    pub gamma: f64,
    pub lambda: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub entropy_coef: f64,
    pub minibatch_size: usize,
    pub updates_per_epoch: usize,
    pub max_epochs: usize,
    pub early_stopping: EarlyStopping,
    pub reward_mode: RewardMode,
    pub reward_scope: RewardScope,
    pub landscape_mode: LandscapeMode,
    pub curriculum: Vec<CurriculumStep>,
    pub normalize_advantages: bool,
    /// Multiplier applied to rewards before advantage and value estimation.
    pub reward_scale: f64,
    /// Write a checkpoint every this many epochs (0 = only the final one).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            env: EpisodeConfig::default(),
            flags: FeatureFlags::PIRF,
            arch: PolicyArch::default(),
            gamma: 0.98,
            lambda: 0.95,
            lr_actor: 1.0e-5,
            lr_critic: 3.0e-5,
            entropy_coef: 3.0e-4,
            minibatch_size: 1000,
            updates_per_epoch: 20,
            max_epochs: 10_000,
            early_stopping: EarlyStopping::default(),
            reward_mode: RewardMode::PerStepPayoff,
            reward_scope: RewardScope::Individual,
            landscape_mode: LandscapeMode::FreshPerEpoch,
            curriculum: vec![],
            normalize_advantages: true,
            reward_scale: 0.01,
            checkpoint_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if !(self.lr_actor > 0.0 && self.lr_critic > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.entropy_coef >= 0.0) || !(self.reward_scale > 0.0) {
            return bad("entropy coefficient must be non-negative and reward scale positive");
        }
        if self.minibatch_size == 0 || self.max_epochs == 0 {
            return bad("minibatch size and max epochs must be positive");
        }
        if let LandscapeMode::FixedSet { count: 0 } = self.landscape_mode {
            return bad("fixed landscape set must not be empty");
        }
        if self.curriculum.windows(2).any(|w| w[1].epoch <= w[0].epoch) {
            return bad("curriculum epochs must be strictly increasing");
        }
        Ok(())
    }

    /// Environment in force at `epoch` after curriculum switches.
    pub fn env_at(&self, epoch: usize) -> EpisodeConfig {
        let mut env = self.env.clone();
        if let Some(step) = self.curriculum.iter().rev().find(|c| c.epoch <= epoch) {
            env.k = step.k;
        }
        env
    }

    /// Seed of the landscape used at `epoch`.
    pub fn landscape_seed(&self, seed: u64, epoch: usize) -> u64 {
        let slot = match self.landscape_mode {
            LandscapeMode::FreshPerEpoch => epoch,
            LandscapeMode::FixedSet { count } => epoch % count,
        };
        rng::derive_seed(seed, &[tag::LANDSCAPE, slot as u64])
    }
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub observation: ObservationMatrix,
    pub action: Solution,
    pub behavior_log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub terminal: bool,
    pub agent: usize,
    pub step: usize,
    pub advantage: f64,
    pub target: f64,
}

#[derive(Debug, Clone, Default)]
pub struct EpochBuffer {
    pub transitions: Vec<Transition>,
}

impl EpochBuffer {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub avg_mean_payoff: f64,
    pub entropy: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
}

pub const METRICS_HEADER: &str = "epoch,avg_mean_payoff,entropy,actor_loss,critic_loss";

impl EpochMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.epoch, self.avg_mean_payoff, self.entropy, self.actor_loss, self.critic_loss
        )
    }
}

pub fn metrics_csv(rows: &[EpochMetrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

/// Advantages and return targets with a zero bootstrap after the last step.
pub fn compute_gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if rewards.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: rewards.len(),
            actual: values.len(),
        });
    }
    let t_len = rewards.len();
    let mut adv = vec![0.0; t_len];
    let mut acc = 0.0;
    for t in (0..t_len).rev() {
        let next = if t + 1 < t_len { values[t + 1] } else { 0.0 };
        let delta = rewards[t] + gamma * next - values[t];
        acc = delta + gamma * lambda * acc;
        adv[t] = acc;
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, targets))
}

/// One actor training example.
#[derive(Debug, Clone, Copy)]
pub struct ActorSample<'a> {
    pub observation: &'a ObservationMatrix,
    pub action: &'a Solution,
    pub behavior_log_prob: f64,
    pub advantage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActorLoss {
    /// `-mean(ratio * advantage) - entropy_coef * mean(entropy)`.
    pub total: f64,
    pub mean_ratio: f64,
    pub mean_entropy: f64,
}

const CHUNK: usize = 64;

fn reduce_chunks(parts: Vec<(f64, Vec<f64>, f64, f64)>, n_params: usize) -> (f64, Vec<f64>, f64, f64) {
    let mut grad = vec![0.0; n_params];
    let (mut loss, mut a, mut b) = (0.0, 0.0, 0.0);
    for (l, g, x, y) in parts {
        loss += l;
        a += x;
        b += y;
        for (acc, v) in grad.iter_mut().zip(&g) {
            *acc += v;
        }
    }
    (loss, grad, a, b)
}

/// Actor loss and its gradient with respect to the actor parameters.
///
/// Samples are processed in fixed chunks whose partial sums are combined in
/// order, so the result does not depend on the execution mode.
pub fn actor_loss_grad(
    policy: &Policy,
    samples: &[ActorSample<'_>],
    entropy_coef: f64,
    exec: Execution,
) -> Result<(ActorLoss, Vec<f64>)> {
    let b = samples.len();
    if b == 0 {
        return Err(Error::invalid("empty minibatch"));
    }
    let n = policy.n_loci();
    let np = policy.actor.n_params();
    let chunks = b.div_ceil(CHUNK);
    let parts = exec.try_map(chunks, |c| -> Result<_> {
        let mut grad = vec![0.0; np];
        let (mut loss, mut ratio_sum, mut ent_sum) = (0.0, 0.0, 0.0);
        let mut dlogits = vec![0.0; 2 * n];
        for s in &samples[c * CHUNK..((c + 1) * CHUNK).min(b)] {
            if s.observation.n_loci() != n || s.action.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: s.observation.n_loci(),
                });
            }
            let (logits, tape) = policy.actor.forward_tape(s.observation.data())?;
            let lp = policy::log_prob(&logits, s.action);
            let ratio = (lp - s.behavior_log_prob).exp();
            let ent = policy::logit_entropy(&logits);
            loss += -ratio * s.advantage / b as f64 - entropy_coef * ent / b as f64;
            ratio_sum += ratio;
            ent_sum += ent;
            for d in 0..n {
                let delta = logits[n + d] - logits[d];
                let p = policy::sigmoid(delta);
                let dlp = s.action.bit(d) as f64 - p;
                let dent = -delta * p * (1.0 - p) / n as f64;
                let g = -ratio * s.advantage * dlp / b as f64 - entropy_coef * dent / b as f64;
                dlogits[n + d] = g;
                dlogits[d] = -g;
            }
            policy.actor.backward(&tape, &dlogits, &mut grad);
        }
        Ok((loss, grad, ratio_sum, ent_sum))
    })?;
    let (total, grad, ratio_sum, ent_sum) = reduce_chunks(parts, np);
    if !total.is_finite() {
        return Err(Error::Numerical(format!("actor loss is {total}")));
    }
    Ok((
        ActorLoss {
            total,
            mean_ratio: ratio_sum / b as f64,
            mean_entropy: ent_sum / b as f64,
        },
        grad,
    ))
}

/// Mean squared error of the critic against `targets`, and its gradient.
pub fn critic_loss_grad(
    policy: &Policy,
    observations: &[&ObservationMatrix],
    targets: &[f64],
    exec: Execution,
) -> Result<(f64, Vec<f64>)> {
    let b = observations.len();
    if b == 0 || targets.len() != b {
        return Err(Error::DimensionMismatch {
            expected: b,
            actual: targets.len(),
        });
    }
    let np = policy.critic.n_params();
    let chunks = b.div_ceil(CHUNK);
    let parts = exec.try_map(chunks, |c| -> Result<_> {
        let mut grad = vec![0.0; np];
        let mut loss = 0.0;
        for i in c * CHUNK..((c + 1) * CHUNK).min(b) {
            let (v, tape) = policy.critic.forward_tape(observations[i].data())?;
            let err = v[0] - targets[i];
            loss += err * err / b as f64;
            policy.critic.backward(&tape, &[2.0 * err / b as f64], &mut grad);
        }
        Ok((loss, grad, 0.0, 0.0))
    })?;
    let (loss, grad, _, _) = reduce_chunks(parts, np);
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("critic loss is {loss}")));
    }
    Ok((loss, grad))
}

/// Adam optimizer state for one parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateReport {
    pub actor: ActorLoss,
    pub critic_loss: f64,
}

fn normalized(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    values.iter().map(|a| (a - mean) / (sd + 1e-8)).collect()
}

/// Drives training for one configuration and seed.
pub struct Trainer {
    cfg: TrainConfig,
    topology: Topology,
    seed: u64,
    exec: Execution,
    policy: Policy,
    actor_opt: Adam,
    critic_opt: Adam,
    epoch: usize,
    history: Vec<EpochMetrics>,
    best_average: f64,
    best_epoch: usize,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, topology: Topology, seed: u64, exec: Execution) -> Result<Self> {
        let policy = Policy::new(cfg.env.n_loci, cfg.flags, cfg.arch, seed)?;
        Self::with_policy(cfg, topology, seed, exec, policy)
    }

    /// Continues training from an existing policy.
    pub fn with_policy(cfg: TrainConfig, topology: Topology, seed: u64, exec: Execution, policy: Policy) -> Result<Self> {
        cfg.validate()?;
        cfg.env.validate(&topology)?;
        if policy.n_loci() != cfg.env.n_loci || policy.flags() != cfg.flags {
            return Err(Error::Config("policy does not match the training environment".into()));
        }
        Ok(Trainer {
            actor_opt: Adam::new(policy.actor.n_params(), cfg.lr_actor),
            critic_opt: Adam::new(policy.critic.n_params(), cfg.lr_critic),
            cfg,
            topology,
            seed,
            exec,
            policy,
            epoch: 0,
            history: vec![],
            best_average: f64::NEG_INFINITY,
            best_epoch: 0,
        })
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn history(&self) -> &[EpochMetrics] {
        &self.history
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn landscape_for(&self, epoch: usize) -> Result<NkLandscape> {
        self.cfg.env_at(epoch).landscape(self.cfg.landscape_seed(self.seed, epoch))
    }

    /// Runs one on-policy episode and fills a buffer with GAE targets.
    /// Returns the buffer, the episode's average mean payoff and mean entropy.
    pub fn collect_epoch(&self) -> Result<(EpochBuffer, f64, f64)> {
        let env = EpisodeConfig {
            record_agents: true,
            ..self.cfg.env_at(self.epoch)
        };
        let land = Arc::new(self.landscape_for(self.epoch)?);
        let ep_seed = rng::derive_seed(self.seed, &[tag::EPISODE, self.epoch as u64]);
        let (traj, records) = run_episode_with(
            &env,
            &self.topology,
            land,
            &Recording(&self.policy),
            ep_seed,
            self.exec,
        )?;
        let per_agent = traj.per_agent_payoff.as_ref().expect("recorded");
        let (n, steps) = (env.n_agents, env.steps);

        let reward = |i: usize, t: usize| -> f64 {
            let pay = match self.cfg.reward_scope {
                RewardScope::Individual => per_agent[i][t],
                RewardScope::GroupAveraged => traj.mean_payoff[t],
            };
            match self.cfg.reward_mode {
                RewardMode::PerStepPayoff => pay,
                RewardMode::FinalPayoffScaled if t + 1 == steps => pay * steps as f64,
                RewardMode::FinalPayoffScaled => 0.0,
            }
        };

        // values for every (agent, step), agent-major
        let policy = &self.policy;
        let values = self.exec.try_map(n * steps, |k| {
            let (i, t) = (k / steps, k % steps);
            policy.value(&records[t][i].observation)
        })?;

        let mut transitions = Vec::with_capacity(n * steps);
        let mut entropy = 0.0;
        for i in 0..n {
            let rewards: Vec<f64> = (0..steps).map(|t| reward(i, t)).collect();
            let scaled: Vec<f64> = rewards.iter().map(|r| r * self.cfg.reward_scale).collect();
            let vals = &values[i * steps..(i + 1) * steps];
            let (adv, targets) = compute_gae(&scaled, vals, self.cfg.gamma, self.cfg.lambda)?;
            for t in 0..steps {
                let d = &records[t][i];
                entropy += d.entropy;
                transitions.push(Transition {
                    observation: d.observation.clone(),
                    action: d.action,
                    behavior_log_prob: d.log_prob,
                    reward: rewards[t],
                    value: vals[t],
                    terminal: t + 1 == steps,
                    agent: i,
                    step: t,
                    advantage: adv[t],
                    target: targets[t],
                });
            }
        }
        let entropy = entropy / (n * steps) as f64;
        Ok((EpochBuffer { transitions }, traj.average_mean_payoff(), entropy))
    }

    /// One Adam step for actor and critic on the given buffer entries.
    pub fn update_step(&mut self, buffer: &EpochBuffer, batch: &[usize]) -> Result<UpdateReport> {
        let trs: Vec<&Transition> = batch.iter().map(|&i| &buffer.transitions[i]).collect();
        let raw: Vec<f64> = trs.iter().map(|t| t.advantage).collect();
        let adv = if self.cfg.normalize_advantages {
            normalized(&raw)
        } else {
            raw
        };
        let samples: Vec<ActorSample<'_>> = trs
            .iter()
            .zip(&adv)
            .map(|(t, &a)| ActorSample {
                observation: &t.observation,
                action: &t.action,
                behavior_log_prob: t.behavior_log_prob,
                advantage: a,
            })
            .collect();
        let (actor, ga) = actor_loss_grad(&self.policy, &samples, self.cfg.entropy_coef, self.exec)?;
        let obs: Vec<&ObservationMatrix> = trs.iter().map(|t| &t.observation).collect();
        let targets: Vec<f64> = trs.iter().map(|t| t.target).collect();
        let (critic_loss, gc) = critic_loss_grad(&self.policy, &obs, &targets, self.exec)?;
        self.actor_opt.step(self.policy.actor.params_mut(), &ga);
        self.critic_opt.step(self.policy.critic.params_mut(), &gc);
        Ok(UpdateReport { actor, critic_loss })
    }

    /// Collects one epoch and trains on it.
    pub fn run_epoch(&mut self) -> Result<EpochMetrics> {
        let (buffer, avg, entropy) = self.collect_epoch()?;
        let mut mb_rng = rng::stream(self.seed, &[tag::MINIBATCH, self.epoch as u64]);
        let size = self.cfg.minibatch_size.min(buffer.len());
        let (mut al, mut cl) = (0.0, 0.0);
        for _ in 0..self.cfg.updates_per_epoch {
            let batch = index::sample(&mut mb_rng, buffer.len(), size).into_vec();
            let rep = self.update_step(&buffer, &batch)?;
            al += rep.actor.total;
            cl += rep.critic_loss;
        }
        let u = self.cfg.updates_per_epoch.max(1) as f64;
        let m = EpochMetrics {
            epoch: self.epoch,
            avg_mean_payoff: avg,
            entropy,
            actor_loss: al / u,
            critic_loss: cl / u,
        };
        self.history.push(m);
        self.epoch += 1;
        Ok(m)
    }

    /// True once the moving average has stalled for the configured patience.
    pub fn should_stop(&mut self) -> bool {
        let es = self.cfg.early_stopping;
        if !es.enabled || self.history.len() < es.window {
            return false;
        }
        let tail = &self.history[self.history.len() - es.window..];
        let avg = tail.iter().map(|m| m.avg_mean_payoff).sum::<f64>() / es.window as f64;
        if avg > self.best_average + es.min_delta || self.best_average == f64::NEG_INFINITY {
            self.best_average = avg;
            self.best_epoch = self.epoch;
            return false;
        }
        self.epoch - self.best_epoch >= es.patience
    }

    /// Trains until `max_epochs` or early stopping. With `out`, appends each
    /// epoch to `metrics.csv` and writes checkpoints under `checkpoints/`.
    pub fn run(&mut self, out: Option<&Path>) -> Result<TrainSummary> {
        let mut log = match out {
            Some(dir) => Some(MetricsLog::create(dir)?),
            None => None,
        };
        let mut stopped_early = false;
        while self.epoch < self.cfg.max_epochs {
            let m = self.run_epoch()?;
            if let Some(l) = log.as_mut() {
                l.append(&m)?;
            }
            if let Some(dir) = out {
                let every = self.cfg.checkpoint_every;
                if every > 0 && self.epoch % every == 0 {
                    self.write_checkpoint(&checkpoint_path(dir, self.epoch))?;
                }
            }
            if self.should_stop() {
                stopped_early = true;
                break;
            }
        }
        if let Some(dir) = out {
            self.write_checkpoint(&dir.join("final.json"))?;
        }
        Ok(TrainSummary {
            epochs: self.epoch,
            stopped_early,
        })
    }

    pub fn write_checkpoint(&self, path: &Path) -> Result<()> {
        let echo = serde_json::to_value(&self.cfg)?;
        self.policy.to_checkpoint(Some(self.epoch), Some(echo)).save(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainSummary {
    pub epochs: usize,
    pub stopped_early: bool,
}

pub fn checkpoint_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join("checkpoints").join(format!("epoch_{epoch:06}.json"))
}

/// Append-only per-epoch metrics file.
struct MetricsLog {
    file: File,
    path: PathBuf,
}

impl MetricsLog {
    fn create(dir: &Path) -> Result<Self> {
        let ck = dir.join("checkpoints");
        std::fs::create_dir_all(&ck).map_err(|e| Error::io(&ck, e))?;
        let path = dir.join("metrics.csv");
        let mut file = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        writeln!(file, "{METRICS_HEADER}").map_err(|e| Error::io(&path, e))?;
        Ok(MetricsLog { file, path })
    }

    fn append(&mut self, m: &EpochMetrics) -> Result<()> {
        writeln!(self.file, "{}", m.csv_row()).map_err(|e| Error::io(&self.path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn gae_oracle(r: &[f64], v: &[f64], g: f64, l: f64) -> Vec<f64> {
        let t_len = r.len();
        (0..t_len)
            .map(|t| {
                (t..t_len)
                    .map(|j| {
                        let next = if j + 1 < t_len { v[j + 1] } else { 0.0 };
                        (g * l).powi((j - t) as i32) * (r[j] + g * next - v[j])
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn gae_cases() {
        let (a, ret) = compute_gae(&[3.0], &[1.25], 0.98, 0.95).unwrap();
        assert_eq!(a, vec![1.75]);
        assert_eq!(ret, vec![3.0]);
        let r = [1.0, 2.0, 0.5];
        let v = [0.3, 0.7, 0.2];
        let (a, _) = compute_gae(&r, &v, 0.9, 0.0).unwrap();
        assert_eq!(a, vec![1.0 + 0.9 * 0.7 - 0.3, 2.0 + 0.9 * 0.2 - 0.7, 0.5 - 0.2]);
        let mut rng = rng::stream(1, &[]);
        for _ in 0..100 {
            let r: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..100.0)).collect();
            let v: Vec<f64> = (0..10).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let (a, ret) = compute_gae(&r, &v, 0.98, 0.95).unwrap();
            let o = gae_oracle(&r, &v, 0.98, 0.95);
            for t in 0..10 {
                assert!((a[t] - o[t]).abs() < 1e-10);
                assert_eq!(ret[t], a[t] + v[t]);
            }
        }
        assert!(compute_gae(&[1.0], &[], 0.9, 0.9).is_err());
    }

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            env: EpisodeConfig {
                n_loci: 6,
                k: 2,
                n_agents: 8,
                sample_size: 3,
                steps: 5,
                ..Default::default()
            },
            arch: PolicyArch {
                embed: 8,
                heads: 2,
                hidden: 8,
                actor_output_scale: 0.5,
            },
            minibatch_size: 16,
            updates_per_epoch: 2,
            max_epochs: 3,
            ..Default::default()
        }
    }

    #[test]
    fn buffer_shape_and_rewards() {
        let t = Trainer::new(tiny_cfg(), Topology::complete(8).unwrap(), 3, Execution::Sequential).unwrap();
        let (buf, avg, ent) = t.collect_epoch().unwrap();
        assert_eq!(buf.len(), 40);
        assert_eq!(buf.transitions.iter().filter(|x| x.terminal).count(), 8);
        assert!(buf.transitions.iter().all(|x| (0.0..=100.0).contains(&x.reward)));
        assert!(avg > 0.0 && ent > 0.0);
        // per-agent rewards never decrease on a static landscape
        for a in buf.transitions.chunks(5) {
            assert!(a.windows(2).all(|w| w[1].reward >= w[0].reward));
        }
    }

    #[test]
    fn group_and_final_rewards() {
        let topo = Topology::complete(8).unwrap();
        let base = Trainer::new(tiny_cfg(), topo.clone(), 3, Execution::Sequential).unwrap();
        let (ind, ..) = base.collect_epoch().unwrap();
        let cfg = TrainConfig {
            reward_scope: RewardScope::GroupAveraged,
            ..tiny_cfg()
        };
        let g = Trainer::new(cfg, topo.clone(), 3, Execution::Sequential).unwrap();
        let (grp, ..) = g.collect_epoch().unwrap();
        for t in 0..5 {
            let mean = (0..8).map(|i| ind.transitions[i * 5 + t].reward).sum::<f64>() / 8.0;
            for i in 0..8 {
                assert!((grp.transitions[i * 5 + t].reward - mean).abs() < 1e-12);
            }
        }
        let cfg = TrainConfig {
            reward_mode: RewardMode::FinalPayoffScaled,
            ..tiny_cfg()
        };
        let f = Trainer::new(cfg, topo, 3, Execution::Sequential).unwrap();
        let (fin, ..) = f.collect_epoch().unwrap();
        for (a, b) in fin.transitions.iter().zip(&ind.transitions) {
            let want = if a.terminal { b.reward * 5.0 } else { 0.0 };
            assert_eq!(a.reward, want);
        }
    }

    #[test]
    fn first_update_has_unit_ratios() {
        let mut t = Trainer::new(tiny_cfg(), Topology::complete(8).unwrap(), 4, Execution::Sequential).unwrap();
        let (buf, ..) = t.collect_epoch().unwrap();
        let batch: Vec<usize> = (0..buf.len()).collect();
        let rep = t.update_step(&buf, &batch).unwrap();
        assert_eq!(rep.actor.mean_ratio, 1.0);
        let rep2 = t.update_step(&buf, &batch).unwrap();
        assert_ne!(rep2.actor.mean_ratio, 1.0);
    }

    #[test]
    fn zero_advantage_and_entropy_give_zero_gradient() {
        let t = Trainer::new(tiny_cfg(), Topology::complete(8).unwrap(), 5, Execution::Sequential).unwrap();
        let (buf, ..) = t.collect_epoch().unwrap();
        let samples: Vec<ActorSample<'_>> = buf
            .transitions
            .iter()
            .map(|x| ActorSample {
                observation: &x.observation,
                action: &x.action,
                behavior_log_prob: x.behavior_log_prob,
                advantage: 0.0,
            })
            .collect();
        let (_, g) = actor_loss_grad(t.policy(), &samples, 0.0, Execution::Sequential).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn landscape_modes_and_curriculum() {
        let topo = Topology::complete(8).unwrap();
        let cfg = TrainConfig {
            landscape_mode: LandscapeMode::FixedSet { count: 1 },
            ..tiny_cfg()
        };
        let t = Trainer::new(cfg, topo.clone(), 6, Execution::Sequential).unwrap();
        assert_eq!(t.landscape_for(0).unwrap(), t.landscape_for(7).unwrap());
        let t = Trainer::new(tiny_cfg(), topo.clone(), 6, Execution::Sequential).unwrap();
        assert_ne!(t.landscape_for(0).unwrap(), t.landscape_for(1).unwrap());
        let cfg = TrainConfig {
            curriculum: vec![CurriculumStep { epoch: 0, k: 1 }, CurriculumStep { epoch: 1000, k: 4 }],
            ..tiny_cfg()
        };
        assert_eq!(cfg.env_at(999).k, 1);
        assert_eq!(cfg.env_at(1000).k, 4);
        assert_eq!(cfg.env_at(5000).k, 4);
        let bad = TrainConfig {
            gamma: 0.0,
            ..tiny_cfg()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn training_is_reproducible_across_modes() {
        let topo = Topology::complete(8).unwrap();
        let mut a = Trainer::new(tiny_cfg(), topo.clone(), 7, Execution::Sequential).unwrap();
        let mut b = Trainer::new(tiny_cfg(), topo, 7, Execution::Parallel).unwrap();
        let dir = tempfile::tempdir().unwrap();
        a.run(Some(dir.path())).unwrap();
        b.run(None).unwrap();
        assert_eq!(a.history(), b.history());
        assert_eq!(a.policy(), b.policy());
        let text = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(text, metrics_csv(a.history()));
        assert!(dir.path().join("final.json").exists());
        // refuses to append to an existing log
        let mut c = Trainer::new(tiny_cfg(), Topology::complete(8).unwrap(), 7, Execution::Sequential).unwrap();
        assert!(c.run(Some(dir.path())).is_err());
    }

    #[test]
    fn early_stopping_triggers_on_plateau() {
        let cfg = TrainConfig {
            early_stopping: EarlyStopping {
                enabled: true,
                window: 2,
                patience: 3,
                min_delta: 1e9,
            },
            max_epochs: 50,
            ..tiny_cfg()
        };
        let mut t = Trainer::new(cfg, Topology::complete(8).unwrap(), 8, Execution::Sequential).unwrap();
        let s = t.run(None).unwrap();
        assert!(s.stopped_early);
        assert_eq!(s.epochs, 5);
    }
}

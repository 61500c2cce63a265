//! Population episodes and batch statistics.
//!
//! Updates are synchronous: every agent reads the time-`t` snapshot, and all
//! new states are committed together. Each agent owns a random stream keyed
//! by (episode seed, agent id), so results do not depend on execution order.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::landscape::{Interaction, NkLandscape, Solution};
use crate::rng::{self, tag, StreamRng};
use crate::strategy::{strategy_step, Observed, StrategySpec};
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LandscapeSchedule {
    #[default]
    Static,
    PeriodicReset { period: usize, count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub n_loci: usize,
    pub k: usize,
    /// Landscape convention; the default counts `K` as the number of other loci.
    pub interaction: Interaction,
    pub n_agents: usize,
    pub sample_size: usize,
    pub steps: usize,
    pub schedule: LandscapeSchedule,
    /// Keep the full agents-by-steps payoff matrix in the trajectory.
    pub record_agents: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            n_loci: 15,
            k: 7,
            interaction: Interaction::Exclusive,
            n_agents: 100,
            sample_size: 3,
            steps: 200,
            schedule: LandscapeSchedule::Static,
            record_agents: false,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self, topology: &Topology) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if self.sample_size == 0 {
            return Err(Error::Config("sample size must be at least 1".into()));
        }
        if topology.n_nodes() != self.n_agents {
            return Err(Error::Config(format!(
                "topology has {} nodes but n_agents = {}",
                topology.n_nodes(),
                self.n_agents
            )));
        }
        if topology.min_degree() < self.sample_size {
            return Err(Error::Config(format!(
                "minimum degree {} is below sample size {}",
                topology.min_degree(),
                self.sample_size
            )));
        }
        if let LandscapeSchedule::PeriodicReset { period, count } = self.schedule {
            if period == 0 || period * count != self.steps {
                return Err(Error::Config(format!(
                    "reset schedule {period} x {count} does not cover {} steps",
                    self.steps
                )));
            }
        }
        Ok(())
    }

    /// Generates a landscape for this environment.
    pub fn landscape(&self, seed: u64) -> Result<NkLandscape> {
        NkLandscape::generate_with(self.n_loci, self.k, self.interaction, seed)
    }

    fn is_reset_step(&self, t: usize) -> bool {
        match self.schedule {
            LandscapeSchedule::Static => false,
            LandscapeSchedule::PeriodicReset { period, .. } => t > 0 && t % period == 0,
        }
    }
}

/// Everything an agent sees when choosing its next state.
pub struct StepContext<'a> {
    pub agent: usize,
    pub step: usize,
    pub current: Observed,
    pub sample: &'a [Observed],
    pub landscape: &'a NkLandscape,
}

/// A rule mapping an agent's view to its next (solution, payoff).
pub trait Learner: Sync {
    /// Per-step side information kept for the caller (e.g. training transitions).
    type Record: Send;

    fn step(&self, ctx: &StepContext<'_>, rng: &mut StreamRng) -> Result<(Observed, Self::Record)>;
}

impl Learner for StrategySpec {
    type Record = ();

    fn step(&self, ctx: &StepContext<'_>, rng: &mut StreamRng) -> Result<(Observed, ())> {
        Ok((strategy_step(self, ctx.current, ctx.sample, ctx.landscape, rng)?, ()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Population mean payoff after each of the `L` commits.
    pub mean_payoff: Vec<f64>,
    /// `per_agent_payoff[i][t]`, when recorded.
    pub per_agent_payoff: Option<Vec<Vec<f64>>>,
    /// Steps at which the landscape was regenerated.
    pub reset_steps: Vec<usize>,
    /// Population states after the last commit.
    pub final_states: Vec<Observed>,
}

impl Trajectory {
    pub fn average_mean_payoff(&self) -> f64 {
        self.mean_payoff.iter().sum::<f64>() / self.mean_payoff.len() as f64
    }
}

/// Draws `k` distinct positions from `0..n` (Floyd's algorithm).
fn sample_distinct(rng: &mut StreamRng, n: usize, k: usize, out: &mut Vec<usize>) {
    out.clear();
    for j in n - k..n {
        let t = rng.gen_range(0..=j);
        if out.contains(&t) {
            out.push(j);
        } else {
            out.push(t);
        }
    }
}

/// Runs one episode and returns the trajectory plus per-step records (`records[t][i]`).
pub fn run_episode_with<L: Learner>(
    cfg: &EpisodeConfig,
    topology: &Topology,
    landscape: Arc<NkLandscape>,
    learner: &L,
    seed: u64,
    exec: Execution,
) -> Result<(Trajectory, Vec<Vec<L::Record>>)> {
    cfg.validate(topology)?;
    if landscape.n_loci() != cfg.n_loci {
        return Err(Error::DimensionMismatch {
            expected: cfg.n_loci,
            actual: landscape.n_loci(),
        });
    }
    let n = cfg.n_agents;
    let mut landscape = landscape;
    let mut rngs: Vec<StreamRng> = (0..n).map(|i| rng::stream(seed, &[tag::AGENT, i as u64])).collect();
    let mut states: Vec<Observed> = (0..n)
        .map(|i| {
            let mut r = rng::stream(seed, &[tag::INIT, i as u64]);
            let s = Solution::random(cfg.n_loci, &mut r);
            (s, landscape.payoff_unchecked(&s))
        })
        .collect();

    let mut mean_payoff = Vec::with_capacity(cfg.steps);
    let mut per_agent = cfg.record_agents.then(|| vec![Vec::with_capacity(cfg.steps); n]);
    let mut reset_steps = vec![];
    let mut records = Vec::with_capacity(cfg.steps);

    for t in 0..cfg.steps {
        if cfg.is_reset_step(t) {
            let s = rng::derive_seed(seed, &[tag::RESET, t as u64]);
            landscape = Arc::new(cfg.landscape(s)?);
            for st in states.iter_mut() {
                st.1 = landscape.payoff_unchecked(&st.0);
            }
            reset_steps.push(t);
        }
        let snapshot = &states;
        let land = &*landscape;
        let results = exec.map_mut(&mut rngs, |i, rng| {
            let nbrs = topology.neighbors(i);
            let mut idx = Vec::with_capacity(cfg.sample_size);
            sample_distinct(rng, nbrs.len(), cfg.sample_size, &mut idx);
            let sample: Vec<Observed> = idx.iter().map(|&j| snapshot[nbrs[j]]).collect();
            let ctx = StepContext {
                agent: i,
                step: t,
                current: snapshot[i],
                sample: &sample,
                landscape: land,
            };
            learner.step(&ctx, rng)
        });
        let mut step_records = Vec::with_capacity(n);
        let mut next = Vec::with_capacity(n);
        for r in results {
            let (obs, rec) = r?;
            next.push(obs);
            step_records.push(rec);
        }
        states = next;
        let mean = states.iter().map(|s| s.1).sum::<f64>() / n as f64;
        mean_payoff.push(mean);
        if let Some(pa) = per_agent.as_mut() {
            for (row, s) in pa.iter_mut().zip(&states) {
                row.push(s.1);
            }
        }
        records.push(step_records);
    }
    Ok((
        Trajectory {
            mean_payoff,
            per_agent_payoff: per_agent,
            reset_steps,
            final_states: states,
        },
        records,
    ))
}

pub fn run_episode<L: Learner>(
    cfg: &EpisodeConfig,
    topology: &Topology,
    landscape: Arc<NkLandscape>,
    learner: &L,
    seed: u64,
    exec: Execution,
) -> Result<Trajectory> {
    run_episode_with(cfg, topology, landscape, learner, seed, exec).map(|(t, _)| t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub mean_curve: Vec<f64>,
    /// Standard error of the mean at each step, across episodes.
    pub sem_curve: Vec<f64>,
    pub average_mean_payoff: f64,
    /// Standard error of the per-episode average mean payoff.
    pub average_sem: f64,
    pub final_mean_payoff: f64,
    pub n_episodes: usize,
}

impl BatchStats {
    pub fn from_trajectories(trajs: &[Trajectory]) -> Self {
        let m = trajs.len();
        let steps = trajs[0].mean_payoff.len();
        let mut mean_curve = vec![0.0; steps];
        for t in trajs {
            for (acc, v) in mean_curve.iter_mut().zip(&t.mean_payoff) {
                *acc += v;
            }
        }
        for v in mean_curve.iter_mut() {
            *v /= m as f64;
        }
        let mut var = vec![0.0; steps];
        for t in trajs {
            for ((acc, v), mu) in var.iter_mut().zip(&t.mean_payoff).zip(&mean_curve) {
                *acc += (v - mu).powi(2);
            }
        }
        let sem_curve = var.iter().map(|s| sem(*s, m)).collect();
        let avgs: Vec<f64> = trajs.iter().map(Trajectory::average_mean_payoff).collect();
        let average_mean_payoff = mean_curve.iter().sum::<f64>() / steps as f64;
        let ss: f64 = avgs.iter().map(|a| (a - average_mean_payoff).powi(2)).sum();
        BatchStats {
            final_mean_payoff: mean_curve[steps - 1],
            mean_curve,
            sem_curve,
            average_mean_payoff,
            average_sem: sem(ss, m),
            n_episodes: m,
        }
    }

    /// CSV with columns `step,mean_payoff,sem`; steps are numbered from 1.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("step,mean_payoff,sem\n");
        for (t, (m, s)) in self.mean_curve.iter().zip(&self.sem_curve).enumerate() {
            let _ = writeln!(out, "{},{},{}", t + 1, m, s);
        }
        out
    }

    pub fn write_curve_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.curve_csv()).map_err(|e| Error::io(path, e))
    }
}

fn sem(sum_sq: f64, m: usize) -> f64 {
    if m < 2 {
        0.0
    } else {
        (sum_sq / (m - 1) as f64).sqrt() / (m as f64).sqrt()
    }
}

/// Landscape used by batch slot `index` under `seed`.
pub fn batch_landscape(cfg: &EpisodeConfig, seed: u64, index: usize) -> Result<NkLandscape> {
    cfg.landscape(rng::derive_seed(seed, &[tag::LANDSCAPE, index as u64]))
}

/// Runs `n_landscapes * reps_per_landscape` episodes, parallel across episodes.
pub fn run_batch<L: Learner>(
    cfg: &EpisodeConfig,
    topology: &Topology,
    learner: &L,
    n_landscapes: usize,
    reps_per_landscape: usize,
    seed: u64,
    exec: Execution,
) -> Result<BatchStats> {
    if n_landscapes == 0 || reps_per_landscape == 0 {
        return Err(Error::Config("batch needs at least one landscape and one repetition".into()));
    }
    cfg.validate(topology)?;
    let lands: Vec<Arc<NkLandscape>> = exec
        .try_map(n_landscapes, |l| batch_landscape(cfg, seed, l))?
        .into_iter()
        .map(Arc::new)
        .collect();
    let trajs = exec.try_map(n_landscapes * reps_per_landscape, |e| {
        let (l, r) = (e / reps_per_landscape, e % reps_per_landscape);
        let ep_seed = rng::derive_seed(seed, &[tag::EPISODE, l as u64, r as u64]);
        run_episode(
            cfg,
            topology,
            lands[l].clone(),
            learner,
            ep_seed,
            Execution::Sequential,
        )
    })?;
    Ok(BatchStats::from_trajectories(&trajs))
}

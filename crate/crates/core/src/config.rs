//! Experiment configuration files and named presets.
//!
//! A configuration is assembled by deep-merging TOML tables: built-in
//! defaults, then presets in the order given, then an optional user file.
//! Tables that carry a `kind` key are replaced rather than merged when the
//! kind changes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::{self, tag};
use crate::sim::EpisodeConfig;
use crate::strategy::StrategySpec;
use crate::topology::{validate_real_network, Topology};
use crate::trainer::TrainConfig;

pub const SCHEMA_VERSION: u32 = 1;

const PRESETS: &[(&str, &str)] = &[
    ("default", include_str!("../presets/default.toml")),
    ("maxmc", include_str!("../presets/maxmc.toml")),
    ("l50r4", include_str!("../presets/l50r4.toml")),
    ("k3l400", include_str!("../presets/k3l400.toml")),
    ("k11", include_str!("../presets/k11.toml")),
    ("k3k11-e1000", include_str!("../presets/k3k11-e1000.toml")),
    ("k3k11-e2500", include_str!("../presets/k3k11-e2500.toml")),
    ("k3k11-e5500", include_str!("../presets/k3k11-e5500.toml")),
    ("fixed1", include_str!("../presets/fixed1.toml")),
    ("fixed10", include_str!("../presets/fixed10.toml")),
    ("group-reward", include_str!("../presets/group-reward.toml")),
    ("final-reward", include_str!("../presets/final-reward.toml")),
    ("pir", include_str!("../presets/pir.toml")),
    ("pi", include_str!("../presets/pi.toml")),
    ("reduced", include_str!("../presets/reduced.toml")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}

pub fn preset_text(name: &str) -> Result<&'static str> {
    let key = name.to_ascii_lowercase();
    PRESETS
        .iter()
        .find(|p| p.0 == key)
        .map(|p| p.1)
        .ok_or_else(|| Error::Config(format!("unknown preset {name:?}; available: {}", preset_names().join(", "))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    Complete,
    RandomRegular {
        degree: usize,
    },
    MaxClustering {
        degree: usize,
        swap_budget: usize,
    },
    /// An edge list reduced to its 3-core; the agent count follows the core size.
    EdgeList {
        path: PathBuf,
        #[serde(default = "default_max_nodes")]
        max_nodes: usize,
    },
}

fn default_max_nodes() -> usize {
    1000
}

impl TopologySpec {
    pub fn build(&self, n_agents: usize, seed: u64) -> Result<Topology> {
        let s = rng::derive_seed(seed, &[tag::TOPOLOGY]);
        match self {
            TopologySpec::Complete => Topology::complete(n_agents),
            TopologySpec::RandomRegular { degree } => Topology::random_regular(n_agents, *degree, s),
            TopologySpec::MaxClustering { degree, swap_budget } => {
                Topology::max_mean_clustering(n_agents, *degree, *swap_budget, s)
            }
            TopologySpec::EdgeList { path, max_nodes } => {
                let original = Topology::load_edge_list(path)?;
                let core = original.k_core(3);
                let report = validate_real_network(&original, &core, *max_nodes);
                if !report.accepted {
                    return Err(Error::Config(format!(
                        "network {} rejected: {}",
                        path.display(),
                        report.reasons.join("; ")
                    )));
                }
                Ok(core)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchConfig {
    pub n_landscapes: usize,
    pub reps: usize,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig {
            n_landscapes: 50,
            reps: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub own_payoff: u32,
    pub stride: u32,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            own_payoff: 50,
            stride: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub execution: Execution,
    pub env: EpisodeConfig,
    pub topology: TopologySpec,
    pub batch: BatchConfig,
    pub strategies: Vec<StrategySpec>,
    /// Training hyperparameters; the environment always comes from `env`.
    pub train: TrainConfig,
    pub probe: ProbeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            seed: 1,
            execution: Execution::Parallel,
            env: EpisodeConfig::default(),
            topology: TopologySpec::Complete,
            batch: BatchConfig::default(),
            strategies: StrategySpec::baselines(),
            train: TrainConfig::default(),
            probe: ProbeConfig::default(),
        }
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Table(b), Value::Table(o)) => {
            let kind_changed = matches!((b.get("kind"), o.get("kind")), (Some(x), Some(y)) if x != y);
            if kind_changed {
                *b = o;
                return;
            }
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn parse_fragment(text: &str, origin: &str) -> Result<Value> {
    text.parse::<toml::Table>()
        .map(Value::Table)
        .map_err(|e| Error::Config(format!("{origin}: {e}")))
}

impl ExperimentConfig {
    /// Merges presets (in order) and then `file` over the defaults.
    pub fn assemble(presets: &[String], file: Option<&Path>) -> Result<Self> {
        let mut value = Value::try_from(ExperimentConfig::default()).map_err(|e| Error::Config(e.to_string()))?;
        for p in presets {
            merge(&mut value, parse_fragment(preset_text(p)?, &format!("preset {p}"))?);
        }
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            merge(&mut value, parse_fragment(&text, &path.display().to_string())?);
        }
        let cfg: ExperimentConfig = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let mut value = Value::try_from(ExperimentConfig::default()).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut value, parse_fragment(text, "config")?);
        let cfg: ExperimentConfig = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("at least one strategy is required".into()));
        }
        if self.batch.n_landscapes == 0 || self.batch.reps == 0 {
            return Err(Error::Config("batch sizes must be positive".into()));
        }
        if self.probe.stride == 0 || crate::probe::P_MAX % self.probe.stride != 0 || self.probe.own_payoff > crate::probe::P_MAX {
            return Err(Error::Config("probe stride must divide 100 and own payoff must be at most 100".into()));
        }
        if let crate::sim::LandscapeSchedule::PeriodicReset { period, count } = self.env.schedule {
            if period * count != self.env.steps {
                return Err(Error::Config(format!(
                    "reset schedule {period} x {count} does not cover {} steps",
                    self.env.steps
                )));
            }
        }
        self.train_config().validate()
    }

    /// Training configuration with the shared environment filled in.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            env: self.env.clone(),
            ..self.train.clone()
        }
    }

    /// Builds the topology and returns the environment adjusted to its size.
    pub fn resolve(&self) -> Result<(EpisodeConfig, Topology)> {
        let topo = self.topology.build(self.env.n_agents, self.seed)?;
        let env = EpisodeConfig {
            n_agents: topo.n_nodes(),
            ..self.env.clone()
        };
        env.validate(&topo)?;
        Ok((env, topo))
    }
}

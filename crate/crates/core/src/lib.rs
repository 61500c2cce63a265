//! Social learning on NK landscapes.
//!
//! - [`landscape`]: NK payoff landscapes with exhaustive normalization.
//! - [`topology`]: interaction networks (complete, clustering-maximized, ingested).
//! - [`strategy`]: the reference heuristics (BI, CF, RI, PI and their variants).
//! - [`sim`]: synchronous population episodes and batch statistics.
//! - [`policy`]: observation encoding and the permutation-invariant actor and critic.
//! - [`trainer`]: actor-critic training with generalized advantage estimation.
//! - [`probe`]: payoff-sweep templates, strategy diagrams and region averages.
//! - [`config`]: experiment configuration files and named presets.

pub mod config;
pub mod error;
pub mod exec;
pub mod landscape;
pub mod policy;
pub mod probe;
pub mod rng;
pub mod sim;
pub mod strategy;
pub mod topology;
pub mod trainer;

pub use error::{Error, Result};
pub use exec::Execution;
pub use landscape::{NkLandscape, Solution};
pub use policy::{FeatureFlags, Policy, PolicyArch};
pub use sim::{BatchStats, EpisodeConfig, LandscapeSchedule, Learner, Trajectory};
pub use strategy::StrategySpec;
pub use topology::Topology;
pub use trainer::{TrainConfig, Trainer};

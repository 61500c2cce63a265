use std::sync::Arc;

use sociallab::config::{ExperimentConfig, TopologySpec};
use sociallab::sim::{self, run_episode};
use sociallab::{EpisodeConfig, Execution, LandscapeSchedule, StrategySpec};

fn presets(names: &[&str]) -> ExperimentConfig {
    let p: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    ExperimentConfig::assemble(&p, None).unwrap()
}

#[test]
fn environment_presets() {
    let l50 = presets(&["l50r4"]);
    assert_eq!(l50.env.schedule, LandscapeSchedule::PeriodicReset { period: 50, count: 4 });
    assert_eq!(l50.env.steps, 200);
    let k3 = presets(&["k3l400"]);
    assert_eq!((k3.env.k, k3.env.steps), (3, 400));
    let d = presets(&[]);
    assert_eq!((d.env.n_loci, d.env.k, d.env.n_agents, d.env.sample_size, d.env.steps), (15, 7, 100, 3, 200));
    assert_eq!(d.strategies.len(), 12);
}

#[test]
fn periodic_reset_regenerates_at_period_boundaries() {
    let mut cfg = presets(&["l50r4"]);
    cfg.env.n_agents = 10;
    cfg.env.n_loci = 8;
    cfg.env.k = 2;
    let (env, topo) = cfg.resolve().unwrap();
    let land = Arc::new(sim::batch_landscape(&env, 1, 0).unwrap());
    let s: StrategySpec = "BI-R".parse().unwrap();
    let t = run_episode(&env, &topo, land, &s, 3, Execution::Parallel).unwrap();
    assert_eq!(t.reset_steps, vec![50, 100, 150]);
    assert_eq!(t.mean_payoff.len(), 200);
}

#[test]
fn clustered_topology_runs_end_to_end() {
    let mut cfg = presets(&["maxmc"]);
    cfg.env.n_agents = 40;
    cfg.env.n_loci = 8;
    cfg.env.k = 2;
    cfg.env.steps = 20;
    cfg.topology = TopologySpec::MaxClustering {
        degree: 5,
        swap_budget: 500,
    };
    let (env, topo) = cfg.resolve().unwrap();
    assert!((0..40).all(|i| topo.degree(i) == 5));
    let s: StrategySpec = "CF-I".parse().unwrap();
    let b = sim::run_batch(&env, &topo, &s, 3, 2, 9, Execution::Parallel).unwrap();
    assert_eq!(b.n_episodes, 6);
    assert_eq!(b.mean_curve.len(), 20);
}

#[test]
fn curve_csv_schema() {
    let env = EpisodeConfig {
        n_loci: 8,
        k: 2,
        n_agents: 10,
        steps: 15,
        ..Default::default()
    };
    let topo = sociallab::Topology::complete(10).unwrap();
    let s: StrategySpec = "BI".parse().unwrap();
    let b = sim::run_batch(&env, &topo, &s, 2, 3, 4, Execution::Sequential).unwrap();
    let csv = b.curve_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "step,mean_payoff,sem");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 15);
    for (t, r) in rows.iter().enumerate() {
        assert_eq!(r[0], (t + 1) as f64);
        assert_eq!(r[1], b.mean_curve[t]);
        assert!(r[2] >= 0.0);
    }
    // The reported average is the mean of the curve.
    let avg = b.mean_curve.iter().sum::<f64>() / 15.0;
    assert!((avg - b.average_mean_payoff).abs() < 1e-12);
}

#[test]
fn batches_are_reproducible_and_seed_sensitive() {
    let cfg = presets(&["reduced"]);
    let (env, topo) = cfg.resolve().unwrap();
    let s: StrategySpec = "RI".parse().unwrap();
    let a = sim::run_batch(&env, &topo, &s, 3, 2, 17, Execution::Parallel).unwrap();
    let b = sim::run_batch(&env, &topo, &s, 3, 2, 17, Execution::Sequential).unwrap();
    let c = sim::run_batch(&env, &topo, &s, 3, 2, 18, Execution::Parallel).unwrap();
    assert_eq!(a.curve_csv(), b.curve_csv());
    assert_ne!(a.curve_csv(), c.curve_csv());
}

//! Small training run: prints per-epoch payoff and compares with baselines.
//! Usage: reduced_training [key=value ...]

use std::collections::HashMap;

use sociallab::policy::PolicyArch;
use sociallab::sim::run_batch;
use sociallab::trainer::{EarlyStopping, LandscapeMode};
use sociallab::{EpisodeConfig, Execution, StrategySpec, Topology, TrainConfig, Trainer};

fn main() {
    let kv: HashMap<String, String> = std::env::args()
        .skip(1)
        .filter_map(|a| a.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect();
    let get = |k: &str, d: f64| kv.get(k).map(|v| v.parse().unwrap()).unwrap_or(d);
    let epochs = get("epochs", 300.0) as usize;
    let lr = get("lr", 1e-3);
    let fixed = get("fixed", 0.0) as usize;
    let env = EpisodeConfig {
        n_loci: 8,
        k: 3,
        n_agents: 30,
        sample_size: 3,
        steps: 50,
        ..Default::default()
    };
    let topo = Topology::complete(30).unwrap();
    let cfg = TrainConfig {
        env: env.clone(),
        arch: PolicyArch {
            embed: get("embed", 16.0) as usize,
            heads: get("heads", 2.0) as usize,
            hidden: get("hidden", 32.0) as usize,
            actor_output_scale: get("scale", 0.01),
        },
        gamma: get("gamma", 0.98),
        lambda: get("lambda", 0.95),
        entropy_coef: get("ent", 3e-4),
        lr_actor: lr,
        lr_critic: get("lrc", 3.0 * lr),
        minibatch_size: get("mb", 500.0) as usize,
        updates_per_epoch: get("updates", 4.0) as usize,
        normalize_advantages: get("norm", 1.0) > 0.0,
        max_epochs: epochs,
        early_stopping: EarlyStopping {
            enabled: false,
            ..Default::default()
        },
        landscape_mode: if fixed > 0 {
            LandscapeMode::FixedSet { count: fixed }
        } else {
            LandscapeMode::FreshPerEpoch
        },
        ..Default::default()
    };
    let seed = get("seed", 1.0) as u64;
    let t0 = std::time::Instant::now();
    let mut tr = Trainer::new(cfg, topo.clone(), seed, Execution::Parallel).unwrap();
    let mut block = vec![];
    let mut series = vec![];
    for e in 0..epochs {
        let m = tr.run_epoch().unwrap();
        block.push(m.avg_mean_payoff);
        series.push(m.avg_mean_payoff);
        if block.len() == 25 || e + 1 == epochs {
            println!(
                "{:4} pay(25) {:.2} ent {:.3} cl {:.3}",
                e,
                block.iter().sum::<f64>() / block.len() as f64,
                m.entropy,
                m.critic_loss
            );
            block.clear();
        }
    }
    println!("spearman {:.3}", spearman(&series));
    println!("train time {:.1}s", t0.elapsed().as_secs_f64());
    let ev = run_batch(&env, &topo, tr.policy(), 20, 5, 99, Execution::Parallel).unwrap();
    println!("policy eval {:.2}", ev.average_mean_payoff);
    if get("baselines", 0.0) > 0.0 {
        for s in ["PI-R", "BI-R", "CF-I"] {
            let sp: StrategySpec = s.parse().unwrap();
            let b = run_batch(&env, &topo, &sp, 20, 5, 99, Execution::Parallel).unwrap();
            println!("{s} {:.2}", b.average_mean_payoff);
        }
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    for (k, &i) in idx.iter().enumerate() {
        r[i] = k as f64;
    }
    r
}

fn spearman(v: &[f64]) -> f64 {
    let x: Vec<f64> = (0..v.len()).map(|i| i as f64).collect();
    let (a, b) = (ranks(&x), ranks(v));
    let n = v.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

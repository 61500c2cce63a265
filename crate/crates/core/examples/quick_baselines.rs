use sociallab::{sim, EpisodeConfig, Execution, StrategySpec, Topology};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let k: usize = args.get(1).map_or(7, |s| s.parse().unwrap());
    let steps: usize = args.get(2).map_or(200, |s| s.parse().unwrap());
    let nl: usize = args.get(3).map_or(10, |s| s.parse().unwrap());
    let reps: usize = args.get(4).map_or(10, |s| s.parse().unwrap());
    let cfg = EpisodeConfig { k: k, steps, ..Default::default() };
    let topo = Topology::complete(100).unwrap();
    for s in StrategySpec::baselines() {
        let t = std::time::Instant::now();
        let b = sim::run_batch(&cfg, &topo, &s, nl, reps, 1, Execution::Parallel).unwrap();
        println!("{s:5} {:.2} ± {:.2}  final {:.2}  ({:.1?})", b.average_mean_payoff, b.average_sem, b.final_mean_payoff, t.elapsed());
    }
}

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sociallab::sim::run_batch;
use sociallab::{EpisodeConfig, Execution, StrategySpec, Topology};

fn batch(c: &mut Criterion) {
    let cfg = EpisodeConfig {
        n_loci: 12,
        k: 5,
        n_agents: 60,
        steps: 100,
        ..Default::default()
    };
    let topo = Topology::complete(60).unwrap();
    let bi_r: StrategySpec = "BI-R".parse().unwrap();
    let mut g = c.benchmark_group("run_batch");
    g.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| run_batch(&cfg, &topo, &bi_r, 4, 4, 7, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);

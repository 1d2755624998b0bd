//! Sequential vs rayon execution of the data-parallel hot spots: bootstrap
//! replicates, level-wise PC tests and the benchmark harness.
//!
//!     cargo bench -p causal-atlas-core --bench parallel_vs_sequential

use causal_atlas::bench::{run_benchmark, Scenario, ScenarioSuite, SuiteScenario};
use causal_atlas::ci::FisherZ;
use causal_atlas::ci::SufficientStats;
use causal_atlas::discovery::{pc_with_test, PcConfig};
use causal_atlas::postprocess::bootstrap_edge_frequencies;
use causal_atlas::sim::{simulate_tabular, TabularScenario};
use causal_atlas::{AlgorithmId, CancelToken, ParamMap, Parallelism};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

const MODES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Parallel)];

fn bootstrap(c: &mut Criterion) {
    let (_, data) = simulate_tabular(&TabularScenario { seed: 1, ..Default::default() }).unwrap();
    let mut g = c.benchmark_group("bootstrap_pc_20");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| bootstrap_edge_frequencies(black_box(&data), AlgorithmId::Pc, &ParamMap::new(), 20, 7, mode, &CancelToken::never()).unwrap())
        });
    }
    g.finish();
}

fn pc_levels(c: &mut Criterion) {
    let (_, data) = simulate_tabular(&TabularScenario { n_nodes: 30, n_samples: 2000, edge_prob: 0.15, seed: 2, ..Default::default() }).unwrap();
    let test = FisherZ::new(SufficientStats::from_data(&data).unwrap());
    let mut g = c.benchmark_group("pc_p30");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pc_with_test(black_box(&test), &PcConfig::default(), mode, &CancelToken::never()).unwrap())
        });
    }
    g.finish();
}

fn harness(c: &mut Criterion) {
    let suite = ScenarioSuite {
        name: "bench".into(),
        scenarios: vec![SuiteScenario { id: "small".into(), scenario: Scenario::Tabular(TabularScenario { n_nodes: 8, n_samples: 500, ..Default::default() }) }],
        seeds: 4,
        timeout_seconds: 60.0,
    };
    let algs = [AlgorithmId::Pc, AlgorithmId::IambCpdag, AlgorithmId::ScoreSearch];
    let mut g = c.benchmark_group("harness_3x4");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run_benchmark(black_box(&suite), &algs, None, mode).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, bootstrap, pc_levels, harness);
criterion_main!(benches);

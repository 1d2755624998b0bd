//! Regenerates `data/benchmark_rows.json`, the benchmark evidence embedded in
//! the selector registry.
//!
//!     cargo run --release --example calibrate -p causal-atlas-core > crates/core/data/benchmark_rows.json
//!
//! Seeds 100..103 are used so the evidence never shares a dataset with the
//! test suites, which draw from small seeds.

use causal_atlas::bench::{benchmark_params, Scenario};
use causal_atlas::diagnostics::{impute, profile_dataset, ImputeStrategy, ProfileHints};
use causal_atlas::graph::structural_metrics;
use causal_atlas::parallel::map_range;
use causal_atlas::selector::{BenchmarkRow, Fingerprint};
use causal_atlas::sim::{FunctionType, NoiseKind, TabularScenario, TsScenario};
use causal_atlas::{run_algorithm, AlgorithmId, CancelToken, Parallelism};
use std::collections::BTreeMap;
use std::time::{Duration, Instant};

const SEEDS: [u64; 3] = [100, 101, 102];
const TIMEOUT: Duration = Duration::from_secs(60);

fn grid() -> Vec<(String, Scenario)> {
    let mut out = Vec::new();
    for n in [5, 10, 20] {
        for p in [0.2, 0.5] {
            for f in [FunctionType::Linear, FunctionType::Mlp] {
                for noise in [NoiseKind::Gaussian, NoiseKind::Uniform] {
                    let id = format!("tab_n{n}_p{p}_{f:?}_{noise:?}").to_lowercase();
                    let s = TabularScenario { n_nodes: n, edge_prob: p, function_type: f, noise, ..Default::default() };
                    out.push((id, Scenario::Tabular(s)));
                }
            }
        }
    }
    for n in [5, 10] {
        for lag in [3, 5] {
            for noise in [NoiseKind::Gaussian, NoiseKind::Uniform] {
                let id = format!("ts_n{n}_lag{lag}_{noise:?}").to_lowercase();
                out.push((id, Scenario::TimeSeries(TsScenario { n_nodes: n, max_lag: lag, noise, ..Default::default() })));
            }
        }
    }
    out
}

fn main() {
    let scenarios = grid();
    let jobs: Vec<(usize, AlgorithmId)> = scenarios
        .iter()
        .enumerate()
        .flat_map(|(k, (_, s))| {
            AlgorithmId::ALL.iter().filter(move |a| a.is_time_series() == s.is_time_series()).map(move |&a| (k, a))
        })
        .collect();
    let rows: Vec<(AlgorithmId, BenchmarkRow)> = map_range(jobs.len(), Parallelism::Parallel, |j| {
        let (k, id) = jobs[j];
        let (name, sc) = &scenarios[k];
        let mut f1 = Vec::new();
        let mut secs = Vec::new();
        let mut fps = Vec::new();
        for seed in SEEDS {
            let sc = sc.with_seed(seed);
            let (truth, data) = sc.simulate().expect("simulation");
            let data = impute(&data, ImputeStrategy::MeanMode).expect("impute");
            let prof = profile_dataset(&data, &ProfileHints::default(), seed).expect("profile");
            fps.push(Fingerprint::from_profile(&prof));
            let cancel = CancelToken::with_timeout(TIMEOUT);
            let t = Instant::now();
            let out = run_algorithm(id, &data, &benchmark_params(id, &sc), Parallelism::Sequential, &cancel);
            secs.push(t.elapsed().as_secs_f64());
            // Failures and timeouts count as F1 = 0.
            f1.push(match out {
                Ok(o) => structural_metrics(&o.evaluation_graph(seed), &truth).map_or(0.0, |m| m.f1),
                Err(_) => 0.0,
            });
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let fingerprint = Fingerprint {
            log_n: mean(&fps.iter().map(|f| f.log_n).collect::<Vec<_>>()),
            log_p: mean(&fps.iter().map(|f| f.log_p).collect::<Vec<_>>()),
            density: mean(&fps.iter().map(|f| f.density).collect::<Vec<_>>()),
            linear: mean(&fps.iter().map(|f| f.linear).collect::<Vec<_>>()),
            gaussian: mean(&fps.iter().map(|f| f.gaussian).collect::<Vec<_>>()),
        };
        let round = |x: f64| (x * 1e4).round() / 1e4;
        eprintln!("{name:32} {id:22} f1 {:.3}", mean(&f1));
        (
            id,
            BenchmarkRow {
                scenario: name.clone(),
                fingerprint: Fingerprint {
                    log_n: round(fingerprint.log_n),
                    log_p: round(fingerprint.log_p),
                    density: round(fingerprint.density),
                    linear: round(fingerprint.linear),
                    gaussian: round(fingerprint.gaussian),
                },
                n_samples: sc.n_samples(),
                n_vars: sc.n_nodes(),
                mean_f1: round(mean(&f1)),
                mean_runtime_seconds: round(mean(&secs)).max(1e-4),
            },
        )
    });
    let mut by_alg: BTreeMap<AlgorithmId, Vec<BenchmarkRow>> = BTreeMap::new();
    for (id, row) in rows {
        by_alg.entry(id).or_default().push(row);
    }
    println!("{}", serde_json::to_string_pretty(&by_alg).expect("serialize"));
}

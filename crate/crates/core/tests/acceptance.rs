//! Acceptance criteria 1 to 11. Each criterion prints one line:
//!
//!     criterion  2: FAIL  PC mean F1 0.722 (need >= 0.80) (0.0 s, limit 30 s)
//!
//! Criteria run one after another so their wall-clock limits are measured
//! without competing for cores; the test fails if any criterion does.
//!
//!     cargo test --release -p causal-atlas-core --test acceptance -- --nocapture

use causal_atlas::bench::{aggregate, benchmark_params, run_benchmark, run_benchmark_with, Runner, Scenario, ScenarioSuite, SuiteScenario, RunStatus};
use causal_atlas::ci::{fisher_z_test, partial_correlation, DSeparationOracle, SufficientStats};
use causal_atlas::diagnostics::{profile_dataset, ProfileHints};
use causal_atlas::discovery::timeseries::f_statistic;
use causal_atlas::discovery::{acyclicity, pc_with_test, AugmentedObjective, PcConfig};
use causal_atlas::graph::{cpdag_to_dag, dag_to_cpdag, erdos_renyi_dag, is_consistent_extension, structural_metrics, Dag, DiGraph};
use causal_atlas::pipeline::{run_pipeline, PipelineConfig};
use causal_atlas::postprocess::bootstrap_edge_frequencies;
use causal_atlas::report::{aggregates_to_csv, pipeline_report, ReportFormat, ReportMeta};
use causal_atlas::rng::{derive_seed, seeded};
use causal_atlas::selector::{select_algorithm, Registry, SelectorConfig};
use causal_atlas::sim::{FunctionType, NoiseKind, TabularScenario, TsScenario};
use causal_atlas::{run_algorithm, AlgorithmId, CancelToken, Error, ParamMap, Parallelism};
use nalgebra::DMatrix;
use rand::Rng as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Mean F1 of `id` (benchmark configuration) over `seeds` of `sc`.
fn mean_f1(id: AlgorithmId, sc: &Scenario, seeds: std::ops::Range<u64>) -> f64 {
    let k = seeds.end - seeds.start;
    let total: f64 = seeds
        .map(|seed| {
            let sc = sc.with_seed(seed);
            let (truth, data) = sc.simulate().unwrap();
            f1_of(id, &benchmark_params(id, &sc), &data, &truth, seed)
        })
        .sum();
    total / k as f64
}

fn f1_of(id: AlgorithmId, params: &ParamMap, data: &causal_atlas::Dataset, truth: &DiGraph, seed: u64) -> f64 {
    match run_algorithm(id, data, params, Parallelism::Parallel, &CancelToken::never()) {
        Ok(out) => structural_metrics(&out.evaluation_graph(derive_seed(seed, 0xE7A1)), truth).unwrap().f1,
        Err(_) => 0.0,
    }
}

fn tab(s: TabularScenario) -> Scenario {
    Scenario::Tabular(s)
}

fn oracle_exactness() -> Outcome {
    let mut failures = 0;
    for seed in 0..200u64 {
        let p = 2 + (seed % 7) as usize;
        let dag = erdos_renyi_dag(p, 0.3, seed);
        let oracle = DSeparationOracle::new(dag.graph().clone());
        let (est, _) = pc_with_test(&oracle, &PcConfig::default(), Parallelism::Sequential, &CancelToken::never()).unwrap();
        if est != dag_to_cpdag(&dag) {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("{failures} of 200 oracle runs differ from the true CPDAG"))
}

fn pc_anchor() -> Outcome {
    let f1 = mean_f1(AlgorithmId::Pc, &tab(TabularScenario::default()), 0..10);
    outcome(f1 >= 0.80, format!("PC mean F1 {f1:.3} (need >= 0.80)"))
}

fn notears_anchor() -> Outcome {
    let normal = mean_f1(AlgorithmId::NotearsLinear, &tab(TabularScenario::default()), 0..10);
    let dense = mean_f1(AlgorithmId::NotearsLinear, &tab(TabularScenario { edge_prob: 0.5, ..Default::default() }), 0..10);
    outcome(
        normal >= 0.85 && dense >= 0.60,
        format!("NOTEARS mean F1 {normal:.3} (need >= 0.85), dense {dense:.3} (need >= 0.60)"),
    )
}

fn lingam_anchor() -> Outcome {
    let uniform = tab(TabularScenario { n_samples: 5000, noise: NoiseKind::Uniform, ..Default::default() });
    let f1 = mean_f1(AlgorithmId::DirectLingam, &uniform, 0..10);
    let registry = Registry::builtin();
    let mut chosen_on_gaussian = 0;
    for seed in 0..10 {
        let (_, data) = tab(TabularScenario::default()).with_seed(seed).simulate().unwrap();
        let prof = profile_dataset(&data, &ProfileHints::default(), seed).unwrap();
        if select_algorithm(&prof, &registry, &SelectorConfig::default()).unwrap().chosen == AlgorithmId::DirectLingam {
            chosen_on_gaussian += 1;
        }
    }
    outcome(
        f1 >= 0.90 && chosen_on_gaussian == 0,
        format!("DirectLiNGAM mean F1 {f1:.3} (need >= 0.90); chosen on {chosen_on_gaussian} of 10 Gaussian datasets (need 0)"),
    )
}

fn time_series_anchor() -> Outcome {
    let base = TsScenario { n_nodes: 5, max_lag: 3, n_steps: 2000, ..Default::default() };
    let t = Instant::now();
    let dyn_f1 = mean_f1(AlgorithmId::Dynotears, &Scenario::TimeSeries(base.clone()), 0..5);
    let dyn_secs = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let var_f1 = mean_f1(AlgorithmId::VarLingam, &Scenario::TimeSeries(TsScenario { noise: NoiseKind::Uniform, ..base }), 0..5);
    let var_secs = t.elapsed().as_secs_f64();
    outcome(
        dyn_f1 >= 0.85 && var_f1 >= 0.85 && dyn_secs <= 180.0 && var_secs <= 180.0,
        format!("DYNOTEARS summary F1 {dyn_f1:.3} in {dyn_secs:.1} s, VAR-LiNGAM {var_f1:.3} in {var_secs:.1} s (need >= 0.85, <= 180 s each)"),
    )
}

fn closed_forms() -> Outcome {
    let rho = 0.2f64.tanh();
    let c = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
    let fz = fisher_z_test(&SufficientStats { correlation: c, n: 103 }, 0, 1, &[]);
    let fz_ok = (fz.statistic - 2.0).abs() < 1e-9 && (fz.p_value - 0.045_500_263_896_358_42).abs() < 1e-9;

    let f_ok = (f_statistic(120.0, 100.0, 2, 100) - 10.0).abs() < 1e-9;

    let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let h = acyclicity(&w).0;
    let h_ok = (h - (2.0 * 1f64.cosh() - 2.0)).abs() < 1e-9;

    // X -> Y -> Z with unit weights and noise
    let (rxy, ryz, rxz) = (1.0 / 2f64.sqrt(), 2.0 / 6f64.sqrt(), 1.0 / 3f64.sqrt());
    let c = DMatrix::from_row_slice(3, 3, &[1.0, rxy, rxz, rxy, 1.0, ryz, rxz, ryz, 1.0]);
    let r = partial_correlation(&SufficientStats { correlation: c, n: 100 }, 0, 2, &[1]).unwrap();
    let r_ok = r.abs() < 1e-9;

    outcome(
        fz_ok && f_ok && h_ok && r_ok,
        format!(
            "Fisher-Z stat {:.12} p {:.12}; Granger F ok {f_ok}; h(2-cycle) {h:.12}; chain partial {r:.1e}",
            fz.statistic, fz.p_value
        ),
    )
}

fn max_gradient_error(obj: &AugmentedObjective, b: &DMatrix<f64>, skip: impl Fn(usize, usize) -> bool) -> f64 {
    let g = obj.value_grad(b).1;
    let mut worst = 0.0f64;
    for r in 0..b.nrows() {
        for c in 0..b.ncols() {
            if skip(r, c) {
                continue;
            }
            let eps = 1e-6;
            let (mut bp, mut bm) = (b.clone(), b.clone());
            bp[(r, c)] += eps;
            bm[(r, c)] -= eps;
            let fd = (obj.value_grad(&bp).0 - obj.value_grad(&bm).0) / (2.0 * eps);
            worst = worst.max((fd - g[(r, c)]).abs() / fd.abs().max(g[(r, c)].abs()).max(1e-8));
        }
    }
    worst
}

fn gradient_checks() -> Outcome {
    let mut rng = seeded(2024);
    let mut tab_worst = 0.0f64;
    for _ in 0..20 {
        let p = rng.random_range(3..=7);
        let x = DMatrix::from_fn(60, p, |_, _| rng.random::<f64>() - 0.5);
        let mut obj = AugmentedObjective::tabular(&x, rng.random::<f64>() * 0.2);
        obj.rho = 0.5 + rng.random::<f64>() * 5.0;
        obj.alpha = rng.random::<f64>();
        let b = DMatrix::from_fn(p, p, |r, c| if r == c { 0.0 } else { rng.random::<f64>() - 0.5 });
        tab_worst = tab_worst.max(max_gradient_error(&obj, &b, |r, c| r == c));
    }
    let mut ts_worst = 0.0f64;
    for _ in 0..20 {
        let p = rng.random_range(2..=5);
        let l = rng.random_range(1..=3);
        let x = DMatrix::from_fn(80, p, |_, _| rng.random::<f64>() - 0.5);
        let z = DMatrix::from_fn(80, p * l, |_, _| rng.random::<f64>() - 0.5);
        let mut obj = AugmentedObjective::temporal(&x, &z, rng.random::<f64>() * 0.2, rng.random::<f64>() * 0.2);
        obj.rho = 0.5 + rng.random::<f64>() * 5.0;
        obj.alpha = rng.random::<f64>();
        let b = DMatrix::from_fn(p + p * l, p, |r, c| if r == c { 0.0 } else { rng.random::<f64>() - 0.5 });
        ts_worst = ts_worst.max(max_gradient_error(&obj, &b, |r, c| r == c));
    }
    outcome(
        tab_worst <= 1e-5 && ts_worst <= 1e-5,
        format!("max relative gradient error NOTEARS {tab_worst:.1e}, DYNOTEARS {ts_worst:.1e} (need <= 1e-5)"),
    )
}

fn battery() -> Vec<Scenario> {
    let mut out = Vec::new();
    for f in [FunctionType::Linear, FunctionType::Mlp] {
        for noise in [NoiseKind::Gaussian, NoiseKind::Uniform] {
            for p in [0.2, 0.5] {
                out.push(tab(TabularScenario { function_type: f, noise, edge_prob: p, ..Default::default() }));
            }
        }
    }
    for n in [5, 10] {
        for noise in [NoiseKind::Gaussian, NoiseKind::Uniform] {
            out.push(Scenario::TimeSeries(TsScenario { n_nodes: n, noise, ..Default::default() }));
        }
    }
    out
}

fn selector_end_to_end() -> Outcome {
    const SEEDS: std::ops::Range<u64> = 10..13;
    let registry = Registry::builtin();
    let scenarios = battery();
    let mut hits = 0;
    let mut violations = 0;
    let mut misses = Vec::new();
    for (k, sc) in scenarios.iter().enumerate() {
        let algs: Vec<AlgorithmId> = AlgorithmId::ALL.iter().copied().filter(|a| a.is_time_series() == sc.is_time_series()).collect();
        let mut per_alg = vec![0.0; algs.len()];
        let mut chosen = 0.0;
        let mut picks = Vec::new();
        for seed in SEEDS {
            let sc = sc.with_seed(seed);
            let (truth, data) = sc.simulate().unwrap();
            for (a, &id) in algs.iter().enumerate() {
                per_alg[a] += f1_of(id, &benchmark_params(id, &sc), &data, &truth, seed) / 3.0;
            }
            let prof = profile_dataset(&data, &ProfileHints::default(), seed).unwrap();
            let trace = select_algorithm(&prof, &registry, &SelectorConfig::default()).unwrap();
            if !registry.get(trace.chosen).unwrap().violations(&prof).is_empty() {
                violations += 1;
            }
            chosen += f1_of(trace.chosen, &trace.config, &data, &truth, seed) / 3.0;
            picks.push(trace.chosen);
        }
        let best = per_alg.iter().copied().fold(0.0, f64::max);
        if chosen >= best - 0.05 {
            hits += 1;
        } else {
            misses.push(format!("#{k} {:?} {chosen:.2} vs best {best:.2}", picks[0]));
        }
    }
    let rate = hits as f64 / scenarios.len() as f64;
    outcome(
        rate >= 0.70 && violations == 0,
        format!("within 0.05 of best on {hits}/{} scenarios (need >= 70%), {violations} hard-filter violations; misses: {}", scenarios.len(), misses.join(", ")),
    )
}

fn robustness() -> Outcome {
    let suite = ScenarioSuite {
        name: "missing".into(),
        scenarios: vec![
            SuiteScenario { id: "clean".into(), scenario: tab(TabularScenario::default()) },
            SuiteScenario { id: "missing_0.3".into(), scenario: tab(TabularScenario { missing_rate: 0.3, ..Default::default() }) },
        ],
        seeds: 10,
        timeout_seconds: 120.0,
    };
    let records = run_benchmark(&suite, &[AlgorithmId::Pc], None, Parallelism::Parallel).unwrap();
    let crashes = records.iter().filter(|r| matches!(r.status, RunStatus::Error(_))).count();
    let aggs = aggregate(&records);
    let f1 = |id: &str| aggs.iter().find(|a| a.scenario_id == id).and_then(|a| a.mean_f1).unwrap_or(0.0);
    let (clean, missing) = (f1("clean"), f1("missing_0.3"));
    outcome(
        clean - missing <= 0.25 && crashes == 0,
        format!("PC mean F1 clean {clean:.3}, 30% missing {missing:.3}, drop {:.3} (need <= 0.25); {crashes} error records", clean - missing),
    )
}

fn determinism() -> Outcome {
    let sc = tab(TabularScenario { n_nodes: 6, ..Default::default() }).with_seed(9);
    let (_, a) = sc.simulate().unwrap();
    let (_, b) = sc.simulate().unwrap();
    let bits = |d: &causal_atlas::Dataset| d.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let data_same = bits(&a) == bits(&b);

    let params = benchmark_params(AlgorithmId::Pc, &sc);
    let boot = |mode| bootstrap_edge_frequencies(&a, AlgorithmId::Pc, &params, 20, 5, mode, &CancelToken::never()).unwrap();
    let (f1, f2) = (boot(Parallelism::Parallel), boot(Parallelism::Sequential));
    let freq_same = f1 == f2;

    let cfg = PipelineConfig { seed: 3, bootstrap_replicates: 10, ..Default::default() };
    let meta = ReportMeta::new("2024-01-01T00:00:00Z");
    let reports: Vec<String> = (0..2)
        .map(|_| pipeline_report(&run_pipeline(&a, &cfg, None).unwrap(), ReportFormat::Markdown, &meta).unwrap())
        .collect();
    let report_same = reports[0] == reports[1];

    // A runner that ignores its budget forces timeouts.
    let slow: Runner = Arc::new(|_, _, _, _| {
        std::thread::sleep(Duration::from_millis(200));
        Err(Error::Cancelled)
    });
    let suite = ScenarioSuite {
        name: "count".into(),
        scenarios: vec![
            SuiteScenario { id: "a".into(), scenario: tab(TabularScenario { n_nodes: 4, n_samples: 200, ..Default::default() }) },
            SuiteScenario { id: "b".into(), scenario: tab(TabularScenario { n_nodes: 5, n_samples: 200, ..Default::default() }) },
        ],
        seeds: 3,
        timeout_seconds: 0.01,
    };
    let algs = [AlgorithmId::Pc, AlgorithmId::IambCpdag];
    let records = run_benchmark_with(&suite, &algs, None, Parallelism::Parallel, &slow).unwrap();
    let count_ok = records.len() == 2 * algs.len() * 3;
    let all_timeout = records.iter().all(|r| r.status == RunStatus::Timeout);
    let csv = aggregates_to_csv(&aggregate(&records)).unwrap();
    let na_ok = csv.lines().skip(1).all(|l| l.contains("N/A"));

    outcome(
        data_same && freq_same && report_same && count_ok && all_timeout && na_ok,
        format!(
            "datasets {data_same}, bootstrap frequencies {freq_same}, reports {report_same}, record count {} of {}, timeouts as N/A {}",
            records.len(),
            2 * algs.len() * 3,
            all_timeout && na_ok
        ),
    )
}

/// Every DAG on `p` labelled nodes.
fn all_dags(p: usize) -> Vec<Dag> {
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect();
    let mut out = Vec::new();
    for code in 0..3usize.pow(pairs.len() as u32) {
        let mut c = code;
        let mut edges = Vec::new();
        for &(i, j) in &pairs {
            match c % 3 {
                1 => edges.push((i, j)),
                2 => edges.push((j, i)),
                _ => {}
            }
            c /= 3;
        }
        if let Ok(d) = Dag::from_edges(p, &edges) {
            out.push(d);
        }
    }
    out
}

fn equivalence_suite() -> Outcome {
    let mut checked = 0;
    let mut failures = 0;
    for p in 1..=5 {
        for (k, dag) in all_dags(p).iter().enumerate() {
            let cpdag = dag_to_cpdag(dag);
            let ok = match cpdag_to_dag(&cpdag, k as u64) {
                Ok(ext) => is_consistent_extension(&cpdag, ext.graph()) && dag_to_cpdag(&ext) == cpdag,
                Err(_) => false,
            };
            checked += 1;
            failures += usize::from(!ok);
        }
    }
    let mut rng = seeded(77);
    let mut metric_failures = 0;
    for _ in 0..10_000 {
        let p = rng.random_range(1..=8);
        let mut random = |density: f64| {
            let mut g = DiGraph::new(p);
            for i in 0..p {
                for j in 0..p {
                    if i != j && rng.random::<f64>() < density {
                        g.add_edge(i, j);
                    }
                }
            }
            g
        };
        let (a, b) = (random(0.3), random(0.3));
        let self_m = structural_metrics(&a, &a).unwrap();
        let m = structural_metrics(&a, &b).unwrap();
        let m_rev = structural_metrics(&b, &a).unwrap();
        let ok = self_m.shd == 0
            && self_m.f1 == 1.0
            && (0.0..=1.0).contains(&m.f1)
            && (0.0..=1.0).contains(&m.precision)
            && (0.0..=1.0).contains(&m.recall)
            && m.shd == m_rev.shd
            && m.tp + m.fp == a.n_edges()
            && m.tp + m.fn_ == b.n_edges()
            && (m.shd == 0) == (a == b);
        metric_failures += usize::from(!ok);
    }
    outcome(
        failures == 0 && metric_failures == 0,
        format!("{failures} of {checked} CPDAG round trips failed; {metric_failures} of 10000 metric identity checks failed"),
    )
}

/// Number, time limit in seconds, check.
type Criterion = (u32, f64, fn() -> Outcome);

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 11] = [
        (1, 10.0, oracle_exactness),
        (2, 30.0, pc_anchor),
        (3, 180.0, notears_anchor),
        (4, f64::INFINITY, lingam_anchor),
        (5, 360.0, time_series_anchor),
        (6, f64::INFINITY, closed_forms),
        (7, f64::INFINITY, gradient_checks),
        (8, 1200.0, selector_end_to_end),
        (9, f64::INFINITY, robustness),
        (10, f64::INFINITY, determinism),
        (11, f64::INFINITY, equivalence_suite),
    ];
    let mut failed = Vec::new();
    for (n, limit, run) in criteria {
        let t = Instant::now();
        let o = run();
        let secs = t.elapsed().as_secs_f64();
        let in_time = secs <= limit;
        let pass = o.pass && in_time;
        let timing = if limit.is_finite() { format!("{secs:.1} s, limit {limit:.0} s") } else { format!("{secs:.1} s") };
        println!("criterion {n:2}: {}  {} ({timing})", if pass { "PASS" } else { "FAIL" }, o.detail);
        if !pass {
            failed.push(n);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

use causal_atlas::bench::{aggregate, default_suites, records_from_jsonl, records_to_jsonl, run_benchmark};
use causal_atlas::pipeline::{rerun_with_constraints, run_pipeline, PipelineConfig};
use causal_atlas::postprocess::ConstraintSet;
use causal_atlas::report::{aggregates_from_csv, aggregates_to_csv, pipeline_report, ReportFormat, ReportMeta};
use causal_atlas::sim::{simulate_tabular, simulate_ts_scenario, NoiseKind, TabularScenario, TsScenario};
use causal_atlas::{AlgorithmId, Dataset, Error, Parallelism};

fn quick(seed: u64) -> PipelineConfig {
    PipelineConfig { seed, bootstrap_replicates: 10, ..Default::default() }
}

#[test]
fn csv_text_to_report() {
    let (_, data) = simulate_tabular(&TabularScenario { n_nodes: 6, n_samples: 800, seed: 4, ..Default::default() }).unwrap();
    let data = Dataset::from_csv(&data.to_csv()).unwrap();
    let r = run_pipeline(&data, &quick(1), None).unwrap();
    assert!(r.final_graph().unwrap().is_acyclic());
    assert_eq!(r.confidence.n_nodes(), 6);
    assert!(r.trace.ranked.iter().any(|c| c.id == r.algorithm));
    let meta = ReportMeta::new("2024-01-01T00:00:00Z");
    let md = pipeline_report(&r, ReportFormat::Markdown, &meta).unwrap();
    for section in ["## Dataset", "## Profile", "## Algorithm selection", "## Causal graph", "## Reproduction"] {
        assert!(md.contains(section), "missing {section}");
    }
    let json: serde_json::Value = serde_json::from_str(&pipeline_report(&r, ReportFormat::Json, &meta).unwrap()).unwrap();
    assert_eq!(json["algorithm"], r.algorithm.as_str());
    let csv = pipeline_report(&r, ReportFormat::Csv, &meta).unwrap();
    assert_eq!(csv.lines().count(), r.edges.len() + 1);
    // reports must be portable
    assert!(!md.contains("/root") && !md.contains("/tmp"));
}

#[test]
fn uniform_noise_routes_to_lingam() {
    let s = TabularScenario { n_nodes: 6, n_samples: 3000, noise: NoiseKind::Uniform, seed: 8, ..Default::default() };
    let (_, data) = simulate_tabular(&s).unwrap();
    let r = run_pipeline(&data, &quick(0), None).unwrap();
    assert_eq!(r.algorithm, AlgorithmId::DirectLingam);
}

#[test]
fn time_series_pipeline_uses_a_temporal_method() {
    let (_, data) = simulate_ts_scenario(&TsScenario { n_nodes: 4, max_lag: 2, n_steps: 800, seed: 2, ..Default::default() }).unwrap();
    let r = run_pipeline(&data, &quick(5), None).unwrap();
    assert!(r.algorithm.is_time_series());
    assert_eq!(r.graph.nodes.len(), 4);
}

#[test]
fn constraint_rounds_accumulate() {
    let (_, data) = simulate_tabular(&TabularScenario { n_nodes: 5, n_samples: 600, seed: 11, ..Default::default() }).unwrap();
    let cfg = quick(2);
    let first = run_pipeline(&data, &cfg, None).unwrap();
    let a = ConstraintSet { required: vec![("X0".into(), "X4".into())], ..Default::default() };
    let second = rerun_with_constraints(&data, &first, &cfg, &a, &|_| {}).unwrap();
    let b = ConstraintSet { forbidden_as_effect: vec!["X1".into()], ..Default::default() };
    let third = rerun_with_constraints(&data, &second, &cfg, &b, &|_| {}).unwrap();
    assert_eq!(third.constraints, a.union(&b));
    assert_eq!(third.algorithm, first.algorithm);
    let g = third.final_graph().unwrap();
    assert!(g.has_edge(0, 4));
    assert!(g.parents(1).is_empty());
    let bad = ConstraintSet { forbidden: vec![("X0".into(), "X4".into())], ..Default::default() };
    assert!(matches!(rerun_with_constraints(&data, &third, &cfg, &bad, &|_| {}), Err(Error::ConflictingConstraints(0, 4))));
}

#[test]
fn benchmark_outputs_round_trip() {
    let mut suite = default_suites().remove("tabular_missing").unwrap();
    suite.seeds = 2;
    let algs = [AlgorithmId::Pc, AlgorithmId::ScoreSearch];
    let records = run_benchmark(&suite, &algs, None, Parallelism::Parallel).unwrap();
    assert_eq!(records.len(), suite.scenarios.len() * algs.len() * 2);
    assert_eq!(records_from_jsonl(&records_to_jsonl(&records).unwrap()).unwrap(), records);
    let aggs = aggregate(&records);
    assert_eq!(aggregates_from_csv(&aggregates_to_csv(&aggs).unwrap()).unwrap(), aggs);
    let seq = run_benchmark(&suite, &algs, None, Parallelism::Sequential).unwrap();
    let strip = |rs: &[causal_atlas::bench::RunRecord]| rs.iter().map(|r| (r.scenario_id.clone(), r.algorithm, r.seed, r.metrics)).collect::<Vec<_>>();
    assert_eq!(strip(&records), strip(&seq));
}

//! Report emission for pipeline runs and benchmark aggregates. Output is a
//! pure function of its inputs; the timestamp is injected by the caller.

use crate::bench::{Aggregate, RunRecord, RunStatus};
use crate::error::{Error, Result};
use crate::pipeline::PipelineResult;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::str::FromStr;

pub const NA: &str = "N/A";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Markdown,
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        }
    }
}

/// Reproduction metadata stamped on every report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub generated_at: String,
    pub tool_version: String,
}

impl ReportMeta {
    pub fn new(generated_at: impl Into<String>) -> Self {
        ReportMeta { generated_at: generated_at.into(), tool_version: env!("CARGO_PKG_VERSION").to_string() }
    }
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| NA.to_string(), |x| format!("{x:.digits$}"))
}

fn json_str<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct PipelineDoc<'a> {
    meta: &'a ReportMeta,
    #[serde(flatten)]
    result: &'a PipelineResult,
}

pub fn pipeline_report(r: &PipelineResult, format: ReportFormat, meta: &ReportMeta) -> Result<String> {
    match format {
        ReportFormat::Json => json_str(&PipelineDoc { meta, result: r }),
        ReportFormat::Csv => edges_csv(r),
        ReportFormat::Markdown => Ok(pipeline_markdown(r, meta)),
    }
}

fn edges_csv(r: &PipelineResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["from", "to", "frequency", "weight", "uncertain"]).map_err(|e| Error::Io(e.to_string()))?;
    for e in &r.edges {
        let weight = e.weight.map_or_else(String::new, |x| x.to_string());
        w.write_record([e.from.as_str(), e.to.as_str(), &e.frequency.to_string(), &weight, if e.uncertain { "true" } else { "false" }])
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn pipeline_markdown(r: &PipelineResult, meta: &ReportMeta) -> String {
    let p = &r.profile;
    let mut s = String::new();
    let _ = writeln!(s, "# Causal discovery report\n");
    let _ = writeln!(s, "## Dataset\n");
    let _ = writeln!(s, "- samples: {}", r.dataset.n_samples);
    let _ = writeln!(s, "- variables: {} ({})", r.dataset.n_columns, r.dataset.columns.join(", "));
    if !r.dataset.discrete_columns.is_empty() {
        let _ = writeln!(s, "- discrete: {}", r.dataset.discrete_columns.join(", "));
    }
    let _ = writeln!(s, "- missing cells: {}{}", r.dataset.missing_cells, if r.dataset.imputed { " (imputed)" } else { "" });
    if !r.dataset.dropped_constant.is_empty() {
        let _ = writeln!(s, "- dropped constant columns: {}", r.dataset.dropped_constant.join(", "));
    }
    let _ = writeln!(s, "\n## Profile\n");
    let _ = writeln!(s, "| property | value |\n|---|---|");
    let _ = writeln!(s, "| data kind | {:?} |", p.data_kind);
    let _ = writeln!(s, "| discrete ratio | {:.3} |", p.discrete_ratio);
    let _ = writeln!(s, "| missing rate | {:.3} |", p.missing_rate);
    let _ = writeln!(s, "| linearity | {:?} |", p.linearity);
    let _ = writeln!(s, "| noise | {:?} |", p.gaussian_noise);
    let show = |b: Option<bool>| b.map_or_else(|| NA.to_string(), |v| v.to_string());
    let _ = writeln!(s, "| heterogeneous | {} |", show(p.heterogeneous));
    let _ = writeln!(s, "| edge density | {} |", opt(p.edge_density, 3));
    let _ = writeln!(s, "| stationary | {} |", show(p.stationary));
    let _ = writeln!(s, "| suggested lag | {} |", p.suggested_lag.map_or_else(|| NA.to_string(), |l| l.to_string()));
    let _ = writeln!(s, "\n## Algorithm selection\n");
    let _ = writeln!(s, "Chosen: **{}**\n", r.trace.chosen);
    for line in &r.trace.rationale {
        let _ = writeln!(s, "- {line}");
    }
    let _ = writeln!(s, "\n| rank | algorithm | theoretical | benchmark F1 | combined |\n|---|---|---|---|---|");
    for (k, c) in r.trace.ranked.iter().enumerate() {
        let _ = writeln!(s, "| {} | {} | {:.0} | {:.3} | {:.3} |", k + 1, c.id, c.theoretical, c.empirical, c.combined);
    }
    if !r.trace.filtered_out.is_empty() {
        let _ = writeln!(s, "\nExcluded:\n");
        for x in &r.trace.filtered_out {
            let _ = writeln!(s, "- {}: {}", x.id, x.requirement);
        }
    }
    let _ = writeln!(s, "\n## Execution\n");
    for a in &r.attempts {
        let cfg = serde_json::to_string(&a.config).unwrap_or_default();
        match &a.error {
            None => {
                let _ = writeln!(s, "- {} with {cfg}: ok", a.algorithm);
            }
            Some(e) => {
                let _ = writeln!(s, "- {} with {cfg}: failed ({e})", a.algorithm);
            }
        }
    }
    let _ = writeln!(
        s,
        "- bootstrap: {} successful of {} replicates; thresholds lo = {}, hi = {}",
        r.confidence.b_samples, r.bootstrap_replicates, r.lo, r.hi
    );
    let _ = writeln!(s, "\n## Causal graph\n");
    if r.edges.is_empty() {
        let _ = writeln!(s, "No edges.");
    } else {
        let _ = writeln!(s, "| from | to | confidence | weight | review |\n|---|---|---|---|---|");
        for e in &r.edges {
            let _ = writeln!(
                s,
                "| {} | {} | {:.2} | {} | {} |",
                e.from,
                e.to,
                e.frequency,
                opt(e.weight, 3),
                if e.uncertain { "uncertain" } else { "" }
            );
        }
    }
    if !r.refinement_log.is_empty() {
        let _ = writeln!(s, "\nRefinement:\n");
        for l in &r.refinement_log {
            let _ = writeln!(s, "- {l}");
        }
    }
    if !r.constraints.is_empty() {
        let _ = writeln!(s, "\nUser constraints:\n");
        for (a, b) in &r.constraints.required {
            let _ = writeln!(s, "- required {a} -> {b}");
        }
        for (a, b) in &r.constraints.forbidden {
            let _ = writeln!(s, "- forbidden {a} -> {b}");
        }
        for n in &r.constraints.forbidden_as_effect {
            let _ = writeln!(s, "- {n} cannot be an effect");
        }
    }
    if !r.warnings.is_empty() {
        let _ = writeln!(s, "\n## Warnings\n");
        for w in &r.warnings {
            let _ = writeln!(s, "- {w}");
        }
    }
    let _ = writeln!(s, "\n## Reproduction\n");
    let _ = writeln!(s, "- seed: {}", r.seed);
    let _ = writeln!(s, "- version: {}", meta.tool_version);
    let _ = writeln!(s, "- generated: {}", meta.generated_at);
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkDoc {
    pub meta: ReportMeta,
    pub suite: String,
    pub seeds: usize,
    pub timeout_seconds: f64,
    pub aggregates: Vec<Aggregate>,
    /// Failure messages by (scenario, algorithm, seed).
    pub failures: Vec<String>,
}

impl BenchmarkDoc {
    pub fn new(meta: ReportMeta, suite: &str, seeds: usize, timeout_seconds: f64, records: &[RunRecord], aggregates: Vec<Aggregate>) -> Self {
        let failures = records
            .iter()
            .filter_map(|r| match &r.status {
                RunStatus::Ok => None,
                RunStatus::Timeout => Some(format!("{} / {} / seed {}: timeout", r.scenario_id, r.algorithm, r.seed)),
                RunStatus::Error(m) => Some(format!("{} / {} / seed {}: {m}", r.scenario_id, r.algorithm, r.seed)),
            })
            .collect();
        BenchmarkDoc { meta, suite: suite.to_string(), seeds, timeout_seconds, aggregates, failures }
    }
}

pub fn benchmark_report(doc: &BenchmarkDoc, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => json_str(doc),
        ReportFormat::Csv => aggregates_to_csv(&doc.aggregates),
        ReportFormat::Markdown => Ok(benchmark_markdown(doc)),
    }
}

fn benchmark_markdown(doc: &BenchmarkDoc) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Benchmark `{}`\n", doc.suite);
    let _ = writeln!(s, "{} seeds per scenario, {} s cap per run. F1 is mean ± sample std over completed runs; {NA} means no run completed.\n", doc.seeds, doc.timeout_seconds);
    let _ = writeln!(s, "| scenario | algorithm | F1 | SHD | runtime (s) | completed |\n|---|---|---|---|---|---|");
    for a in &doc.aggregates {
        let f1 = match (a.mean_f1, a.std_f1) {
            (Some(m), Some(sd)) => format!("{m:.3} ± {sd:.3}"),
            _ => NA.to_string(),
        };
        let _ = writeln!(
            s,
            "| {} | {} | {f1} | {} | {} | {}/{} |",
            a.scenario_id,
            a.algorithm,
            opt(a.mean_shd, 1),
            opt(a.mean_runtime_seconds, 3),
            a.completed,
            a.runs
        );
    }
    if !doc.failures.is_empty() {
        let _ = writeln!(s, "\n## Incomplete runs\n");
        for f in &doc.failures {
            let _ = writeln!(s, "- {f}");
        }
    }
    let _ = writeln!(s, "\n## Reproduction\n");
    let _ = writeln!(s, "- version: {}", doc.meta.tool_version);
    let _ = writeln!(s, "- generated: {}", doc.meta.generated_at);
    s
}

const AGG_HEADER: [&str; 9] =
    ["scenario_id", "algorithm", "runs", "completed", "completion_rate", "mean_f1", "std_f1", "mean_shd", "mean_runtime_seconds"];

/// Floats use shortest round-trip formatting and `N/A` for missing cells,
/// so [`aggregates_from_csv`] restores every value exactly.
pub fn aggregates_to_csv(aggs: &[Aggregate]) -> Result<String> {
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(AGG_HEADER).map_err(io)?;
    let cell = |v: Option<f64>| v.map_or_else(|| NA.to_string(), |x| x.to_string());
    for a in aggs {
        w.write_record([
            a.scenario_id.clone(),
            a.algorithm.to_string(),
            a.runs.to_string(),
            a.completed.to_string(),
            a.completion_rate.to_string(),
            cell(a.mean_f1),
            cell(a.std_f1),
            cell(a.mean_shd),
            cell(a.mean_runtime_seconds),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

pub fn aggregates_from_csv(s: &str) -> Result<Vec<Aggregate>> {
    let mut rd = csv::Reader::from_reader(s.as_bytes());
    let mut out = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| Error::MalformedCsv { row, column: 0, message: e.to_string() })?;
        if rec.len() != AGG_HEADER.len() {
            return Err(Error::MalformedCsv { row, column: rec.len(), message: format!("expected {} fields", AGG_HEADER.len()) });
        }
        let bad = |column: usize, m: String| Error::MalformedCsv { row, column: column + 1, message: m };
        let num = |c: usize| rec[c].parse::<f64>().map_err(|e| bad(c, e.to_string()));
        let count = |c: usize| rec[c].parse::<usize>().map_err(|e| bad(c, e.to_string()));
        let maybe = |c: usize| if &rec[c] == NA { Ok(None) } else { num(c).map(Some) };
        out.push(Aggregate {
            scenario_id: rec[0].to_string(),
            algorithm: crate::algorithms::AlgorithmId::parse(&rec[1])?,
            runs: count(2)?,
            completed: count(3)?,
            completion_rate: num(4)?,
            mean_f1: maybe(5)?,
            std_f1: maybe(6)?,
            mean_shd: maybe(7)?,
            mean_runtime_seconds: maybe(8)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::AlgorithmId;

    fn agg(f1: Option<f64>) -> Aggregate {
        Aggregate {
            scenario_id: "s,1".into(),
            algorithm: AlgorithmId::Pc,
            runs: 3,
            completed: if f1.is_some() { 3 } else { 0 },
            completion_rate: if f1.is_some() { 1.0 } else { 0.0 },
            mean_f1: f1,
            std_f1: f1.map(|_| 0.1),
            mean_shd: f1.map(|_| 2.0 / 3.0),
            mean_runtime_seconds: f1.map(|_| 0.012345678901234),
        }
    }

    #[test]
    fn format_parsing() {
        assert_eq!("md".parse::<ReportFormat>().unwrap(), ReportFormat::Markdown);
        assert_eq!("JSON".parse::<ReportFormat>().unwrap(), ReportFormat::Json);
        assert!(matches!("pdf".parse::<ReportFormat>(), Err(Error::UnknownFormat(_))));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let aggs = vec![agg(Some(0.1 + 0.2)), agg(None)];
        let back = aggregates_from_csv(&aggregates_to_csv(&aggs).unwrap()).unwrap();
        assert_eq!(back, aggs);
    }

    #[test]
    fn na_marker_in_markdown() {
        let doc = BenchmarkDoc::new(ReportMeta::new("t"), "x", 3, 1.0, &[], vec![agg(None)]);
        let md = benchmark_report(&doc, ReportFormat::Markdown).unwrap();
        assert!(md.contains("| N/A |"));
        assert!(md.contains("0/3"));
    }
}

//! Graph interchange: a JSON node/edge list and a labelled adjacency CSV.
//! Both round-trip exactly (floats are written in shortest round-trip form).

use super::{Cpdag, Dag, DiGraph, TemporalGraph};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeJson {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    pub directed: bool,
    /// Only present for temporal graphs; 0 is instantaneous.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lag: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeJson>,
    /// Set for weighted graphs, so an edgeless weighted graph keeps its kind.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub weighted: bool,
}

impl GraphJson {
    fn index(&self) -> Result<HashMap<&str, usize>> {
        let idx: HashMap<&str, usize> = self.nodes.iter().enumerate().map(|(k, s)| (s.as_str(), k)).collect();
        if idx.len() != self.nodes.len() {
            return Err(Error::InvalidGraph("duplicate node label".into()));
        }
        Ok(idx)
    }

    fn endpoints(&self, idx: &HashMap<&str, usize>, e: &EdgeJson) -> Result<(usize, usize)> {
        let get = |s: &str| idx.get(s).copied().ok_or_else(|| Error::InvalidGraph(format!("unknown node `{s}`")));
        Ok((get(&e.from)?, get(&e.to)?))
    }
}

impl DiGraph {
    pub fn to_json(&self) -> GraphJson {
        let l = self.labels();
        let weighted = self.weights().is_some();
        GraphJson {
            nodes: l.to_vec(),
            edges: self
                .edges()
                .into_iter()
                .map(|(i, j)| EdgeJson {
                    from: l[i].clone(),
                    to: l[j].clone(),
                    weight: if weighted { self.weight(i, j) } else { None },
                    directed: true,
                    lag: None,
                })
                .collect(),
            weighted,
        }
    }

    pub fn from_json(j: &GraphJson) -> Result<Self> {
        let idx = j.index()?;
        let n = j.nodes.len();
        let weighted = j.weighted || (!j.edges.is_empty() && j.edges.iter().all(|e| e.weight.is_some()));
        let g = if weighted {
            let mut w = DMatrix::zeros(n, n);
            for e in &j.edges {
                let (a, b) = j.endpoints(&idx, e)?;
                w[(a, b)] = e.weight.unwrap_or(1.0);
            }
            DiGraph::from_weights(&w)
        } else {
            let mut g = DiGraph::new(n);
            for e in &j.edges {
                if !e.directed {
                    return Err(Error::InvalidGraph("undirected edge in a directed graph".into()));
                }
                let (a, b) = j.endpoints(&idx, e)?;
                g.add_edge(a, b);
            }
            g
        };
        g.with_labels(j.nodes.clone())
    }

    /// Adjacency CSV: header row of labels (first cell `weight` for weighted
    /// graphs, empty otherwise), one row per cause.
    pub fn to_adjacency_csv(&self) -> String {
        let n = self.n_nodes();
        let mut w = csv::Writer::from_writer(Vec::new());
        let corner = if self.weights().is_some() { "weight" } else { "" };
        let mut header = vec![corner.to_string()];
        header.extend(self.labels().iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for i in 0..n {
            let mut row = vec![self.labels()[i].clone()];
            for j in 0..n {
                let cell = match (self.has_edge(i, j), self.weights()) {
                    (false, _) => "0".to_string(),
                    (true, None) => "1".to_string(),
                    (true, Some(wm)) => format!("{:?}", wm[(i, j)]),
                };
                row.push(cell);
            }
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn from_adjacency_csv(s: &str) -> Result<Self> {
        let (corner, labels, m) = parse_adjacency(s)?;
        let g = if corner == "weight" { DiGraph::from_weights(&m) } else { DiGraph::from_weights(&m).structure() };
        g.with_labels(labels)
    }
}

impl Dag {
    pub fn to_json(&self) -> GraphJson {
        self.graph().to_json()
    }

    pub fn from_json(j: &GraphJson) -> Result<Self> {
        Dag::new(DiGraph::from_json(j)?)
    }
}

impl Cpdag {
    pub fn to_json(&self) -> GraphJson {
        let l = self.labels();
        let mut edges: Vec<EdgeJson> = Vec::new();
        let n = self.n_nodes();
        for i in 0..n {
            for j in 0..n {
                if self.has_directed(i, j) || (i < j && self.has_undirected(i, j)) {
                    edges.push(EdgeJson {
                        from: l[i].clone(),
                        to: l[j].clone(),
                        weight: None,
                        directed: self.has_directed(i, j),
                        lag: None,
                    });
                }
            }
        }
        GraphJson { nodes: l.to_vec(), edges, weighted: false }
    }

    pub fn from_json(j: &GraphJson) -> Result<Self> {
        let idx = j.index()?;
        let mut c = Cpdag::new(j.nodes.len());
        for e in &j.edges {
            let (a, b) = j.endpoints(&idx, e)?;
            if e.directed {
                c.set_directed(a, b);
            } else {
                c.add_undirected(a, b);
            }
        }
        c.with_labels(j.nodes.clone())
    }

    /// Directed `i -> j` is a 1 at `[i][j]` only; undirected edges are 1 in
    /// both cells.
    pub fn to_adjacency_csv(&self) -> String {
        self.to_digraph_bidirected().to_adjacency_csv()
    }

    pub fn from_adjacency_csv(s: &str) -> Result<Self> {
        let (_, labels, m) = parse_adjacency(s)?;
        let n = m.nrows();
        let mut c = Cpdag::new(n);
        for i in 0..n {
            for j in 0..n {
                if i == j || m[(i, j)] == 0.0 {
                    continue;
                }
                if m[(j, i)] != 0.0 {
                    c.add_undirected(i, j);
                } else {
                    c.set_directed(i, j);
                }
            }
        }
        c.with_labels(labels)
    }
}

impl TemporalGraph {
    pub fn to_json(&self) -> GraphJson {
        let l = self.labels();
        let n = self.n_nodes();
        let mut edges = Vec::new();
        let mats = std::iter::once(self.intra()).chain(self.lagged().iter());
        for (lag, m) in mats.enumerate() {
            for i in 0..n {
                for j in 0..n {
                    if m[(i, j)] != 0.0 {
                        edges.push(EdgeJson {
                            from: l[i].clone(),
                            to: l[j].clone(),
                            weight: Some(m[(i, j)]),
                            directed: true,
                            lag: Some(lag),
                        });
                    }
                }
            }
        }
        GraphJson { nodes: l.to_vec(), edges, weighted: true }
    }

    /// `max_lag` must be supplied because trailing all-zero lag matrices leave
    /// no edge behind.
    pub fn from_json(j: &GraphJson, max_lag: usize) -> Result<Self> {
        let idx = j.index()?;
        let n = j.nodes.len();
        let mut intra = DMatrix::zeros(n, n);
        let mut lagged = vec![DMatrix::zeros(n, n); max_lag];
        for e in &j.edges {
            let (a, b) = j.endpoints(&idx, e)?;
            let w = e.weight.ok_or_else(|| Error::InvalidGraph("temporal edge without weight".into()))?;
            match e.lag.unwrap_or(0) {
                0 => intra[(a, b)] = w,
                k if k <= max_lag => lagged[k - 1][(a, b)] = w,
                k => return Err(Error::InvalidGraph(format!("lag {k} exceeds max_lag {max_lag}"))),
            }
        }
        TemporalGraph::new(intra, lagged)?.with_labels(j.nodes.clone())
    }
}

fn parse_adjacency(s: &str) -> Result<(String, Vec<String>, DMatrix<f64>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(s.as_bytes());
    let mut rows = r.records();
    let header = rows
        .next()
        .ok_or(Error::MalformedCsv { row: 0, column: 0, message: "empty file".into() })?
        .map_err(|e| Error::MalformedCsv { row: 0, column: 0, message: e.to_string() })?;
    let corner = header.get(0).unwrap_or("").to_string();
    let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n = labels.len();
    let mut m = DMatrix::zeros(n, n);
    let mut count = 0;
    for (i, rec) in rows.enumerate() {
        let rec = rec.map_err(|e| Error::MalformedCsv { row: i + 1, column: 0, message: e.to_string() })?;
        if i >= n || rec.len() != n + 1 {
            return Err(Error::MalformedCsv { row: i + 1, column: rec.len(), message: "not square".into() });
        }
        for j in 0..n {
            m[(i, j)] = rec[j + 1].trim().parse::<f64>().map_err(|e| Error::MalformedCsv {
                row: i + 1,
                column: j + 1,
                message: e.to_string(),
            })?;
        }
        count += 1;
    }
    if count != n {
        return Err(Error::MalformedCsv { row: count, column: 0, message: "not square".into() });
    }
    Ok((corner, labels, m))
}

//! Column-typed sample matrices with missing markers, plus CSV I/O.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cardinality: Option<usize>,
}

impl ColumnMeta {
    pub fn continuous(name: impl Into<String>) -> Self {
        ColumnMeta { name: name.into(), kind: ColumnKind::Continuous, cardinality: None }
    }

    pub fn discrete(name: impl Into<String>, cardinality: usize) -> Self {
        ColumnMeta { name: name.into(), kind: ColumnKind::Discrete, cardinality: Some(cardinality) }
    }
}

/// `n_samples x n_columns` values; `NaN` marks a missing cell. Time-series
/// datasets carry a `time_index`; multi-domain datasets a `domain_index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub values: DMatrix<f64>,
    pub columns: Vec<ColumnMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_index: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_index: Option<Vec<i64>>,
}

impl Dataset {
    /// All-continuous dataset with default `X{i}` names.
    pub fn continuous(values: DMatrix<f64>) -> Self {
        let columns = (0..values.ncols()).map(|i| ColumnMeta::continuous(format!("X{i}"))).collect();
        Dataset { values, columns, domain_index: None, time_index: None }
    }

    pub fn with_names(mut self, names: &[String]) -> Self {
        for (c, n) in self.columns.iter_mut().zip(names) {
            c.name = n.clone();
        }
        self
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_columns(&self) -> usize {
        self.values.ncols()
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn is_time_series(&self) -> bool {
        self.time_index.is_some()
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(|v| v.is_nan())
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    pub fn is_discrete(&self, j: usize) -> bool {
        self.columns[j].kind == ColumnKind::Discrete
    }

    pub fn discrete_ratio(&self) -> f64 {
        if self.columns.is_empty() {
            return 0.0;
        }
        self.columns.iter().filter(|c| c.kind == ColumnKind::Discrete).count() as f64 / self.columns.len() as f64
    }

    pub fn all_continuous(&self) -> bool {
        self.columns.iter().all(|c| c.kind == ColumnKind::Continuous)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    /// Rows selected by index, in order (duplicates allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let p = self.n_columns();
        let values = DMatrix::from_fn(rows.len(), p, |r, c| self.values[(rows[r], c)]);
        Dataset {
            values,
            columns: self.columns.clone(),
            domain_index: self.domain_index.as_ref().map(|d| rows.iter().map(|&r| d[r]).collect()),
            time_index: self.time_index.as_ref().map(|t| rows.iter().map(|&r| t[r]).collect()),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Dataset {
        let values = DMatrix::from_fn(self.n_samples(), cols.len(), |r, c| self.values[(r, cols[c])]);
        Dataset {
            values,
            columns: cols.iter().map(|&c| self.columns[c].clone()).collect(),
            domain_index: self.domain_index.clone(),
            time_index: self.time_index.clone(),
        }
    }

    /// Error unless every cell is observed.
    pub fn require_complete(&self) -> Result<()> {
        if self.has_missing() {
            Err(Error::DataContainsMissing)
        } else {
            Ok(())
        }
    }

    /// CSV with a header row. Missing cells are empty, discrete columns are
    /// written as integers. A leading `time` column is written for time
    /// series and a trailing `domain` column for multi-domain data.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = Vec::new();
        if self.time_index.is_some() {
            header.push("time".into());
        }
        header.extend(self.names());
        if self.domain_index.is_some() {
            header.push("domain".into());
        }
        w.write_record(&header).expect("in-memory write");
        for r in 0..self.n_samples() {
            let mut row: Vec<String> = Vec::with_capacity(header.len());
            if let Some(t) = &self.time_index {
                row.push(t[r].to_string());
            }
            for c in 0..self.n_columns() {
                let v = self.values[(r, c)];
                row.push(if v.is_nan() {
                    String::new()
                } else if self.is_discrete(c) {
                    format!("{}", v as i64)
                } else {
                    format!("{v:?}")
                });
            }
            if let Some(d) = &self.domain_index {
                row.push(d[r].to_string());
            }
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    /// Parse CSV text. Every column is read as continuous (use
    /// `diagnostics::infer_schema` for typing). Columns named `time` (first)
    /// or `domain` (last) become the time and domain indices.
    pub fn from_csv(s: &str) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(s.as_bytes());
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::MalformedCsv { row: 0, column: 0, message: e.to_string() })?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
            return Err(Error::MalformedCsv { row: 0, column: 0, message: "missing header".into() });
        }
        let has_time = header.first().is_some_and(|h| h == "time");
        let has_domain = header.len() > 1 && header.last().is_some_and(|h| h == "domain");
        let first = usize::from(has_time);
        let last = header.len() - usize::from(has_domain);
        let names: Vec<String> = header[first..last].to_vec();
        let mut cells: Vec<f64> = Vec::new();
        let mut times = Vec::new();
        let mut domains = Vec::new();
        let mut n_rows = 0;
        for (r, rec) in rdr.records().enumerate() {
            let row = r + 1;
            let rec = rec.map_err(|e| Error::MalformedCsv { row, column: 0, message: e.to_string() })?;
            if rec.len() != header.len() {
                return Err(Error::MalformedCsv {
                    row,
                    column: rec.len().min(header.len()),
                    message: format!("expected {} fields, found {}", header.len(), rec.len()),
                });
            }
            let parse_int = |c: usize| -> Result<i64> {
                rec[c].trim().parse::<i64>().map_err(|e| Error::MalformedCsv {
                    row,
                    column: c,
                    message: e.to_string(),
                })
            };
            if has_time {
                times.push(parse_int(0)?);
            }
            for c in first..last {
                let t = rec[c].trim();
                let v = if t.is_empty() || t.eq_ignore_ascii_case("nan") || t.eq_ignore_ascii_case("na") {
                    f64::NAN
                } else {
                    t.parse::<f64>().map_err(|e| Error::MalformedCsv { row, column: c, message: e.to_string() })?
                };
                cells.push(v);
            }
            if has_domain {
                let d = parse_int(last)?;
                if d < 0 {
                    return Err(Error::MalformedCsv { row, column: last, message: "negative domain".into() });
                }
                domains.push(d as usize);
            }
            n_rows += 1;
        }
        let values = DMatrix::from_row_slice(n_rows, names.len(), &cells);
        let mut ds = Dataset::continuous(values).with_names(&names);
        if has_time {
            ds.time_index = Some(times);
        }
        if has_domain {
            ds.domain_index = Some(domains);
        }
        Ok(ds)
    }
}

/// Column means and standard deviations (population, `n` denominator),
/// ignoring missing cells.
pub fn column_moments(x: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut means = Vec::with_capacity(x.ncols());
    let mut sds = Vec::with_capacity(x.ncols());
    for c in x.column_iter() {
        let obs: Vec<f64> = c.iter().copied().filter(|v| !v.is_nan()).collect();
        let n = obs.len().max(1) as f64;
        let m = obs.iter().sum::<f64>() / n;
        let v = obs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        means.push(m);
        sds.push(v.sqrt());
    }
    (means, sds)
}

/// Center and scale each column to unit variance. Constant columns are only
/// centered.
pub fn standardize(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, s) = column_moments(x);
    DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| {
        let d = x[(r, c)] - m[c];
        if s[c] > 0.0 {
            d / s[c]
        } else {
            d
        }
    })
}

pub fn center(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, _) = column_moments(x);
    DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| x[(r, c)] - m[c])
}

use crate::data::{ColumnMeta, Dataset};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Integer columns with at most this many distinct levels are discrete.
pub const MAX_DISCRETE_LEVELS: usize = 10;

/// Type every column: discrete iff all observed values are integers with at
/// most ten distinct levels. Levels already in `0..10` keep their codes;
/// other level sets are relabelled `0..k` in sorted order.
pub fn infer_schema(data: &Dataset) -> Result<Dataset> {
    if data.n_samples() == 0 || data.n_columns() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut out = data.clone();
    for c in 0..data.n_columns() {
        let name = data.columns[c].name.clone();
        let obs: Vec<f64> = data.values.column(c).iter().copied().filter(|v| !v.is_nan()).collect();
        let integral = !obs.is_empty() && obs.iter().all(|v| v.fract() == 0.0 && v.abs() < 1e15);
        let mut levels: Vec<i64> = if integral { obs.iter().map(|&v| v as i64).collect() } else { Vec::new() };
        levels.sort_unstable();
        levels.dedup();
        if !integral || levels.len() > MAX_DISCRETE_LEVELS {
            out.columns[c] = ColumnMeta::continuous(name);
            continue;
        }
        let (lo, hi) = (levels[0], *levels.last().unwrap());
        if lo >= 0 && hi < MAX_DISCRETE_LEVELS as i64 {
            out.columns[c] = ColumnMeta::discrete(name, (hi as usize + 1).max(2));
        } else {
            let code: BTreeMap<i64, usize> = levels.iter().enumerate().map(|(k, &l)| (l, k)).collect();
            for r in 0..data.n_samples() {
                let v = data.values[(r, c)];
                if !v.is_nan() {
                    out.values[(r, c)] = code[&(v as i64)] as f64;
                }
            }
            out.columns[c] = ColumnMeta::discrete(name, levels.len().max(2));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputeStrategy {
    MeanMode,
    DropRows,
}

/// Fill missing cells (mean for continuous, mode for discrete with ties to
/// the smallest label) or drop incomplete rows.
pub fn impute(data: &Dataset, strategy: ImputeStrategy) -> Result<Dataset> {
    if !data.has_missing() {
        return Ok(data.clone());
    }
    for c in 0..data.n_columns() {
        if data.values.column(c).iter().all(|v| v.is_nan()) {
            return Err(Error::AllMissingColumn(c));
        }
    }
    match strategy {
        ImputeStrategy::DropRows => {
            let rows: Vec<usize> = (0..data.n_samples()).filter(|&r| data.values.row(r).iter().all(|v| !v.is_nan())).collect();
            if rows.is_empty() {
                return Err(Error::EmptyDataset);
            }
            Ok(data.select_rows(&rows))
        }
        ImputeStrategy::MeanMode => {
            let mut out = data.clone();
            for c in 0..data.n_columns() {
                let obs: Vec<f64> = data.values.column(c).iter().copied().filter(|v| !v.is_nan()).collect();
                let fill = if data.is_discrete(c) {
                    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
                    for v in &obs {
                        *counts.entry(*v as i64).or_default() += 1;
                    }
                    // labels iterate in order; the strict comparison keeps the smallest on ties
                    let best = counts.iter().fold((i64::MIN, 0usize), |acc, (&l, &n)| if n > acc.1 { (l, n) } else { acc });
                    best.0 as f64
                } else {
                    obs.iter().sum::<f64>() / obs.len() as f64
                };
                for r in 0..data.n_samples() {
                    if out.values[(r, c)].is_nan() {
                        out.values[(r, c)] = fill;
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Remove zero-variance columns; returns the reduced dataset and the names
/// of removed columns.
pub fn drop_constant(data: &Dataset) -> Result<(Dataset, Vec<String>)> {
    let mut keep = Vec::new();
    let mut removed = Vec::new();
    for c in 0..data.n_columns() {
        let col = data.values.column(c);
        let mut obs = col.iter().copied().filter(|v| !v.is_nan());
        let first = obs.next();
        let constant = match first {
            None => true,
            Some(f) => obs.all(|v| v == f),
        };
        if constant {
            removed.push(data.columns[c].name.clone());
        } else {
            keep.push(c);
        }
    }
    if keep.is_empty() {
        return Err(Error::AllColumnsConstant);
    }
    Ok((data.select_columns(&keep), removed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn ds(rows: usize, cols: usize, v: &[f64]) -> Dataset {
        Dataset::continuous(DMatrix::from_column_slice(rows, cols, v))
    }

    #[test]
    fn schema_rules() {
        let mut v: Vec<f64> = (0..30).map(|i| (i % 3) as f64).collect();
        v.extend((0..30).map(|i| i as f64 * 0.37));
        v.extend((0..30).map(|i| (i % 15) as f64));
        let t = infer_schema(&ds(30, 3, &v)).unwrap();
        assert_eq!(t.columns[0], ColumnMeta::discrete("X0", 3));
        assert!(!t.is_discrete(1));
        assert!(!t.is_discrete(2));
        assert_eq!(infer_schema(&ds(0, 0, &[])), Err(Error::EmptyDataset));
    }

    #[test]
    fn schema_relabels_odd_levels() {
        let t = infer_schema(&ds(4, 1, &[-1.0, 5.0, 20.0, 5.0])).unwrap();
        assert_eq!(t.column(0), vec![0.0, 1.0, 2.0, 1.0]);
        assert_eq!(t.columns[0].cardinality, Some(3));
    }

    #[test]
    fn mean_and_mode() {
        let d = ds(3, 1, &[1.0, f64::NAN, 3.0]);
        assert_eq!(impute(&d, ImputeStrategy::MeanMode).unwrap().column(0), vec![1.0, 2.0, 3.0]);
        let mut d = ds(5, 1, &[2.0, 1.0, 2.0, 1.0, f64::NAN]);
        d.columns[0] = ColumnMeta::discrete("X0", 3);
        assert_eq!(impute(&d, ImputeStrategy::MeanMode).unwrap().values[(4, 0)], 1.0);
        let clean = ds(2, 1, &[1.0, 2.0]);
        assert_eq!(impute(&clean, ImputeStrategy::DropRows).unwrap(), clean);
        assert_eq!(impute(&ds(2, 1, &[f64::NAN, f64::NAN]), ImputeStrategy::MeanMode), Err(Error::AllMissingColumn(0)));
    }

    #[test]
    fn drop_rows_count() {
        use rand::Rng as _;
        let mut rng = crate::rng::seeded(1);
        let n = 20_000;
        let v: Vec<f64> = (0..n).map(|i| if rng.random::<f64>() < 0.3 { f64::NAN } else { i as f64 }).collect();
        let d = ds(n, 1, &v);
        let out = impute(&d, ImputeStrategy::DropRows).unwrap();
        assert_eq!(out.n_samples(), n - d.missing_count());
        assert!(!out.has_missing());
        let frac = out.n_samples() as f64 / n as f64;
        assert!((frac - 0.7).abs() < 0.02);
    }

    #[test]
    fn constants() {
        let d = ds(3, 2, &[1.0, 1.0, 1.0, 1.0, 2.0, 3.0]);
        let (out, removed) = drop_constant(&d).unwrap();
        assert_eq!(out.n_columns(), 1);
        assert_eq!(out.n_samples(), 3);
        assert_eq!(removed, vec!["X0".to_string()]);
        assert_eq!(drop_constant(&ds(3, 1, &[2.0; 3])), Err(Error::AllColumnsConstant));
    }
}

//! DirectLiNGAM: causal order by repeatedly extracting the most exogenous
//! variable under a pairwise entropy-based independence measure, then OLS
//! weights pruned by t-tests.

use crate::cancel::CancelToken;
use crate::data::{column_moments, Dataset};
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::linalg::{ols, with_intercept};
use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

const K1: f64 = 79.047;
const K2: f64 = 7.4129;
const GAMMA: f64 = 0.37457;
pub const PRUNE_ALPHA: f64 = 0.05;
/// Coefficients smaller than this in magnitude are dropped as well.
pub const MIN_WEIGHT: f64 = 0.05;
pub const MIN_SAMPLES: usize = 100;

/// Maximum-entropy approximation of the differential entropy of a
/// standardized sample.
pub fn entropy_approx(u: &[f64]) -> f64 {
    let n = u.len() as f64;
    let lc = u.iter().map(|v| v.cosh().ln()).sum::<f64>() / n;
    let ge = u.iter().map(|v| v * (-v * v / 2.0).exp()).sum::<f64>() / n;
    (1.0 + (2.0 * std::f64::consts::PI).ln()) / 2.0 - K1 * (lc - GAMMA).powi(2) - K2 * ge.powi(2)
}

fn standardized(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        v.iter().map(|x| (x - m) / sd).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// Residual of `y` after regressing on `x` (both zero mean).
fn residual(y: &[f64], x: &[f64]) -> Vec<f64> {
    let xx: f64 = x.iter().map(|a| a * a).sum();
    let b = if xx > 0.0 { x.iter().zip(y).map(|(a, c)| a * c).sum::<f64>() / xx } else { 0.0 };
    y.iter().zip(x).map(|(c, a)| c - b * a).collect()
}

/// Pairwise likelihood-ratio style score: positive evidence that `j` is
/// upstream of `i`, negative otherwise.
fn diff_mutual_info(xi: &[f64], xj: &[f64]) -> f64 {
    let ri_j = standardized(&residual(xi, xj));
    let rj_i = standardized(&residual(xj, xi));
    (entropy_approx(xj) + entropy_approx(&ri_j)) - (entropy_approx(xi) + entropy_approx(&rj_i))
}

#[derive(Debug, Clone)]
pub struct DirectLingamFit {
    pub order: Vec<usize>,
    pub dag: Dag,
}

pub fn direct_lingam(data: &Dataset) -> Result<Dag> {
    Ok(direct_lingam_fit(data, &CancelToken::never())?.dag)
}

pub fn direct_lingam_fit(data: &Dataset, cancel: &CancelToken) -> Result<DirectLingamFit> {
    data.require_complete()?;
    let n = data.n_samples();
    if n < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!("direct_lingam needs at least {MIN_SAMPLES} samples, got {n}")));
    }
    let (_, sd) = column_moments(&data.values);
    if let Some(c) = sd.iter().position(|&s| s <= 0.0) {
        return Err(Error::ConstantColumn(c));
    }
    let order = causal_order(&data.values, cancel)?;
    let dag = prune_weights(&data.values, &order)?.with_labels(data.names())?;
    Ok(DirectLingamFit { order, dag })
}

/// Causal order by repeated extraction of the most exogenous variable.
pub fn causal_order(x: &DMatrix<f64>, cancel: &CancelToken) -> Result<Vec<usize>> {
    let p = x.ncols();
    let mut cols: Vec<Vec<f64>> = (0..p).map(|c| standardized(&x.column(c).iter().copied().collect::<Vec<_>>())).collect();
    let mut remaining: Vec<usize> = (0..p).collect();
    let mut order = Vec::with_capacity(p);
    while remaining.len() > 1 {
        cancel.check()?;
        let mut best = (f64::INFINITY, remaining[0]);
        for &j in &remaining {
            let mut m = 0.0;
            for &i in &remaining {
                if i != j {
                    m += diff_mutual_info(&cols[j], &cols[i]).min(0.0).powi(2);
                }
            }
            if m < best.0 {
                best = (m, j);
            }
        }
        let k = best.1;
        order.push(k);
        remaining.retain(|&v| v != k);
        for &i in &remaining {
            cols[i] = standardized(&residual(&cols[i], &cols[k]));
        }
    }
    order.extend(remaining);
    Ok(order)
}

/// OLS of each variable on its predecessors in `order`, dropping
/// coefficients whose two-sided t-test p-value exceeds 0.05 or whose
/// magnitude is below [`MIN_WEIGHT`].
pub fn prune_weights(x: &DMatrix<f64>, order: &[usize]) -> Result<Dag> {
    let (n, p) = (x.nrows(), x.ncols());
    let mut w = DMatrix::zeros(p, p);
    for (pos, &j) in order.iter().enumerate() {
        let preds = &order[..pos];
        if preds.is_empty() {
            continue;
        }
        let k = preds.len();
        let df = n as f64 - k as f64 - 1.0;
        if df <= 0.0 {
            continue;
        }
        let design = with_intercept(&DMatrix::from_fn(n, k, |r, c| x[(r, preds[c])]));
        let y = DVector::from_fn(n, |r, _| x[(r, j)]);
        let fit = ols(&design, &y);
        let sigma2 = fit.rss / df;
        let Some(inv) = (design.transpose() * &design).try_inverse() else { continue };
        let t_dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for (c, &i) in preds.iter().enumerate() {
            let se = (sigma2 * inv[(c + 1, c + 1)]).sqrt();
            let beta = fit.beta[c + 1];
            let pval = if se > 0.0 { 2.0 * t_dist.sf((beta / se).abs()) } else { 0.0 };
            if pval <= PRUNE_ALPHA && beta.abs() >= MIN_WEIGHT {
                w[(i, j)] = beta;
            }
        }
    }
    Dag::from_weights(&w)
}

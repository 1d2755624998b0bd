use super::var::{check_length, lag_matrix, multi_ols};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::DiGraph;
use crate::linalg::with_intercept;
use crate::stats::{benjamini_hochberg, f_sf};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrangerConfig {
    pub max_lag: usize,
    pub alpha: f64,
    /// Control the false discovery rate across ordered pairs.
    pub fdr: bool,
}

impl Default for GrangerConfig {
    fn default() -> Self {
        GrangerConfig { max_lag: 3, alpha: 0.05, fdr: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrangerResult {
    pub graph: DiGraph,
    /// `f_stats[(i, j)]` tests `i -> j`; the diagonal is unused (NaN).
    pub f_stats: DMatrix<f64>,
    pub p_values: DMatrix<f64>,
}

/// `((RSS_r - RSS_f) / df1) / (RSS_f / df2)`.
pub fn f_statistic(rss_r: f64, rss_f: f64, df1: usize, df2: usize) -> f64 {
    ((rss_r - rss_f) / df1 as f64) / (rss_f / df2 as f64)
}

fn check(series: &Dataset, cfg: &GrangerConfig) -> Result<()> {
    if cfg.max_lag == 0 {
        return Err(Error::InvalidParameter("max_lag must be at least 1".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {}", cfg.alpha)));
    }
    series.require_complete()
}

fn decide(f: DMatrix<f64>, p: DMatrix<f64>, cfg: &GrangerConfig, labels: Vec<String>) -> Result<GrangerResult> {
    let n = p.nrows();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    let pv: Vec<f64> = pairs.iter().map(|&(i, j)| p[(i, j)]).collect();
    let reject = if cfg.fdr { benjamini_hochberg(&pv, cfg.alpha) } else { pv.iter().map(|&v| v < cfg.alpha).collect() };
    let mut g = DiGraph::new(n);
    for (&(i, j), r) in pairs.iter().zip(reject) {
        if r {
            g.add_edge(i, j);
        }
    }
    Ok(GrangerResult { graph: g.with_labels(labels)?, f_stats: f, p_values: p })
}

/// Per ordered pair: own lags (restricted) versus own plus the other
/// series' lags (full), compared by an F test with `(L, T_eff - 2L - 1)`
/// degrees of freedom.
pub fn granger_pairwise(series: &Dataset, cfg: &GrangerConfig) -> Result<GrangerResult> {
    check(series, cfg)?;
    let (t, p, l) = (series.n_samples(), series.n_columns(), cfg.max_lag);
    check_length(t, 3 * l + 1)?;
    let x = &series.values;
    let lags = lag_matrix(x, l);
    let t_eff = t - l;
    let df2 = t_eff - 2 * l - 1;
    let lag_cols = |v: usize| -> Vec<usize> { (0..l).map(|k| k * p + v).collect() };
    let mut f = DMatrix::from_element(p, p, f64::NAN);
    let mut pv = DMatrix::from_element(p, p, f64::NAN);
    for j in 0..p {
        let y = x.view((l, j), (t_eff, 1)).into_owned();
        let own = lags.select_columns(&lag_cols(j));
        let rss_r = multi_ols(&with_intercept(&own), &y).1.norm_squared();
        for i in 0..p {
            if i == j {
                continue;
            }
            let mut cols = lag_cols(j);
            cols.extend(lag_cols(i));
            let rss_f = multi_ols(&with_intercept(&lags.select_columns(&cols)), &y).1.norm_squared();
            let stat = f_statistic(rss_r, rss_f, l, df2);
            f[(i, j)] = stat;
            pv[(i, j)] = f_sf(stat, l as f64, df2 as f64);
        }
    }
    decide(f, pv, cfg, series.names())
}

/// Full VAR(L) on all series versus the same model without the lags of
/// `i` in the equation of `j`; F test with `(L, T_eff - pL - 1)` degrees of
/// freedom.
pub fn granger_multivariate(series: &Dataset, cfg: &GrangerConfig) -> Result<GrangerResult> {
    check(series, cfg)?;
    let (t, p, l) = (series.n_samples(), series.n_columns(), cfg.max_lag);
    check_length(t, (l + 1) * p + 1)?;
    let x = &series.values;
    let lags = lag_matrix(x, l);
    let t_eff = t - l;
    let df2 = t_eff - p * l - 1;
    let full_design = with_intercept(&lags);
    let y_all = x.rows(l, t_eff).into_owned();
    let resid = multi_ols(&full_design, &y_all).1;
    let mut f = DMatrix::from_element(p, p, f64::NAN);
    let mut pv = DMatrix::from_element(p, p, f64::NAN);
    for i in 0..p {
        let keep: Vec<usize> = (0..p * l).filter(|c| c % p != i).collect();
        let restricted = with_intercept(&lags.select_columns(&keep));
        let rr = multi_ols(&restricted, &y_all).1;
        for j in 0..p {
            if i == j {
                continue;
            }
            let rss_f = resid.column(j).norm_squared();
            let rss_r = rr.column(j).norm_squared();
            let stat = f_statistic(rss_r, rss_f, l, df2);
            f[(i, j)] = stat;
            pv[(i, j)] = f_sf(stat, l as f64, df2 as f64);
        }
    }
    decide(f, pv, cfg, series.names())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::sim::{sample_noise, NoiseKind};

    #[test]
    fn closed_form_f() {
        assert!((f_statistic(120.0, 100.0, 2, 100) - 10.0).abs() < 1e-9);
        let df2 = 105 - 2 * 2 - 1;
        assert_eq!(df2, 100);
    }

    fn driven(seed: u64, n: usize) -> Dataset {
        let mut rng = seeded(seed);
        let ex = sample_noise(NoiseKind::Gaussian, 1.0, n, &mut rng);
        let ey = sample_noise(NoiseKind::Gaussian, 1.0, n, &mut rng);
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        for t in 1..n {
            x[t] = 0.3 * x[t - 1] + ex[t];
            y[t] = 0.8 * x[t - 1] + 0.2 * y[t - 1] + ey[t];
        }
        x.extend(y);
        Dataset::continuous(DMatrix::from_column_slice(n, 2, &x))
    }

    #[test]
    fn detects_driver() {
        let cfg = GrangerConfig { max_lag: 2, ..Default::default() };
        let mut reverse = 0;
        for s in 0..30 {
            let r = granger_pairwise(&driven(s, 2000), &cfg).unwrap();
            assert!(r.p_values[(0, 1)] < 1e-6);
            reverse += r.graph.has_edge(1, 0) as usize;
        }
        assert!(reverse as f64 / 30.0 <= 0.1);
    }

    #[test]
    fn two_series_methods_agree() {
        let cfg = GrangerConfig { max_lag: 2, ..Default::default() };
        for s in 0..5 {
            let d = driven(100 + s, 500);
            let a = granger_pairwise(&d, &cfg).unwrap();
            let b = granger_multivariate(&d, &cfg).unwrap();
            assert_eq!(a.graph, b.graph);
            assert!((a.f_stats[(0, 1)] - b.f_stats[(0, 1)]).abs() < 1e-6 * a.f_stats[(0, 1)].abs().max(1.0));
        }
    }

    #[test]
    fn white_noise_calibration() {
        let cfg = GrangerConfig { max_lag: 2, ..Default::default() };
        let mut rej = 0;
        let trials = 1000;
        for s in 0..trials {
            let mut rng = seeded(10_000 + s);
            let mut v = sample_noise(NoiseKind::Gaussian, 1.0, 200, &mut rng);
            v.extend(sample_noise(NoiseKind::Gaussian, 1.0, 200, &mut rng));
            let r = granger_pairwise(&Dataset::continuous(DMatrix::from_column_slice(200, 2, &v)), &cfg).unwrap();
            rej += (r.p_values[(0, 1)] < 0.05) as usize;
        }
        let rate = rej as f64 / trials as f64;
        assert!((rate - 0.05).abs() <= 0.02, "{rate}");
    }

    #[test]
    fn chain_conditioned_away() {
        let cfg = GrangerConfig { max_lag: 1, ..Default::default() };
        let (mut pair_flags, mut multi_clear) = (0, 0);
        let seeds = 20;
        for s in 0..seeds {
            let n = 5000;
            let mut rng = seeded(300 + s);
            let e: Vec<Vec<f64>> = (0..3).map(|_| sample_noise(NoiseKind::Gaussian, 1.0, n, &mut rng)).collect();
            let mut x = vec![vec![0.0; n]; 3];
            for t in 1..n {
                x[0][t] = 0.5 * x[0][t - 1] + e[0][t];
                x[1][t] = 0.8 * x[0][t - 1] + e[1][t];
                x[2][t] = 0.8 * x[1][t - 1] + e[2][t];
            }
            let flat: Vec<f64> = x.concat();
            let d = Dataset::continuous(DMatrix::from_column_slice(n, 3, &flat));
            pair_flags += granger_pairwise(&d, &cfg).unwrap().graph.has_edge(0, 2) as usize;
            multi_clear += !granger_multivariate(&d, &cfg).unwrap().graph.has_edge(0, 2) as usize;
        }
        assert!(pair_flags > 0);
        assert!(multi_clear as f64 / seeds as f64 >= 0.8);
    }

    #[test]
    fn nested_rss() {
        let d = driven(7, 300);
        let r = granger_multivariate(&d, &GrangerConfig::default()).unwrap();
        assert!(r.f_stats[(0, 1)] >= 0.0 && r.f_stats[(1, 0)] >= -1e-9);
    }
}

//! Dataset preprocessing and the statistical profile that drives algorithm
//! selection.

mod preprocess;

pub use preprocess::{drop_constant, impute, infer_schema, ImputeStrategy, MAX_DISCRETE_LEVELS};
pub use tests::{
    adf_lags, adf_test, estimate_lag, test_gaussian_noise, test_linearity, test_stationarity, Linearity, NoiseVerdict,
    StationarityResult, ADF_CRITICAL, LINEARITY_GAIN,
};

use crate::data::Dataset;
use crate::discovery::timeseries::fit_var;
use crate::error::Result;
use crate::linalg::{ols, with_intercept};
use crate::rng;
use crate::stats::f_sf;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub const DEFAULT_RUNTIME_BUDGET: f64 = 120.0;
pub const DEFAULT_MAX_LAG: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Tabular,
    TimeSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub n_samples: usize,
    pub n_vars: usize,
    pub data_kind: DataKind,
    pub discrete_ratio: f64,
    pub missing_rate: f64,
    pub linearity: Linearity,
    pub gaussian_noise: NoiseVerdict,
    /// `None` when no domain column exists.
    pub heterogeneous: Option<bool>,
    /// Share of variable pairs with a significant full-order partial
    /// correlation (moral-graph density estimate); `None` when too few
    /// continuous complete columns or samples.
    pub edge_density: Option<f64>,
    pub stationary: Option<bool>,
    pub suggested_lag: Option<usize>,
    pub runtime_budget_seconds: f64,
}

/// User-declared facts; each one present overrides the corresponding test.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileHints {
    pub data_kind: Option<DataKind>,
    pub linearity: Option<Linearity>,
    pub gaussian_noise: Option<NoiseVerdict>,
    pub heterogeneous: Option<bool>,
    /// Share of variable pairs with a significant full-order partial
    /// correlation (moral-graph density estimate); `None` when too few
    /// continuous complete columns or samples.
    pub edge_density: Option<f64>,
    pub stationary: Option<bool>,
    pub lag: Option<usize>,
    pub max_lag: Option<usize>,
    pub runtime_budget_seconds: Option<f64>,
}

/// Levene test (absolute deviations from group means) across groups.
/// Returns the p-value.
pub fn levene(groups: &[Vec<f64>]) -> f64 {
    let groups: Vec<&Vec<f64>> = groups.iter().filter(|g| !g.is_empty()).collect();
    let k = groups.len();
    let n: usize = groups.iter().map(|g| g.len()).sum();
    if k < 2 || n <= k {
        return 1.0;
    }
    let z: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let m = g.iter().sum::<f64>() / g.len() as f64;
            g.iter().map(|v| (v - m).abs()).collect()
        })
        .collect();
    one_way_anova(&z)
}

/// One-way ANOVA F test p-value.
pub fn one_way_anova(groups: &[Vec<f64>]) -> f64 {
    let k = groups.len();
    let n: usize = groups.iter().map(|g| g.len()).sum();
    if k < 2 || n <= k {
        return 1.0;
    }
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let means: Vec<f64> = groups.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
    let between: f64 = groups.iter().zip(&means).map(|(g, m)| g.len() as f64 * (m - grand).powi(2)).sum();
    let within: f64 = groups.iter().zip(&means).map(|(g, m)| g.iter().map(|v| (v - m).powi(2)).sum::<f64>()).sum();
    if within <= 0.0 {
        return if between > 0.0 { 0.0 } else { 1.0 };
    }
    let f = (between / (k - 1) as f64) / (within / (n - k) as f64);
    f_sf(f, (k - 1) as f64, (n - k) as f64)
}

/// Per continuous column, regress on the other continuous columns (pooled)
/// and compare residuals across domains: Levene for spread and one-way
/// ANOVA for location, Bonferroni-corrected over columns and both tests.
pub fn test_heterogeneity(data: &Dataset) -> Option<bool> {
    let domains = data.domain_index.as_ref()?;
    let n_domains = domains.iter().copied().max().map_or(0, |m| m + 1);
    if n_domains < 2 {
        return Some(false);
    }
    let cols: Vec<usize> = (0..data.n_columns()).filter(|&c| !data.is_discrete(c)).collect();
    if cols.is_empty() {
        return Some(false);
    }
    let rows: Vec<usize> = (0..data.n_samples()).filter(|&r| cols.iter().all(|&c| !data.values[(r, c)].is_nan())).collect();
    let x = DMatrix::from_fn(rows.len(), cols.len(), |r, c| data.values[(rows[r], cols[c])]);
    let level = 0.05 / (2 * cols.len()) as f64;
    for j in 0..cols.len() {
        let others: Vec<usize> = (0..cols.len()).filter(|&c| c != j).collect();
        let design = with_intercept(&x.select_columns(&others));
        let y = DVector::from_fn(x.nrows(), |r, _| x[(r, j)]);
        let resid = ols(&design, &y).residuals;
        let mut groups = vec![Vec::new(); n_domains];
        for (k, &r) in rows.iter().enumerate() {
            groups[domains[r]].push(resid[k]);
        }
        if levene(&groups) < level || one_way_anova(&groups) < level {
            return Some(true);
        }
    }
    Some(false)
}

pub const DENSITY_ALPHA: f64 = 0.01;
/// Profiles with an estimated density at or above this count as dense.
pub const DENSE_THRESHOLD: f64 = 0.5;

/// Fraction of continuous column pairs whose partial correlation given all
/// other continuous columns is significant (Fisher-Z at 1%).
pub fn estimate_edge_density(data: &Dataset) -> Option<f64> {
    let cols: Vec<usize> = (0..data.n_columns()).filter(|&c| !data.is_discrete(c)).collect();
    let p = cols.len();
    let rows: Vec<usize> = (0..data.n_samples()).filter(|&r| cols.iter().all(|&c| !data.values[(r, c)].is_nan())).collect();
    let n = rows.len();
    if p < 2 || n < p + 10 {
        return None;
    }
    let x = DMatrix::from_fn(n, p, |r, c| data.values[(rows[r], cols[c])]);
    let corr = crate::linalg::correlation(&x);
    let prec = corr.clone().try_inverse().or_else(|| corr.pseudo_inverse(1e-10).ok())?;
    let dof = (n - (p - 2) - 3) as f64;
    let mut hits = 0;
    for i in 0..p {
        for j in i + 1..p {
            let d = prec[(i, i)] * prec[(j, j)];
            if !(d > 0.0) {
                continue;
            }
            let r = (-prec[(i, j)] / d.sqrt()).clamp(-1.0 + 1e-12, 1.0 - 1e-12);
            let z = 0.5 * ((1.0 + r) / (1.0 - r)).ln();
            if crate::linalg::two_sided_normal_p(dof.sqrt() * z.abs()) < DENSITY_ALPHA {
                hits += 1;
            }
        }
    }
    Some(hits as f64 / (p * (p - 1) / 2) as f64)
}

/// Run every applicable diagnostic and merge user hints (hints win).
pub fn profile_dataset(data: &Dataset, hints: &ProfileHints, seed: u64) -> Result<DatasetProfile> {
    let cells = (data.n_samples() * data.n_columns()).max(1) as f64;
    let data_kind = hints.data_kind.unwrap_or(if data.is_time_series() { DataKind::TimeSeries } else { DataKind::Tabular });
    let mut p = DatasetProfile {
        n_samples: data.n_samples(),
        n_vars: data.n_columns(),
        data_kind,
        discrete_ratio: data.discrete_ratio(),
        missing_rate: data.missing_count() as f64 / cells,
        linearity: Linearity::Unknown,
        gaussian_noise: NoiseVerdict::Unknown,
        heterogeneous: None,
        edge_density: estimate_edge_density(data),
        stationary: None,
        suggested_lag: None,
        runtime_budget_seconds: hints.runtime_budget_seconds.unwrap_or(DEFAULT_RUNTIME_BUDGET),
    };
    match data_kind {
        DataKind::Tabular => {
            let mut r = rng::child(seed, 0);
            p.linearity = hints.linearity.unwrap_or_else(|| test_linearity(data, &mut r));
            p.gaussian_noise = hints.gaussian_noise.unwrap_or_else(|| test_gaussian_noise(data));
            p.heterogeneous = hints.heterogeneous.or_else(|| test_heterogeneity(data));
        }
        DataKind::TimeSeries => {
            let complete = !data.has_missing();
            p.stationary = hints.stationary.or_else(|| {
                complete.then(|| test_stationarity(data).ok().map(|v| v.iter().all(|s| s.stationary))).flatten()
            });
            let (t, n) = (data.n_samples(), data.n_columns());
            let feasible = if t > 2 * n + 2 { ((t - 2) / n.max(1)).saturating_sub(1) } else { 0 };
            let max_lag = hints.max_lag.unwrap_or(DEFAULT_MAX_LAG).min(feasible);
            p.suggested_lag = hints.lag.or_else(|| (complete && max_lag >= 1).then(|| estimate_lag(data, max_lag).ok()).flatten());
            p.gaussian_noise = hints.gaussian_noise.unwrap_or_else(|| match p.suggested_lag {
                Some(l) if complete => match fit_var(data, l) {
                    Ok(fit) => {
                        let res: Vec<Vec<f64>> = fit.residuals.column_iter().map(|c| c.iter().copied().collect()).collect();
                        tests::noise_verdict(&res)
                    }
                    Err(_) => NoiseVerdict::Unknown,
                },
                _ => NoiseVerdict::Unknown,
            });
            if let Some(l) = hints.linearity {
                p.linearity = l;
            }
            if let Some(h) = hints.heterogeneous {
                p.heterogeneous = Some(h);
            }
        }
    }
    Ok(p)
}

#[cfg(test)]
mod unit {
    use super::*;
    use crate::sim::{simulate_tabular, simulate_ts_scenario, TabularScenario, TsScenario};

    #[test]
    fn hints_override_tests() {
        let (_, data) = simulate_tabular(&TabularScenario::default()).unwrap();
        let hints = ProfileHints { linearity: Some(Linearity::Nonlinear), ..Default::default() };
        assert_eq!(profile_dataset(&data, &hints, 0).unwrap().linearity, Linearity::Nonlinear);
    }

    #[test]
    fn clean_linear_gaussian_profile() {
        let agree = (0..10)
            .filter(|&seed| {
                let (_, data) = simulate_tabular(&TabularScenario { seed, ..Default::default() }).unwrap();
                let p = profile_dataset(&data, &ProfileHints::default(), seed).unwrap();
                p.linearity == Linearity::Linear && p.gaussian_noise == NoiseVerdict::Gaussian && p.heterogeneous != Some(true)
            })
            .count();
        assert!(agree >= 8, "{agree}");
    }

    #[test]
    fn time_series_routing() {
        let (_, data) = simulate_ts_scenario(&TsScenario { n_nodes: 4, n_steps: 1500, ..Default::default() }).unwrap();
        let p = profile_dataset(&data, &ProfileHints::default(), 0).unwrap();
        assert_eq!(p.data_kind, DataKind::TimeSeries);
        assert_eq!(p.stationary, Some(true));
        assert!(p.suggested_lag.is_some());
        assert_eq!(p.linearity, Linearity::Unknown);
    }

    #[test]
    fn domain_shift_detected() {
        let s = TabularScenario { n_domains: 5, seed: 2, ..Default::default() };
        let (_, data) = simulate_tabular(&s).unwrap();
        assert_eq!(test_heterogeneity(&data), Some(true));
        let (_, clean) = simulate_tabular(&TabularScenario { seed: 2, ..Default::default() }).unwrap();
        assert_eq!(test_heterogeneity(&clean), None);
    }

    #[test]
    fn density_separates_sparse_from_dense() {
        let mean = |edge_prob| {
            (0..5)
                .map(|seed| {
                    let (_, d) = simulate_tabular(&TabularScenario { edge_prob, seed, ..Default::default() }).unwrap();
                    estimate_edge_density(&d).unwrap()
                })
                .sum::<f64>()
                / 5.0
        };
        let (sparse, dense) = (mean(0.22), mean(0.5));
        assert!(sparse < DENSE_THRESHOLD && dense >= DENSE_THRESHOLD, "{sparse} {dense}");
    }

    #[test]
    fn levene_detects_spread() {
        let a: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 / 101.0 - 0.5).collect();
        let b: Vec<f64> = a.iter().map(|v| v * 4.0).collect();
        assert!(levene(&[a.clone(), b]) < 1e-6);
        assert!(levene(&[a.clone(), a]) > 0.99);
    }
}

use super::var::{check_length, lag_matrix};
use crate::cancel::CancelToken;
use crate::data::{center, Dataset};
use crate::discovery::notears::{solve_alm, threshold, AugmentedObjective, NotearsConfig};
use crate::error::{Error, Result};
use crate::graph::TemporalGraph;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynotearsConfig {
    pub lag: usize,
    pub lambda_w: f64,
    pub lambda_a: f64,
    pub solver: NotearsConfig,
}

impl Default for DynotearsConfig {
    fn default() -> Self {
        DynotearsConfig { lag: 3, lambda_w: 0.05, lambda_a: 0.05, solver: NotearsConfig { w_threshold: 0.1, ..NotearsConfig::default() } }
    }
}

/// Centered current-time block `X` and lagged block `Z = [x_{t-1} .. x_{t-L}]`.
pub fn lagged_design(series: &Dataset, lag: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let x = &series.values;
    let cur = x.rows(lag, x.nrows() - lag).into_owned();
    (center(&cur), center(&lag_matrix(x, lag)))
}

pub fn dynotears(series: &Dataset, cfg: &DynotearsConfig) -> Result<TemporalGraph> {
    dynotears_cancellable(series, cfg, &CancelToken::never())
}

pub fn dynotears_cancellable(series: &Dataset, cfg: &DynotearsConfig, cancel: &CancelToken) -> Result<TemporalGraph> {
    if cfg.lag == 0 {
        return Err(Error::InvalidParameter("lag must be at least 1".into()));
    }
    if cfg.lambda_w < 0.0 || cfg.lambda_a < 0.0 {
        return Err(Error::InvalidParameter("penalties must be nonnegative".into()));
    }
    cfg.solver.validate()?;
    series.require_complete()?;
    let (t, p) = (series.n_samples(), series.n_columns());
    check_length(t, (cfg.lag + 1) * p + 1)?;
    let (x, z) = lagged_design(series, cfg.lag);
    let obj = AugmentedObjective::temporal(&x, &z, cfg.lambda_w, cfg.lambda_a);
    let sol = solve_alm(obj, &cfg.solver, cancel)?;
    let b = threshold(&sol.b, cfg.solver.w_threshold);
    let w = b.rows(0, p).into_owned();
    let lagged = (0..cfg.lag).map(|k| b.rows(p + k * p, p).into_owned()).collect();
    match TemporalGraph::new(w, lagged) {
        Ok(g) => g.with_labels(series.names()),
        Err(_) => Err(Error::NonConvergence { h: sol.h }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng as _;

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = seeded(31);
        let (p, l) = (4, 2);
        for _ in 0..5 {
            let x = DMatrix::from_fn(80, p, |_, _| rng.random::<f64>() - 0.5);
            let z = DMatrix::from_fn(80, p * l, |_, _| rng.random::<f64>() - 0.5);
            let mut obj = AugmentedObjective::temporal(&x, &z, 0.1, 0.2);
            obj.rho = 2.0;
            obj.alpha = 0.3;
            let b = DMatrix::from_fn(p + p * l, p, |r, c| if r == c { 0.0 } else { rng.random::<f64>() - 0.5 });
            let g = obj.value_grad(&b).1;
            for r in 0..b.nrows() {
                for c in 0..p {
                    if r == c {
                        continue;
                    }
                    let eps = 1e-6;
                    let (mut bp, mut bm) = (b.clone(), b.clone());
                    bp[(r, c)] += eps;
                    bm[(r, c)] -= eps;
                    let fd = (obj.value_grad(&bp).0 - obj.value_grad(&bm).0) / (2.0 * eps);
                    let rel = (fd - g[(r, c)]).abs() / fd.abs().max(g[(r, c)].abs()).max(1e-8);
                    assert!(rel <= 1e-5, "{fd} vs {}", g[(r, c)]);
                }
            }
        }
    }

    #[test]
    fn pure_lagged_system_has_no_instantaneous_edges() {
        let s = crate::sim::TsScenario { n_nodes: 4, max_lag: 1, intra_degree: 0.0, n_steps: 5000, seed: 3, ..Default::default() };
        let (_, data) = crate::sim::simulate_ts_scenario(&s).unwrap();
        let g = dynotears(&data, &DynotearsConfig { lag: 1, ..Default::default() }).unwrap();
        assert_eq!(g.intra().iter().filter(|v| **v != 0.0).count(), 0);
    }
}

//! Stationary linear multivariate time series with instantaneous and lagged
//! effects: x_t = W0^T x_t + sum_k A_k^T x_{t-k} + e_t.

use super::{noise::sample_noise, signed_uniform, NoiseKind};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{erdos_renyi_dag, DiGraph, TemporalGraph};
use crate::rng::{self, Rng};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub const DEFAULT_TARGET_RADIUS: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TsGraphType {
    ErdosRenyi,
    BarabasiAlbert,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsScenario {
    pub n_nodes: usize,
    pub max_lag: usize,
    /// Expected average (in + out) degree of the instantaneous DAG.
    pub intra_degree: f64,
    /// Expected number of lagged parents per node, summed over all lags.
    pub inter_degree: f64,
    pub graph_type: TsGraphType,
    pub weight_range_intra: (f64, f64),
    pub weight_range_inter: (f64, f64),
    pub decay_exponent: f64,
    pub noise: NoiseKind,
    pub noise_scale: f64,
    pub n_steps: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for TsScenario {
    fn default() -> Self {
        TsScenario {
            n_nodes: 10,
            max_lag: 3,
            intra_degree: 2.0,
            inter_degree: 3.0,
            graph_type: TsGraphType::ErdosRenyi,
            weight_range_intra: (0.1, 0.4),
            weight_range_inter: (0.1, 0.5),
            decay_exponent: 0.0,
            noise: NoiseKind::Gaussian,
            noise_scale: 1.0,
            n_steps: 1000,
            burn_in: 100,
            seed: 0,
        }
    }
}

impl TsScenario {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 || self.max_lag == 0 || self.n_steps <= self.max_lag {
            return Err(Error::InvalidParameter("need n_nodes >= 1, max_lag >= 1, n_steps > max_lag".into()));
        }
        if self.intra_degree < 0.0 || self.inter_degree < 0.0 || self.decay_exponent < 0.0 {
            return Err(Error::InvalidParameter("degrees and decay must be nonnegative".into()));
        }
        if self.noise_scale <= 0.0 {
            return Err(Error::InvalidParameter("noise_scale must be positive".into()));
        }
        Ok(())
    }
}

fn intra_structure(s: &TsScenario, rng: &mut Rng) -> DiGraph {
    let n = s.n_nodes;
    match s.graph_type {
        TsGraphType::ErdosRenyi => {
            let p = if n > 1 { (s.intra_degree / (n - 1) as f64).min(1.0) } else { 0.0 };
            erdos_renyi_dag(n, p, rng.random()).into_graph()
        }
        TsGraphType::Full => erdos_renyi_dag(n, 1.0, rng.random()).into_graph(),
        TsGraphType::BarabasiAlbert => {
            // nodes join in random order, each attaching to m earlier nodes
            // with probability proportional to degree + 1; edges point from
            // earlier to later nodes
            let m = (s.intra_degree / 2.0).round() as usize;
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            let mut g = DiGraph::new(n);
            let mut degree = vec![0usize; n];
            for k in 1..n {
                let new = order[k];
                let mut pool: Vec<usize> = order[..k].to_vec();
                for _ in 0..m.min(k) {
                    let total: usize = pool.iter().map(|&v| degree[v] + 1).sum();
                    let mut u = rng.random_range(0..total);
                    let mut pick = 0;
                    for (idx, &v) in pool.iter().enumerate() {
                        if u < degree[v] + 1 {
                            pick = idx;
                            break;
                        }
                        u -= degree[v] + 1;
                    }
                    let old = pool.swap_remove(pick);
                    g.add_edge(old, new);
                    degree[old] += 1;
                    degree[new] += 1;
                }
            }
            g
        }
    }
}

/// Draw the instantaneous DAG and lag matrices. Lag-k weights are drawn from
/// `weight_range_inter` and multiplied by `k^(-decay_exponent)`.
pub fn generate_temporal_graph(s: &TsScenario) -> Result<TemporalGraph> {
    s.validate()?;
    let n = s.n_nodes;
    let mut rng = rng::child(s.seed, 0);
    let intra_g = intra_structure(s, &mut rng);
    let mut intra = DMatrix::zeros(n, n);
    for (i, j) in intra_g.edges() {
        intra[(i, j)] = signed_uniform(&mut rng, s.weight_range_intra.0, s.weight_range_intra.1);
    }
    let q = (s.inter_degree / (n * s.max_lag) as f64).min(1.0);
    let per_lag = (s.inter_degree / s.max_lag as f64).round() as usize;
    let mut lagged = Vec::with_capacity(s.max_lag);
    for k in 1..=s.max_lag {
        let decay = (k as f64).powf(-s.decay_exponent);
        let mut a = DMatrix::zeros(n, n);
        if s.graph_type != TsGraphType::BarabasiAlbert {
            for j in 0..n {
                for i in 0..n {
                    let present = s.graph_type == TsGraphType::Full || rng.random::<f64>() < q;
                    if present {
                        a[(i, j)] = decay * signed_uniform(&mut rng, s.weight_range_inter.0, s.weight_range_inter.1);
                    }
                }
            }
        }
        if s.graph_type == TsGraphType::BarabasiAlbert {
            // preferential choice of lagged sources by current out-degree
            let mut out_deg = vec![0usize; n];
            for j in 0..n {
                let mut pool: Vec<usize> = (0..n).collect();
                for _ in 0..per_lag.min(n) {
                    let total: usize = pool.iter().map(|&v| out_deg[v] + 1).sum();
                    let mut u = rng.random_range(0..total);
                    let mut pick = 0;
                    for (idx, &v) in pool.iter().enumerate() {
                        if u < out_deg[v] + 1 {
                            pick = idx;
                            break;
                        }
                        u -= out_deg[v] + 1;
                    }
                    let i = pool.swap_remove(pick);
                    out_deg[i] += 1;
                    a[(i, j)] = decay * signed_uniform(&mut rng, s.weight_range_inter.0, s.weight_range_inter.1);
                }
            }
        }
        lagged.push(a);
    }
    TemporalGraph::new(intra, lagged)
}

/// Reduced-form lag matrices Phi_k = (I - W0^T)^{-1} A_k^T.
fn reduced_form(tg: &TemporalGraph) -> Result<Vec<DMatrix<f64>>> {
    let n = tg.n_nodes();
    let inv = (DMatrix::identity(n, n) - tg.intra().transpose())
        .try_inverse()
        .ok_or(Error::SingularInstantaneousSystem)?;
    Ok(tg.lagged().iter().map(|a| &inv * a.transpose()).collect())
}

/// Spectral radius of the VAR companion matrix of the reduced-form process.
pub fn spectral_radius(tg: &TemporalGraph) -> Result<f64> {
    let n = tg.n_nodes();
    let l = tg.max_lag();
    if l == 0 {
        return Ok(0.0);
    }
    let phi = reduced_form(tg)?;
    let mut c = DMatrix::zeros(n * l, n * l);
    for (k, p) in phi.iter().enumerate() {
        c.view_mut((0, k * n), (n, n)).copy_from(p);
    }
    for k in 1..l {
        c.view_mut((k * n, (k - 1) * n), (n, n)).fill_with_identity();
    }
    Ok(c.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// If the companion spectral radius `rho` is at least 1, scale lag-k
/// matrices by `(target / rho)^k`, which scales every companion eigenvalue
/// by `target / rho` and keeps the support intact.
pub fn stabilize(tg: &TemporalGraph, target_radius: f64) -> Result<TemporalGraph> {
    assert!(target_radius > 0.0 && target_radius < 1.0, "target radius must lie in (0, 1)");
    let rho = spectral_radius(tg)?;
    if rho < 1.0 {
        return Ok(tg.clone());
    }
    let c = target_radius / rho;
    let lagged = tg.lagged().iter().enumerate().map(|(k, a)| a * c.powi(k as i32 + 1)).collect();
    tg.with_lagged(lagged)
}

/// Simulate `n_steps` observations after discarding `burn_in` steps. The
/// instantaneous system is solved by substitution in topological order of
/// W0.
pub fn simulate_temporal(tg: &TemporalGraph, s: &TsScenario) -> Result<Dataset> {
    let n = tg.n_nodes();
    let l = tg.max_lag();
    let det = (DMatrix::identity(n, n) - tg.intra().transpose()).determinant();
    if !det.is_finite() || det.abs() < 1e-12 {
        return Err(Error::SingularInstantaneousSystem);
    }
    let order = DiGraph::from_weights(tg.intra()).topological_order().ok_or(Error::SingularInstantaneousSystem)?;
    let total = s.burn_in + s.n_steps;
    let mut rng = rng::child(s.seed, 1);
    let mut x = DMatrix::zeros(total + l, n);
    for t in l..(total + l) {
        let e = sample_noise(s.noise, s.noise_scale, n, &mut rng);
        let mut drive = e;
        for (k, a) in tg.lagged().iter().enumerate() {
            let past = t - k - 1;
            for j in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    let w = a[(i, j)];
                    if w != 0.0 {
                        acc += w * x[(past, i)];
                    }
                }
                drive[j] += acc;
            }
        }
        for &j in &order {
            let mut v = drive[j];
            for i in 0..n {
                let w = tg.intra()[(i, j)];
                if w != 0.0 {
                    v += w * x[(t, i)];
                }
            }
            x[(t, j)] = v;
        }
    }
    let kept = x.rows(l + s.burn_in, s.n_steps).into_owned();
    let mut ds = Dataset::continuous(kept).with_names(tg.labels());
    ds.time_index = Some((0..s.n_steps as i64).collect());
    Ok(ds)
}

/// Generate, stabilize and simulate in one step.
pub fn simulate_ts_scenario(s: &TsScenario) -> Result<(TemporalGraph, Dataset)> {
    let tg = stabilize(&generate_temporal_graph(s)?, DEFAULT_TARGET_RADIUS)?;
    let data = simulate_temporal(&tg, s)?;
    Ok((tg, data))
}

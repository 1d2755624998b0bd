use super::var::fit_var;
use crate::cancel::CancelToken;
use crate::data::Dataset;
use crate::discovery::lingam::{causal_order, prune_weights};
use crate::error::Result;
use crate::graph::TemporalGraph;
use crate::stats::jarque_bera;
use nalgebra::DMatrix;

/// Coefficients smaller than this in magnitude are dropped.
pub const VAR_LINGAM_PRUNE: f64 = crate::discovery::lingam::MIN_WEIGHT;

#[derive(Debug, Clone)]
pub struct VarLingamFit {
    pub graph: TemporalGraph,
    pub causal_order: Vec<usize>,
    /// Set when no residual series rejects normality (Jarque-Bera, 5%):
    /// the instantaneous part is then not identifiable.
    pub low_confidence: bool,
}

pub fn var_lingam(series: &Dataset, lag: usize) -> Result<VarLingamFit> {
    var_lingam_cancellable(series, lag, &CancelToken::never())
}

/// VAR by least squares, DirectLiNGAM on the residuals for the
/// instantaneous matrix `B0`, then `B_k = M_k (I - B0)` in cause-row layout.
pub fn var_lingam_cancellable(series: &Dataset, lag: usize, cancel: &CancelToken) -> Result<VarLingamFit> {
    let fit = fit_var(series, lag)?;
    cancel.check()?;
    let p = series.n_columns();
    let resid = &fit.residuals;
    let low_confidence = (0..p).all(|j| jarque_bera(resid.column(j).as_slice()).1 > 0.05);
    if low_confidence {
        log::warn!("VAR residuals look Gaussian; instantaneous orientations are unreliable");
    }
    let order = causal_order(resid, cancel)?;
    let b0_dag = prune_weights(resid, &order)?;
    let b0 = b0_dag.weights().cloned().unwrap_or_else(|| DMatrix::zeros(p, p));
    let prune = |m: DMatrix<f64>| m.map(|v| if v.abs() < VAR_LINGAM_PRUNE { 0.0 } else { v });
    let b0 = prune(b0);
    let i_minus_b0 = DMatrix::identity(p, p) - &b0;
    let lagged: Vec<DMatrix<f64>> = fit.coefs.iter().map(|m| prune(m * &i_minus_b0)).collect();
    let graph = TemporalGraph::new(b0, lagged)?.with_labels(series.names())?;
    Ok(VarLingamFit { graph, causal_order: order, low_confidence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::sim::{sample_noise, NoiseKind};

    fn two_node(seed: u64, noise: NoiseKind) -> Dataset {
        let n = 5000;
        let mut rng = seeded(seed);
        let e1 = sample_noise(noise, 1.0, n, &mut rng);
        let e2 = sample_noise(noise, 1.0, n, &mut rng);
        let (mut x1, mut x2) = (vec![0.0; n], vec![0.0; n]);
        for t in 1..n {
            x1[t] = 0.5 * x2[t - 1] + e1[t];
            x2[t] = 0.7 * x1[t] + e2[t];
        }
        x1.extend(x2);
        Dataset::continuous(DMatrix::from_column_slice(n, 2, &x1))
    }

    #[test]
    fn recovers_instantaneous_and_lagged() {
        let seeds = 20;
        let ok = (0..seeds)
            .filter(|&s| {
                let g = var_lingam(&two_node(s, NoiseKind::Uniform), 1).unwrap().graph;
                g.intra()[(0, 1)] != 0.0 && g.intra()[(1, 0)] == 0.0 && g.lagged()[0][(1, 0)] != 0.0
            })
            .count();
        assert!(ok as f64 / seeds as f64 >= 0.9, "{ok}");
    }

    #[test]
    fn gaussian_flagged() {
        assert!(var_lingam(&two_node(1, NoiseKind::Gaussian), 1).unwrap().low_confidence);
        assert!(!var_lingam(&two_node(1, NoiseKind::Uniform), 1).unwrap().low_confidence);
    }

    #[test]
    fn zero_instantaneous_keeps_var_coefficients() {
        let m = DMatrix::from_row_slice(2, 2, &[0.3, 0.2, -0.4, 0.1]);
        let b0 = DMatrix::<f64>::zeros(2, 2);
        assert_eq!(&m * (DMatrix::identity(2, 2) - b0), m);
    }
}

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::with_intercept;
use nalgebra::DMatrix;

/// Least-squares VAR(L). `coefs[k - 1][(i, j)]` is the effect of
/// `x_{t-k, i}` on `x_{t, j}` (row = cause, as in graph adjacency).
#[derive(Debug, Clone, PartialEq)]
pub struct VarFit {
    pub lag_order: usize,
    pub intercept: Vec<f64>,
    pub coefs: Vec<DMatrix<f64>>,
    /// `(n_steps - lag_order) x p`.
    pub residuals: DMatrix<f64>,
    pub rss_per_equation: Vec<f64>,
}

/// Rows `t = lag..T` of `[x_{t-1}, ..., x_{t-lag}]`, each block `p` wide.
pub(crate) fn lag_matrix(x: &DMatrix<f64>, lag: usize) -> DMatrix<f64> {
    let (t, p) = (x.nrows(), x.ncols());
    DMatrix::from_fn(t - lag, p * lag, |r, c| {
        let (k, v) = (c / p + 1, c % p);
        x[(r + lag - k, v)]
    })
}

pub(crate) fn check_length(n_steps: usize, needed: usize) -> Result<()> {
    if n_steps <= needed {
        return Err(Error::InsufficientLength { needed: needed + 1, have: n_steps });
    }
    Ok(())
}

/// Multi-output least squares `y ~ x`; `x` includes any intercept column.
pub(crate) fn multi_ols(x: &DMatrix<f64>, y: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    let beta = match xtx.clone().cholesky() {
        Some(ch) => ch.solve(&xty),
        None => xtx.svd(true, true).solve(&xty, 1e-12).unwrap_or_else(|_| DMatrix::zeros(x.ncols(), y.ncols())),
    };
    let resid = y - x * &beta;
    (beta, resid)
}

pub fn fit_var(series: &Dataset, lag: usize) -> Result<VarFit> {
    if lag == 0 {
        return Err(Error::InvalidParameter("VAR lag order must be at least 1".into()));
    }
    series.require_complete()?;
    let (t, p) = (series.n_samples(), series.n_columns());
    check_length(t, (lag + 1) * p + 1)?;
    let x = &series.values;
    let design = with_intercept(&lag_matrix(x, lag));
    let y = x.rows(lag, t - lag).into_owned();
    let (beta, residuals) = multi_ols(&design, &y);
    let coefs = (0..lag).map(|k| beta.rows(1 + k * p, p).into_owned()).collect();
    let rss_per_equation = (0..p).map(|j| residuals.column(j).norm_squared()).collect();
    Ok(VarFit { lag_order: lag, intercept: beta.row(0).iter().copied().collect(), coefs, residuals, rss_per_equation })
}

//! Small least-squares and statistics helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub beta: DVector<f64>,
    pub residuals: DVector<f64>,
    pub rss: f64,
}

/// Least squares `y ~ x` via the normal equations (Cholesky), falling back
/// to an SVD solve when `x^T x` is not numerically positive definite.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> OlsFit {
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    let beta = match xtx.clone().cholesky() {
        Some(ch) => ch.solve(&xty),
        None => xtx.svd(true, true).solve(&xty, 1e-12).unwrap_or_else(|_| DVector::zeros(x.ncols())),
    };
    let residuals = y - x * &beta;
    let rss = residuals.norm_squared();
    OlsFit { beta, residuals, rss }
}

/// Design matrix with a leading intercept column.
pub fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::from_element(x.nrows(), x.ncols() + 1, 1.0);
    out.view_mut((0, 1), (x.nrows(), x.ncols())).copy_from(x);
    out
}

pub fn std_normal() -> Normal {
    Normal::standard()
}

pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// Two-sided standard-normal tail probability `2 (1 - Phi(|z|))`, computed
/// through `erfc` so small tails keep full precision.
pub fn two_sided_normal_p(z: f64) -> f64 {
    libm::erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Sample correlation matrix of complete data.
pub fn correlation(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let p = x.ncols();
    let c = crate::data::center(x);
    let cov = c.transpose() * &c / n;
    let sd: Vec<f64> = (0..p).map(|i| cov[(i, i)].sqrt()).collect();
    DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else if sd[i] > 0.0 && sd[j] > 0.0 {
            cov[(i, j)] / (sd[i] * sd[j])
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_recovers_exact_line() {
        let x = with_intercept(&DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]));
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let f = ols(&x, &y);
        assert!((f.beta[0] - 1.0).abs() < 1e-12 && (f.beta[1] - 2.0).abs() < 1e-12);
        assert!(f.rss < 1e-20);
    }

    #[test]
    fn normal_tail() {
        assert!((two_sided_normal_p(2.0) - 0.045_500_263_896_358_42).abs() < 1e-15);
        assert_eq!(two_sided_normal_p(0.0), 1.0);
    }
}

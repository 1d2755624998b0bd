//! Test distributions and multiple-testing helpers.

use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

/// Upper tail of the F distribution.
pub fn f_sf(f: f64, df1: f64, df2: f64) -> f64 {
    if !(f > 0.0) {
        return 1.0;
    }
    match FisherSnedecor::new(df1, df2) {
        Ok(d) => d.sf(f).clamp(0.0, 1.0),
        Err(_) => 1.0,
    }
}

/// Jarque-Bera normality test: `(n/6)(S^2 + (K - 3)^2 / 4)` against
/// chi-squared with 2 degrees of freedom. Returns `(statistic, p)`.
pub fn jarque_bera(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if n < 3.0 {
        return (0.0, 1.0);
    }
    let m = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    if m2 <= 0.0 {
        return (0.0, 1.0);
    }
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    jarque_bera_from_moments(n, m3 / m2.powf(1.5), m4 / (m2 * m2))
}

/// Jarque-Bera statistic and p-value from sample size, skewness and kurtosis.
pub fn jarque_bera_from_moments(n: f64, skewness: f64, kurtosis: f64) -> (f64, f64) {
    let jb = n / 6.0 * (skewness * skewness + (kurtosis - 3.0).powi(2) / 4.0);
    (jb, ChiSquared::new(2.0).expect("df 2").sf(jb))
}

/// Benjamini-Hochberg step-up procedure at level `q`; returns the rejection
/// mask in input order.
pub fn benjamini_hochberg(p: &[f64], q: f64) -> Vec<bool> {
    let m = p.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let cutoff = (0..m).rev().find(|&r| p[idx[r]] <= q * (r + 1) as f64 / m as f64);
    let mut out = vec![false; m];
    if let Some(r) = cutoff {
        for &i in &idx[..=r] {
            out[i] = true;
        }
    }
    out
}

/// Sample mean and standard deviation (n - 1); a single value has std 0.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = x.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (m, 0.0);
    }
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (m, v.sqrt())
}

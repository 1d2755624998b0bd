//! Linear NOTEARS: least squares with an L1 penalty under the smooth
//! acyclicity constraint `h(W) = tr(exp(W o W)) - d = 0`, solved by an
//! augmented Lagrangian with a bounded quasi-Newton inner loop. The same
//! machinery handles the stacked `[W; A]` parameter block of DYNOTEARS.

use crate::cancel::CancelToken;
use crate::data::{center, column_moments, Dataset};
use crate::error::{Error, Result};
use crate::graph::Dag;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NotearsConfig {
    pub lambda1: f64,
    pub w_threshold: f64,
    pub h_tol: f64,
    pub rho_max: f64,
    pub max_outer: usize,
}

impl Default for NotearsConfig {
    fn default() -> Self {
        NotearsConfig { lambda1: 0.1, w_threshold: 0.3, h_tol: 1e-8, rho_max: 1e16, max_outer: 100 }
    }
}

impl NotearsConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda1 >= 0.0 && self.w_threshold >= 0.0 && self.h_tol > 0.0 && self.rho_max > 0.0 && self.max_outer > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid NOTEARS configuration {self:?}")))
        }
    }
}

/// `h(W)` and its gradient `2 W o exp(W o W)^T`.
pub fn acyclicity(w: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let e = w.component_mul(w).exp();
    let h = e.trace() - w.nrows() as f64;
    let g = e.transpose().component_mul(w) * 2.0;
    (h, g)
}

/// Augmented Lagrangian objective over a stacked block `B = [W; A]` where
/// `W` is `d x d` and `A` has `m - d` rows of lagged coefficients:
///
/// `1/(2n) ||X - [X Z] B||^2 + rho/2 h(W)^2 + alpha h(W) + l_w |W|_1 + l_a |A|_1`.
///
/// The least-squares term works on precomputed Gram blocks, so evaluation
/// cost does not depend on the sample size.
#[derive(Debug, Clone)]
pub struct AugmentedObjective {
    gram: DMatrix<f64>,
    cross: DMatrix<f64>,
    xx: f64,
    d: usize,
    pub rho: f64,
    pub alpha: f64,
    pub lambda_w: f64,
    pub lambda_a: f64,
}

impl AugmentedObjective {
    pub fn tabular(x: &DMatrix<f64>, lambda: f64) -> Self {
        Self::temporal(x, &DMatrix::zeros(x.nrows(), 0), lambda, 0.0)
    }

    /// `x` is the `n x d` current-time block, `z` the `n x (d L)` lagged block.
    pub fn temporal(x: &DMatrix<f64>, z: &DMatrix<f64>, lambda_w: f64, lambda_a: f64) -> Self {
        let n = x.nrows() as f64;
        let (d, k) = (x.ncols(), z.ncols());
        let mut y = DMatrix::zeros(x.nrows(), d + k);
        y.columns_mut(0, d).copy_from(x);
        y.columns_mut(d, k).copy_from(z);
        let gram = y.transpose() * &y / n;
        let cross = y.transpose() * x / n;
        let xx = x.norm_squared() / n;
        AugmentedObjective { gram, cross, xx, d, rho: 0.0, alpha: 0.0, lambda_w, lambda_a }
    }

    pub fn n_rows(&self) -> usize {
        self.gram.nrows()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Least-squares loss and gradient.
    pub fn loss(&self, b: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let gb = &self.gram * b;
        let val = 0.5 * (self.xx - 2.0 * b.dot(&self.cross) + b.dot(&gb));
        (val, gb - &self.cross)
    }

    /// Differentiable part: loss plus augmented acyclicity terms.
    pub fn smooth(&self, b: &DMatrix<f64>) -> (f64, DMatrix<f64>, f64) {
        let (l, mut g) = self.loss(b);
        let w = b.rows(0, self.d).into_owned();
        let (h, gh) = acyclicity(&w);
        let val = l + 0.5 * self.rho * h * h + self.alpha * h;
        let mut gw = g.rows_mut(0, self.d);
        gw += gh * (self.rho * h + self.alpha);
        (val, g, h)
    }

    fn row_lambda(&self, r: usize) -> f64 {
        if r < self.d {
            self.lambda_w
        } else {
            self.lambda_a
        }
    }

    /// Full objective including the L1 terms, with the subgradient
    /// `lambda * sign(B)` (exact wherever no entry is zero).
    pub fn value_grad(&self, b: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let (mut v, mut g, _) = self.smooth(b);
        for c in 0..b.ncols() {
            for r in 0..b.nrows() {
                let lam = self.row_lambda(r);
                v += lam * b[(r, c)].abs();
                g[(r, c)] += lam * b[(r, c)].signum() * (b[(r, c)] != 0.0) as u8 as f64;
            }
        }
        (v, g)
    }

    /// Objective on the split `B = P - M`, `P, M >= 0`, flattened column-major
    /// as `[P; M]`.
    fn split_eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (m, d) = (self.n_rows(), self.d);
        let half = m * d;
        let b = DMatrix::from_fn(m, d, |r, c| x[c * m + r] - x[half + c * m + r]);
        let (mut v, g, _) = self.smooth(&b);
        let mut grad = vec![0.0; 2 * half];
        for c in 0..d {
            for r in 0..m {
                let k = c * m + r;
                let lam = self.row_lambda(r);
                v += lam * (x[k] + x[half + k]);
                grad[k] = g[(r, c)] + lam;
                grad[half + k] = -g[(r, c)] + lam;
            }
        }
        (v, grad)
    }

    fn fixed_mask(&self) -> Vec<bool> {
        let (m, d) = (self.n_rows(), self.d);
        let mut mask = vec![false; 2 * m * d];
        for j in 0..d {
            mask[j * m + j] = true;
            mask[m * d + j * m + j] = true;
        }
        mask
    }
}

const MEMORY: usize = 10;
const PG_TOL: f64 = 1e-6;
const F_TOL: f64 = 2.2e-9;
const MAX_INNER: usize = 2000;

/// Projected limited-memory quasi-Newton for `min f(x)` subject to `x >= 0`
/// and `x_k = 0` where `fixed[k]`.
fn minimize_nonneg<F>(f: F, x0: Vec<f64>, fixed: &[bool], cancel: &CancelToken) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let project = |x: &mut [f64]| {
        for k in 0..n {
            if fixed[k] || x[k] < 0.0 {
                x[k] = 0.0;
            }
        }
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let mut x = x0;
    project(&mut x);
    let (mut fx, mut g) = f(&x);
    let mut mem: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = std::collections::VecDeque::new();

    for it in 0..MAX_INNER {
        if it % 16 == 0 {
            cancel.check()?;
        }
        let free: Vec<bool> = (0..n).map(|k| !fixed[k] && !(x[k] <= 0.0 && g[k] > 0.0)).collect();
        let pg = (0..n).filter(|&k| free[k]).map(|k| g[k].abs()).fold(0.0, f64::max);
        if pg < PG_TOL {
            break;
        }
        let q0: Vec<f64> = (0..n).map(|k| if free[k] { g[k] } else { 0.0 }).collect();
        let mut q = q0.clone();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &q);
            for k in 0..n {
                q[k] -= a * y[k];
            }
            alphas.push(a);
        }
        let gamma = mem.back().map_or(1.0, |(s, y, _)| dot(s, y) / dot(y, y));
        for v in q.iter_mut() {
            *v *= gamma;
        }
        for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
            let bcoef = rho * dot(y, &q);
            for k in 0..n {
                q[k] += s[k] * (a - bcoef);
            }
        }
        let mut dir: Vec<f64> = (0..n).map(|k| if free[k] { -q[k] } else { 0.0 }).collect();
        if dot(&dir, &g) >= 0.0 {
            mem.clear();
            dir = q0.iter().map(|v| -v).collect();
        }
        let mut t = if mem.is_empty() { (1.0 / pg).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let mut xn: Vec<f64> = (0..n).map(|k| x[k] + t * dir[k]).collect();
            project(&mut xn);
            let step: Vec<f64> = (0..n).map(|k| xn[k] - x[k]).collect();
            let decrease = dot(&g, &step);
            if decrease >= 0.0 {
                t *= 0.5;
                continue;
            }
            let (fn_, gn) = f(&xn);
            if fn_ <= fx + 1e-4 * decrease {
                accepted = Some((xn, fn_, gn, step));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fn_, gn, s)) = accepted else { break };
        let y: Vec<f64> = (0..n).map(|k| gn[k] - g[k]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(1e-300) {
            if mem.len() == MEMORY {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        let rel = (fx - fn_) / fx.abs().max(fn_.abs()).max(1.0);
        x = xn;
        fx = fn_;
        g = gn;
        if rel <= F_TOL {
            break;
        }
    }
    Ok(x)
}

/// Result of the augmented Lagrangian loop: unthresholded block and final `h`.
#[derive(Debug, Clone)]
pub struct AlmSolution {
    pub b: DMatrix<f64>,
    pub h: f64,
    pub outer_iterations: usize,
}

pub fn solve_alm(mut obj: AugmentedObjective, cfg: &NotearsConfig, cancel: &CancelToken) -> Result<AlmSolution> {
    let (m, d) = (obj.n_rows(), obj.dim());
    let fixed = obj.fixed_mask();
    let mut x = vec![0.0; 2 * m * d];
    obj.rho = 1.0;
    obj.alpha = 0.0;
    let mut h = f64::INFINITY;
    let to_b = |x: &[f64]| DMatrix::from_fn(m, d, |r, c| x[c * m + r] - x[m * d + c * m + r]);
    let mut outer = 0;
    while outer < cfg.max_outer {
        outer += 1;
        cancel.check()?;
        let (x_new, h_new) = loop {
            let xn = minimize_nonneg(|v| obj.split_eval(v), x.clone(), &fixed, cancel)?;
            let hn = acyclicity(&to_b(&xn).rows(0, d).into_owned()).0;
            if hn > 0.25 * h && obj.rho < cfg.rho_max {
                obj.rho *= 10.0;
                cancel.check()?;
            } else {
                break (xn, hn);
            }
        };
        x = x_new;
        h = h_new;
        obj.alpha += obj.rho * h;
        if h <= cfg.h_tol || obj.rho >= cfg.rho_max {
            break;
        }
    }
    Ok(AlmSolution { b: to_b(&x), h, outer_iterations: outer })
}

pub fn threshold(w: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    w.map(|v| if v.abs() < t { 0.0 } else { v })
}

pub fn notears_linear(data: &Dataset, cfg: &NotearsConfig) -> Result<Dag> {
    notears_linear_cancellable(data, cfg, &CancelToken::never())
}

/// Centers the columns (no rescaling, so the equal-variance least-squares
/// loss keeps the scale information), solves, and thresholds.
pub fn notears_linear_cancellable(data: &Dataset, cfg: &NotearsConfig, cancel: &CancelToken) -> Result<Dag> {
    cfg.validate()?;
    data.require_complete()?;
    let (_, sd) = column_moments(&data.values);
    if let Some(c) = sd.iter().position(|&s| s <= 0.0) {
        return Err(Error::ConstantColumn(c));
    }
    let x = center(&data.values);
    let sol = solve_alm(AugmentedObjective::tabular(&x, cfg.lambda1), cfg, cancel)?;
    match Dag::from_weights(&threshold(&sol.b, cfg.w_threshold)) {
        Ok(d) => d.with_labels(data.names()),
        Err(_) => Err(Error::NonConvergence { h: sol.h }),
    }
}

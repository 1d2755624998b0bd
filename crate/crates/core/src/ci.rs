//! Conditional independence tests: Fisher-Z on (partial) correlations,
//! Pearson chi-squared over conditioning strata, a rank-based normal-scores
//! pathway, and a d-separation oracle for validation.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{d_separated, DiGraph};
use crate::linalg::{correlation, normal_quantile, two_sided_normal_p};
use crate::parallel::{map_slice, Parallelism};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::BTreeMap;

const CLAMP: f64 = 1.0 - 1e-12;
/// Chi-squared results are unreliable below this many samples per degree of freedom.
pub const CHI2_SAMPLES_PER_DF: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiResult {
    pub statistic: f64,
    pub p_value: f64,
    pub conditioning_size: usize,
    pub reliable: bool,
}

impl CiResult {
    fn unreliable(conditioning_size: usize) -> Self {
        CiResult { statistic: 0.0, p_value: 1.0, conditioning_size, reliable: false }
    }
}

/// Correlation matrix and sample size: everything Fisher-Z needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub correlation: DMatrix<f64>,
    pub n: usize,
}

impl SufficientStats {
    pub fn from_data(data: &Dataset) -> Result<Self> {
        data.require_complete()?;
        Ok(SufficientStats { correlation: correlation(&data.values), n: data.n_samples() })
    }

    pub fn n_vars(&self) -> usize {
        self.correlation.nrows()
    }
}

/// Partial correlation of `i` and `j` given `cond` from the inverse of the
/// correlation submatrix. With an empty conditioning set this is the raw
/// correlation. The magnitude is clamped to `1 - 1e-12`. The pair is
/// ordered first, so the result is bit-identical under swapping `i` and `j`.
pub fn partial_correlation(stats: &SufficientStats, i: usize, j: usize, cond: &[usize]) -> Result<f64> {
    assert!(i != j && !cond.contains(&i) && !cond.contains(&j), "i, j must be distinct and outside cond");
    let (i, j) = (i.min(j), i.max(j));
    let r = if cond.is_empty() {
        stats.correlation[(i, j)]
    } else {
        let idx: Vec<usize> = [i, j].into_iter().chain(cond.iter().copied()).collect();
        let k = idx.len();
        let sub = DMatrix::from_fn(k, k, |a, b| stats.correlation[(idx[a], idx[b])]);
        let omega = sub.cholesky().ok_or(Error::SingularSubmatrix)?.inverse();
        let d = omega[(0, 0)] * omega[(1, 1)];
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::SingularSubmatrix);
        }
        -omega[(0, 1)] / d.sqrt()
    };
    Ok(r.clamp(-CLAMP, CLAMP))
}

/// Partial correlation through a pseudo-inverse; used when the submatrix is
/// singular (for example duplicated columns).
fn partial_correlation_pinv(stats: &SufficientStats, i: usize, j: usize, cond: &[usize]) -> f64 {
    let (i, j) = (i.min(j), i.max(j));
    let idx: Vec<usize> = [i, j].into_iter().chain(cond.iter().copied()).collect();
    let k = idx.len();
    let sub = DMatrix::from_fn(k, k, |a, b| stats.correlation[(idx[a], idx[b])]);
    let omega = match sub.pseudo_inverse(1e-10) {
        Ok(m) => m,
        Err(_) => return 0.0,
    };
    let d = omega[(0, 0)] * omega[(1, 1)];
    if d > 0.0 {
        (-omega[(0, 1)] / d.sqrt()).clamp(-CLAMP, CLAMP)
    } else {
        0.0
    }
}

/// Fisher-Z test. With `n <= |cond| + 3` the result is "independent,
/// unreliable" (p = 1).
pub fn fisher_z_test(stats: &SufficientStats, i: usize, j: usize, cond: &[usize]) -> CiResult {
    let k = cond.len();
    if stats.n <= k + 3 {
        return CiResult::unreliable(k);
    }
    let (r, reliable) = match partial_correlation(stats, i, j, cond) {
        Ok(r) => (r, true),
        Err(_) => (partial_correlation_pinv(stats, i, j, cond), false),
    };
    let z = 0.5 * ((1.0 + r) / (1.0 - r)).ln();
    let statistic = ((stats.n - k - 3) as f64).sqrt() * z.abs();
    CiResult { statistic, p_value: two_sided_normal_p(statistic), conditioning_size: k, reliable }
}

fn discrete_codes(data: &Dataset, c: usize) -> Result<Vec<usize>> {
    if !data.is_discrete(c) {
        return Err(Error::NonDiscreteColumn(c));
    }
    Ok(data.values.column(c).iter().map(|&v| v as usize).collect())
}

/// Pearson chi-squared test summed over strata of the conditioning columns.
/// Degrees of freedom add `(r - 1)(c - 1)` per nonempty stratum using the
/// levels observed in that stratum. Below 10 samples per degree of freedom
/// the result is "independent, unreliable".
pub fn chi_squared_test(data: &Dataset, i: usize, j: usize, cond: &[usize]) -> Result<CiResult> {
    let xi = discrete_codes(data, i)?;
    let xj = discrete_codes(data, j)?;
    let xc: Vec<Vec<usize>> = cond.iter().map(|&c| discrete_codes(data, c)).collect::<Result<_>>()?;
    let n = data.n_samples();
    let mut strata: BTreeMap<Vec<usize>, BTreeMap<(usize, usize), f64>> = BTreeMap::new();
    for r in 0..n {
        let key: Vec<usize> = xc.iter().map(|c| c[r]).collect();
        *strata.entry(key).or_default().entry((xi[r], xj[r])).or_default() += 1.0;
    }
    let mut stat = 0.0;
    let mut df = 0usize;
    for table in strata.values() {
        let mut rows: BTreeMap<usize, f64> = BTreeMap::new();
        let mut cols: BTreeMap<usize, f64> = BTreeMap::new();
        let mut total = 0.0;
        for (&(a, b), &cnt) in table {
            *rows.entry(a).or_default() += cnt;
            *cols.entry(b).or_default() += cnt;
            total += cnt;
        }
        for (&a, &ra) in &rows {
            for (&b, &cb) in &cols {
                let e = ra * cb / total;
                let o = table.get(&(a, b)).copied().unwrap_or(0.0);
                stat += (o - e).powi(2) / e;
            }
        }
        df += (rows.len() - 1) * (cols.len() - 1);
    }
    if df == 0 {
        return Ok(CiResult { statistic: 0.0, p_value: 1.0, conditioning_size: cond.len(), reliable: true });
    }
    if (n as f64) < CHI2_SAMPLES_PER_DF * df as f64 {
        return Ok(CiResult::unreliable(cond.len()));
    }
    let p = ChiSquared::new(df as f64).expect("df > 0").sf(stat);
    Ok(CiResult { statistic: stat, p_value: p.clamp(0.0, 1.0), conditioning_size: cond.len(), reliable: true })
}

/// Replace every continuous column by its normal scores
/// `Phi^{-1}(rank / (n + 1))`, averaging tied ranks.
pub fn rank_transform(data: &Dataset) -> Result<Dataset> {
    let n = data.n_samples();
    let mut out = data.clone();
    for c in 0..data.n_columns() {
        if data.is_discrete(c) {
            continue;
        }
        let col = data.column(c);
        if col.iter().all(|&v| v == col[0]) {
            return Err(Error::ConstantColumn(c));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
        let mut ranks = vec![0.0; n];
        let mut k = 0;
        while k < n {
            let mut e = k;
            while e + 1 < n && col[order[e + 1]] == col[order[k]] {
                e += 1;
            }
            let avg = (k + e) as f64 / 2.0 + 1.0;
            for &idx in &order[k..=e] {
                ranks[idx] = avg;
            }
            k = e + 1;
        }
        for r in 0..n {
            out.values[(r, c)] = normal_quantile(ranks[r] / (n as f64 + 1.0));
        }
    }
    Ok(out)
}

/// Which test a constraint-based search uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiTestKind {
    FisherZ,
    ChiSquared,
    RankFisherZ,
}

impl CiTestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CiTestKind::FisherZ => "fisher_z",
            CiTestKind::ChiSquared => "chi_squared",
            CiTestKind::RankFisherZ => "rank_fisher_z",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fisher_z" | "fisherz" => Some(CiTestKind::FisherZ),
            "chi_squared" | "chisq" => Some(CiTestKind::ChiSquared),
            "rank_fisher_z" => Some(CiTestKind::RankFisherZ),
            _ => None,
        }
    }
}

/// A conditional independence test over the variables of one dataset.
pub trait CiTest: Sync + Send {
    fn n_vars(&self) -> usize;
    fn test(&self, i: usize, j: usize, cond: &[usize]) -> CiResult;
}

pub struct FisherZ {
    stats: SufficientStats,
    /// Cleared when discrete columns were coded numerically.
    trusted: bool,
}

impl FisherZ {
    pub fn new(stats: SufficientStats) -> Self {
        FisherZ { stats, trusted: true }
    }
}

impl CiTest for FisherZ {
    fn n_vars(&self) -> usize {
        self.stats.n_vars()
    }

    fn test(&self, i: usize, j: usize, cond: &[usize]) -> CiResult {
        let mut r = fisher_z_test(&self.stats, i, j, cond);
        r.reliable &= self.trusted;
        r
    }
}

pub struct ChiSquaredTest {
    data: Dataset,
}

impl CiTest for ChiSquaredTest {
    fn n_vars(&self) -> usize {
        self.data.n_columns()
    }

    fn test(&self, i: usize, j: usize, cond: &[usize]) -> CiResult {
        chi_squared_test(&self.data, i, j, cond).unwrap_or(CiResult::unreliable(cond.len()))
    }
}

/// Exact CI answers from d-separation in a known DAG (p = 1 when separated,
/// 0 otherwise).
pub struct DSeparationOracle {
    graph: DiGraph,
}

impl DSeparationOracle {
    pub fn new(graph: DiGraph) -> Self {
        DSeparationOracle { graph }
    }
}

impl CiTest for DSeparationOracle {
    fn n_vars(&self) -> usize {
        self.graph.n_nodes()
    }

    fn test(&self, i: usize, j: usize, cond: &[usize]) -> CiResult {
        let sep = d_separated(&self.graph, i, j, cond);
        CiResult {
            statistic: if sep { 0.0 } else { f64::INFINITY },
            p_value: if sep { 1.0 } else { 0.0 },
            conditioning_size: cond.len(),
            reliable: true,
        }
    }
}

/// Build the requested test for `data`. Fisher-Z on data with discrete
/// columns uses their integer codes and marks every result unreliable.
pub fn build_test(data: &Dataset, kind: CiTestKind) -> Result<Box<dyn CiTest>> {
    data.require_complete()?;
    match kind {
        CiTestKind::FisherZ => {
            let trusted = data.all_continuous();
            Ok(Box::new(FisherZ { stats: SufficientStats::from_data(data)?, trusted }))
        }
        CiTestKind::RankFisherZ => {
            let ranked = rank_transform(data)?;
            let trusted = data.all_continuous();
            Ok(Box::new(FisherZ { stats: SufficientStats::from_data(&ranked)?, trusted }))
        }
        CiTestKind::ChiSquared => {
            if let Some(c) = (0..data.n_columns()).find(|&c| !data.is_discrete(c)) {
                return Err(Error::TestMismatch {
                    test: "chi_squared".into(),
                    reason: format!("column {} ({}) is continuous", c, data.columns[c].name),
                });
            }
            Ok(Box::new(ChiSquaredTest { data: data.clone() }))
        }
    }
}

/// Evaluate many `(i, j, cond)` triples against one shared test.
pub fn test_batch(test: &dyn CiTest, triples: &[(usize, usize, Vec<usize>)], mode: Parallelism) -> Vec<CiResult> {
    map_slice(triples, mode, |(i, j, c)| test.test(*i, *j, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnMeta;
    use crate::rng::seeded;
    use crate::sim::{sample_noise, NoiseKind};

    fn stats_of(corr: DMatrix<f64>, n: usize) -> SufficientStats {
        SufficientStats { correlation: corr, n }
    }

    #[test]
    fn empty_cond_is_raw_correlation() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]);
        assert_eq!(partial_correlation(&stats_of(c, 100), 0, 1, &[]).unwrap(), 0.3);
    }

    #[test]
    fn unit_chain_partial_is_zero() {
        // X -> Y -> Z, unit weights and noise: var X=1, Y=2, Z=3
        let (rxy, ryz, rxz) = (1.0 / 2f64.sqrt(), 2.0 / 6f64.sqrt(), 1.0 / 3f64.sqrt());
        let c = DMatrix::from_row_slice(3, 3, &[1.0, rxy, rxz, rxy, 1.0, ryz, rxz, ryz, 1.0]);
        let r = partial_correlation(&stats_of(c, 100), 0, 2, &[1]).unwrap();
        assert!(r.abs() < 1e-9, "r = {r}");
    }

    #[test]
    fn identical_columns_clamp() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let s = stats_of(c, 100);
        assert_eq!(partial_correlation(&s, 0, 1, &[]).unwrap(), 1.0 - 1e-12);
        let r = fisher_z_test(&s, 0, 1, &[]);
        assert!(r.statistic.is_finite() && r.p_value < 1e-10);
    }

    #[test]
    fn singular_conditioning_reported() {
        let c = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 1.0, 0.5, 1.0, 0.5, 1.0, 0.5, 1.0]);
        let s = stats_of(c, 100);
        assert_eq!(partial_correlation(&s, 0, 1, &[2]), Err(Error::SingularSubmatrix));
        assert!(!fisher_z_test(&s, 0, 1, &[2]).reliable);
    }

    #[test]
    fn fisher_z_closed_form() {
        let zero = stats_of(DMatrix::identity(2, 2), 50);
        let r = fisher_z_test(&zero, 0, 1, &[]);
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));

        let rho = 0.2f64.tanh();
        let c = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
        let r = fisher_z_test(&stats_of(c, 103), 0, 1, &[]);
        assert!((r.statistic - 2.0).abs() < 1e-9);
        assert!((r.p_value - 0.045_500_263_896_358_42).abs() < 1e-9);
        assert!((r.p_value - 0.0455).abs() < 1e-4);
    }

    #[test]
    fn insufficient_samples_are_unreliable() {
        let r = fisher_z_test(&stats_of(DMatrix::identity(4, 4), 5), 0, 1, &[2, 3]);
        assert!(!r.reliable);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn fisher_z_is_symmetric() {
        let x = DMatrix::from_fn(200, 3, |r, c| ((r * 7 + c * 13) % 17) as f64 + (r as f64).sin());
        let s = SufficientStats::from_data(&Dataset::continuous(x)).unwrap();
        assert_eq!(fisher_z_test(&s, 0, 1, &[2]).p_value, fisher_z_test(&s, 1, 0, &[2]).p_value);
    }

    fn indep_rejection(alpha: f64, trials: u64, n: usize) -> f64 {
        let mut rej = 0;
        for t in 0..trials {
            let mut rng = seeded(1000 + t);
            let a = sample_noise(NoiseKind::Gaussian, 1.0, n, &mut rng);
            let b = sample_noise(NoiseKind::Gaussian, 1.0, n, &mut rng);
            let mut v = a;
            v.extend(b);
            let d = Dataset::continuous(DMatrix::from_column_slice(n, 2, &v));
            let s = SufficientStats::from_data(&d).unwrap();
            if fisher_z_test(&s, 0, 1, &[]).p_value < alpha {
                rej += 1;
            }
        }
        rej as f64 / trials as f64
    }

    #[test]
    fn fisher_z_type_one_calibration() {
        for alpha in [0.01, 0.05] {
            let rate = indep_rejection(alpha, 1000, 1000);
            assert!((rate - alpha).abs() <= 0.02, "alpha {alpha} rate {rate}");
        }
    }

    fn discrete_data(cols: Vec<Vec<usize>>, card: usize) -> Dataset {
        let n = cols[0].len();
        let flat: Vec<f64> = cols.iter().flatten().map(|&v| v as f64).collect();
        let mut d = Dataset::continuous(DMatrix::from_column_slice(n, cols.len(), &flat));
        for c in 0..cols.len() {
            d.columns[c] = ColumnMeta::discrete(format!("X{c}"), card);
        }
        d
    }

    #[test]
    fn chi_squared_dependent_and_calibrated() {
        use rand::Rng as _;
        let mut rng = seeded(3);
        let a: Vec<usize> = (0..2000).map(|_| rng.random_range(0..3)).collect();
        let d = discrete_data(vec![a.clone(), a], 3);
        assert!(chi_squared_test(&d, 0, 1, &[]).unwrap().p_value < 1e-12);

        let mut rej = 0;
        for t in 0..1000 {
            let mut rng = seeded(50_000 + t);
            let a: Vec<usize> = (0..2000).map(|_| rng.random_range(0..3)).collect();
            let b: Vec<usize> = (0..2000).map(|_| rng.random_range(0..3)).collect();
            if chi_squared_test(&discrete_data(vec![a, b], 3), 0, 1, &[]).unwrap().p_value < 0.05 {
                rej += 1;
            }
        }
        let rate = rej as f64 / 1000.0;
        assert!((rate - 0.05).abs() <= 0.02, "rate {rate}");
    }

    #[test]
    fn chi_squared_reliability_rule() {
        // 3x3 table per stratum, 3 strata -> df 12, needs n >= 120
        use rand::Rng as _;
        let mut rng = seeded(4);
        let cols: Vec<Vec<usize>> = (0..3).map(|_| (0..60).map(|_| rng.random_range(0..3)).collect()).collect();
        let r = chi_squared_test(&discrete_data(cols, 3), 0, 1, &[2]).unwrap();
        assert!(!r.reliable);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn chi_squared_rejects_continuous() {
        let d = Dataset::continuous(DMatrix::zeros(10, 2));
        assert_eq!(chi_squared_test(&d, 0, 1, &[]), Err(Error::NonDiscreteColumn(0)));
        assert!(build_test(&d, CiTestKind::ChiSquared).is_err());
    }

    #[test]
    fn rank_transform_properties() {
        let x = sample_noise(NoiseKind::Gaussian, 1.0, 5000, &mut seeded(9));
        let mut v = x.clone();
        v.extend(x.iter().map(|a| a.exp()));
        let d = Dataset::continuous(DMatrix::from_column_slice(5000, 2, &v));
        let t = rank_transform(&d).unwrap();
        // exp is monotone: identical normal scores
        assert_eq!(t.column(0), t.column(1));
        let c = correlation(&DMatrix::from_fn(5000, 2, |r, k| if k == 0 { x[r] } else { t.values[(r, 0)] }));
        assert!(c[(0, 1)] >= 0.99);
        let constant = Dataset::continuous(DMatrix::from_element(5, 1, 2.0));
        assert_eq!(rank_transform(&constant), Err(Error::ConstantColumn(0)));
    }

    #[test]
    fn affine_rescaling_invariance() {
        let mut rng = seeded(12);
        let a = sample_noise(NoiseKind::Gaussian, 1.0, 500, &mut rng);
        let b: Vec<f64> = a.iter().zip(sample_noise(NoiseKind::Gaussian, 1.0, 500, &mut rng)).map(|(x, e)| 0.3 * x + e).collect();
        let c = sample_noise(NoiseKind::Gaussian, 1.0, 500, &mut rng);
        let mk = |s: f64, o: f64| {
            let mut v: Vec<f64> = a.iter().map(|x| s * x + o).collect();
            v.extend(&b);
            v.extend(&c);
            SufficientStats::from_data(&Dataset::continuous(DMatrix::from_column_slice(500, 3, &v))).unwrap()
        };
        let p1 = fisher_z_test(&mk(1.0, 0.0), 0, 1, &[2]).p_value;
        let p2 = fisher_z_test(&mk(7.5, -3.0), 0, 1, &[2]).p_value;
        assert!((p1 - p2).abs() < 1e-9);
    }

    #[test]
    fn batch_matches_single_calls() {
        let g = crate::graph::erdos_renyi_dag(6, 0.4, 2);
        let oracle = DSeparationOracle::new(g.graph().clone());
        let triples: Vec<(usize, usize, Vec<usize>)> = (0..6).flat_map(|i| ((i + 1)..6).map(move |j| (i, j, vec![]))).collect();
        let seq = test_batch(&oracle, &triples, Parallelism::Sequential);
        let par = test_batch(&oracle, &triples, Parallelism::Parallel);
        assert_eq!(seq, par);
    }
}

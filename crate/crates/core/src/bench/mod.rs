//! Monte-Carlo forecasting experiments on simulated series.
//!
//! Every replicate simulates one training path plus a test segment. All
//! methods and lag scenarios of a replicate see the same path, so method
//! comparisons are paired; each method fits on its own model seed.

mod tables;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use tables::{emit_tables, render_table, TableFormat};

use crate::dgp::{generate, DgpKind, DgpSpec, DEFAULT_BURN_IN, M3_CHANNEL};
use crate::embed::{embed, one_step_forecasts, LagSpec};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, Forest, ForestConfig, MTry};
use crate::policy::{paper_node_size, GrowthPolicy};
use crate::rng::derive_seed;
use crate::weighting::WeightScheme;

/// Block length of the moving-block bootstrap baseline on simulated data.
pub const TSRF_BLOCK_LEN: usize = 10;

/// A forest variant under comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Method {
    pub name: String,
    pub scheme: WeightScheme,
    pub m_try: MTry,
}

impl Method {
    pub fn new(name: &str, scheme: WeightScheme, m_try: MTry) -> Self {
        Method {
            name: name.to_string(),
            scheme,
            m_try,
        }
    }

    /// Random weights, a third of the features per split.
    pub fn rf_rw_1() -> Self {
        Method::new("RF-RW-1", WeightScheme::ExpOne, MTry::Third)
    }

    /// Random weights, all features per split.
    pub fn rf_rw_2() -> Self {
        Method::new("RF-RW-2", WeightScheme::ExpOne, MTry::All)
    }

    /// Moving-block bootstrap forest.
    pub fn ts_rf(block_len: usize) -> Self {
        Method::new(
            "tsRF",
            WeightScheme::MovingBlockBootstrap { block_len },
            MTry::Third,
        )
    }

    /// Classic bootstrap forest.
    pub fn rf() -> Self {
        Method::new("RF", WeightScheme::Bootstrap, MTry::Third)
    }

    /// Every tree on the unweighted data; only feature sampling varies.
    pub fn constant_one() -> Self {
        Method::new("ConstantOne", WeightScheme::ConstantOne, MTry::Third)
    }

    fn name_tag(&self) -> u64 {
        // FNV-1a, so model seeds depend on the method name and not on list order.
        self.name
            .bytes()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
    }
}

impl FromStr for Method {
    type Err = Error;

    /// `rfrw1`, `rfrw2` (optionally suffixed `-ln` or `-sg` for lognormal or
    /// square-root-gamma weights), `tsrf`, `rf`, `ones`.
    fn from_str(s: &str) -> Result<Self> {
        let (base, suffix) = match s.split_once('-') {
            Some((b, x)) => (b, Some(x)),
            None => (s, None),
        };
        let mut method = match base {
            "rfrw1" => Method::rf_rw_1(),
            "rfrw2" => Method::rf_rw_2(),
            "tsrf" => Method::ts_rf(TSRF_BLOCK_LEN),
            "rf" => Method::rf(),
            "ones" => Method::constant_one(),
            _ => return Err(Error::Parse(format!("unknown method `{s}`"))),
        };
        match (suffix, base.starts_with("rfrw")) {
            (None, _) => {}
            (Some("ln"), true) => {
                method.scheme = WeightScheme::LogNormalUnit;
                method.name.push_str("-ln");
            }
            (Some("sg"), true) => {
                method.scheme = WeightScheme::SqrtGammaUnit;
                method.name.push_str("-sg");
            }
            _ => return Err(Error::Parse(format!("unknown method `{s}`"))),
        }
        Ok(method)
    }
}

/// Growth rule used for every method of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyChoice {
    AlgorithmicK,
    /// `ValidPartition` with the given `xi` and `m = 2k`.
    ValidPartition { xi: f64 },
}

impl PolicyChoice {
    pub fn with_k(&self, k: usize) -> GrowthPolicy {
        match *self {
            PolicyChoice::AlgorithmicK => GrowthPolicy::AlgorithmicK { k },
            PolicyChoice::ValidPartition { xi } => GrowthPolicy::ValidPartition { xi, k, m: 2 * k },
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub dgp: DgpKind,
    pub t_values: Vec<usize>,
    pub test_size: usize,
    pub replications: usize,
    pub methods: Vec<Method>,
    /// Number of lags per scenario (lags of both channels for M3).
    pub scenarios: Vec<usize>,
    pub base_seed: u64,
    pub burn_in: usize,
    pub num_trees: usize,
    /// Minimum node size; `None` uses the `paper_node_size(T)` schedule.
    pub k_override: Option<usize>,
    pub policy: PolicyChoice,
}

impl ExperimentSpec {
    /// Desk-scale defaults: T in {500, 1000, 2000}, 100 test points,
    /// 30 replicates, B = 100, the process's three lag scenarios.
    pub fn new(dgp: DgpKind, methods: Vec<Method>) -> Self {
        ExperimentSpec {
            scenarios: dgp.scenarios(),
            dgp,
            t_values: vec![500, 1000, 2000],
            test_size: 100,
            replications: 30,
            methods,
            base_seed: 42,
            burn_in: DEFAULT_BURN_IN,
            num_trees: 100,
            k_override: None,
            policy: PolicyChoice::AlgorithmicK,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if self.t_values.is_empty() || self.scenarios.is_empty() {
            return Err(Error::InvalidConfig("need at least one T and one lag scenario".into()));
        }
        if self.test_size == 0 {
            return Err(Error::InvalidConfig("test size must be positive".into()));
        }
        for &t in &self.t_values {
            let lags = self.scenarios.iter().max().copied().unwrap_or(0);
            if t <= lags {
                return Err(Error::SeriesTooShort { len: t, max_lag: lags });
            }
            if self.k_override.is_none() {
                paper_node_size(t)?;
            }
        }
        Ok(())
    }

    fn lag_spec(&self, lags: usize) -> LagSpec {
        let spec = LagSpec::response(lags);
        if self.dgp.has_exogenous() {
            spec.with_channel(M3_CHANNEL, lags)
        } else {
            spec
        }
    }

    /// Forest settings used for `method` at sample size `t`.
    pub fn forest_config(&self, method: &Method, t: usize, master_seed: u64) -> Result<ForestConfig> {
        let k = match self.k_override {
            Some(k) => k,
            None => paper_node_size(t)?,
        };
        Ok(ForestConfig {
            num_trees: self.num_trees,
            m_try: method.m_try,
            policy: self.policy.with_k(k),
            weight_scheme: method.scheme,
            master_seed,
        })
    }

    /// Seed of the simulated path for replicate `r` at sample size `t`.
    pub fn data_seed(&self, r: usize, t: usize) -> u64 {
        derive_seed(self.base_seed, &[0xDA7A, r as u64, t as u64])
    }

    /// Seed of the forest for one (replicate, T, scenario, method) cell.
    pub fn model_seed(&self, r: usize, t: usize, lags: usize, method: &Method) -> u64 {
        derive_seed(
            self.base_seed,
            &[0x30DE1, r as u64, t as u64, lags as u64, method.name_tag()],
        )
    }
}

/// Aggregated RMSTE values of one (method, T, scenario) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub method: String,
    pub t: usize,
    pub lags: usize,
    pub mean: f64,
    pub sd: f64,
    pub replicates: Vec<f64>,
}

impl Cell {
    fn from_replicates(method: &str, t: usize, lags: usize, replicates: Vec<f64>) -> Self {
        let n = replicates.len() as f64;
        let mean = replicates.iter().sum::<f64>() / n;
        let sd = if replicates.len() > 1 {
            (replicates.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Cell {
            method: method.to_string(),
            t,
            lags,
            mean,
            sd,
            replicates,
        }
    }

    pub fn stderr(&self) -> f64 {
        self.sd / (self.replicates.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub dgp: String,
    pub methods: Vec<Method>,
    pub t_values: Vec<usize>,
    pub scenarios: Vec<usize>,
    pub replications: usize,
    pub test_size: usize,
    pub num_trees: usize,
    pub k_override: Option<usize>,
    pub policy: PolicyChoice,
    pub base_seed: u64,
    pub burn_in: usize,
    /// Replicates share simulated data across methods.
    pub paired: bool,
    /// Ordered by method, then scenario, then T.
    pub cells: Vec<Cell>,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl BenchReport {
    pub fn cell(&self, method: &str, t: usize, lags: usize) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.t == t && c.lags == lags)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Root mean squared error.
pub fn rmste(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::LengthMismatch(predictions.len(), truths.len()));
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sse: f64 = predictions.iter().zip(truths).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((sse / predictions.len() as f64).sqrt())
}

/// Runs every (replicate, T, scenario, method) combination. Any failure
/// aborts the whole run.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<BenchReport> {
    spec.validate()?;
    let started = Instant::now();
    let jobs: Vec<(usize, usize)> = (0..spec.replications)
        .flat_map(|r| spec.t_values.iter().map(move |&t| (r, t)))
        .collect();
    // results[job][scenario][method]
    let results = jobs
        .par_iter()
        .map(|&(r, t)| run_replicate(spec, r, t))
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    for (mi, method) in spec.methods.iter().enumerate() {
        for (si, &lags) in spec.scenarios.iter().enumerate() {
            for &t in &spec.t_values {
                let reps: Vec<f64> = jobs
                    .iter()
                    .zip(&results)
                    .filter(|((_, jt), _)| *jt == t)
                    .map(|(_, res)| res[si][mi])
                    .collect();
                cells.push(Cell::from_replicates(&method.name, t, lags, reps));
            }
        }
    }
    Ok(BenchReport {
        dgp: spec.dgp.to_string(),
        methods: spec.methods.clone(),
        t_values: spec.t_values.clone(),
        scenarios: spec.scenarios.clone(),
        replications: spec.replications,
        test_size: spec.test_size,
        num_trees: spec.num_trees,
        k_override: spec.k_override,
        policy: spec.policy,
        base_seed: spec.base_seed,
        burn_in: spec.burn_in,
        paired: true,
        cells,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

fn run_replicate(spec: &ExperimentSpec, r: usize, t: usize) -> Result<Vec<Vec<f64>>> {
    let path = generate(
        &DgpSpec {
            kind: spec.dgp.clone(),
            burn_in: spec.burn_in,
            seed: spec.data_seed(r, t),
        },
        t + spec.test_size,
    )?;
    let train = path.slice(0..t);
    let truths = &path.values[t..];
    spec.scenarios
        .iter()
        .map(|&lags| {
            let lag_spec = spec.lag_spec(lags);
            let data = embed(&train, &lag_spec)?;
            spec.methods
                .iter()
                .map(|method| {
                    let config = spec.forest_config(method, t, spec.model_seed(r, t, lags, method))?;
                    let forest = fit_forest(&data, &config)?;
                    let preds: Vec<f64> = one_step_forecasts(&forest, &path, &lag_spec, None, spec.test_size)?
                        .iter()
                        .map(|f| f.value())
                        .collect();
                    let e = rmste(&preds, truths)?;
                    if !e.is_finite() {
                        return Err(Error::InvalidDataset(format!(
                            "non-finite RMSTE for {} (replicate {r}, T {t})",
                            method.name
                        )));
                    }
                    Ok(e)
                })
                .collect()
        })
        .collect()
}

/// Whether one method's mean RMSTE is non-increasing in T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendVerdict {
    pub method: String,
    pub lags: usize,
    /// `(T, mean RMSTE)` in increasing T.
    pub means: Vec<(usize, f64)>,
    pub non_increasing: bool,
}

/// For every (method, scenario), checks that the mean RMSTE does not rise from
/// one T to the next by more than the pooled standard error
/// `sqrt(se_a^2 + se_b^2)` of the two means.
pub fn consistency_trend(report: &BenchReport) -> Vec<TrendVerdict> {
    let mut out = Vec::new();
    for method in &report.methods {
        for &lags in &report.scenarios {
            let mut cells: Vec<&Cell> = report
                .cells
                .iter()
                .filter(|c| c.method == method.name && c.lags == lags)
                .collect();
            cells.sort_by_key(|c| c.t);
            let non_increasing = cells.windows(2).all(|w| {
                let slack = (w[0].stderr().powi(2) + w[1].stderr().powi(2)).sqrt();
                w[1].mean <= w[0].mean + slack
            });
            out.push(TrendVerdict {
                method: method.name.clone(),
                lags,
                means: cells.iter().map(|c| (c.t, c.mean)).collect(),
                non_increasing,
            });
        }
    }
    out
}

/// Mean pairwise correlation of per-tree predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationSummary {
    pub mean: f64,
    pub pairs: usize,
    /// Trees whose predictions were constant over the query points.
    pub skipped_trees: usize,
}

/// Mean over tree pairs of the Pearson correlation between their prediction
/// vectors on `queries`. Trees that predict a constant are skipped.
pub fn inter_tree_correlation(forest: &Forest, queries: &[Vec<f64>]) -> Result<CorrelationSummary> {
    if forest.trees().len() < 2 || queries.len() < 3 {
        return Err(Error::InvalidConfig(
            "need at least 2 trees and 3 query points".into(),
        ));
    }
    let mut centered = Vec::new();
    let mut skipped = 0;
    for tree in forest.trees() {
        let preds = queries
            .iter()
            .map(|q| tree.predict(q))
            .collect::<Result<Vec<f64>>>()?;
        let mean = preds.iter().sum::<f64>() / preds.len() as f64;
        let dev: Vec<f64> = preds.iter().map(|p| p - mean).collect();
        let norm = dev.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm == 0.0 {
            skipped += 1;
        } else {
            centered.push(dev.into_iter().map(|d| d / norm).collect::<Vec<f64>>());
        }
    }
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..centered.len() {
        for j in i + 1..centered.len() {
            let r: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            total += r.clamp(-1.0, 1.0);
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(Error::DegenerateVariance);
    }
    Ok(CorrelationSummary {
        mean: total / pairs as f64,
        pairs,
        skipped_trees: skipped,
    })
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}, m_try {})", self.name, self.scheme, self.m_try)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{Leaf, PreorderNode, SeedRecord, SplitSpec, Tree};
    use crate::rng::{Purpose, Substream};

    #[test]
    fn rmste_examples() {
        assert_eq!(rmste(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmste(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
        let v = rmste(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
        assert!((v - (14.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((v - 2.160_247).abs() < 1e-6);
        assert!(matches!(rmste(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch(1, 2))));
        assert!(matches!(rmste(&[], &[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn method_parsing() {
        assert_eq!("rfrw2".parse::<Method>().unwrap(), Method::rf_rw_2());
        let ln: Method = "rfrw2-ln".parse().unwrap();
        assert_eq!(ln.scheme, WeightScheme::LogNormalUnit);
        assert_eq!(ln.name, "RF-RW-2-ln");
        assert_eq!("tsrf".parse::<Method>().unwrap().scheme, WeightScheme::MovingBlockBootstrap { block_len: 10 });
        assert!("rf-ln".parse::<Method>().is_err());
        assert!("svm".parse::<Method>().is_err());
    }

    fn report(means: &[(usize, f64, f64)]) -> BenchReport {
        BenchReport {
            dgp: "m1".into(),
            methods: vec![Method::rf_rw_2()],
            t_values: means.iter().map(|m| m.0).collect(),
            scenarios: vec![5],
            replications: 30,
            test_size: 100,
            num_trees: 100,
            k_override: None,
            policy: PolicyChoice::AlgorithmicK,
            base_seed: 0,
            burn_in: 500,
            paired: true,
            cells: means
                .iter()
                .map(|&(t, mean, sd)| Cell {
                    method: "RF-RW-2".into(),
                    t,
                    lags: 5,
                    mean,
                    sd,
                    replicates: vec![mean; 30],
                })
                .collect(),
            wall_time_secs: 0.0,
        }
    }

    #[test]
    fn trend_verdicts() {
        let r = report(&[(500, 1.28, 0.1), (1000, 1.24, 0.1), (2000, 1.20, 0.1)]);
        assert!(consistency_trend(&r)[0].non_increasing);
        let flat = report(&[(500, 1.0, 0.0), (1000, 1.0, 0.0), (2000, 1.0, 0.0)]);
        assert!(consistency_trend(&flat)[0].non_increasing);
        let rising = report(&[(500, 1.0, 1e-4), (1000, 1.1, 1e-4), (2000, 1.2, 1e-4)]);
        assert!(!consistency_trend(&rising)[0].non_increasing);
        // A rise inside one pooled standard error is tolerated.
        let noisy = report(&[(500, 1.00, 0.3), (1000, 1.05, 0.3)]);
        assert!(consistency_trend(&noisy)[0].non_increasing);
    }

    fn seeds() -> SeedRecord {
        let s = Substream::new(0, Purpose::Weights, 0);
        SeedRecord { weights: s, features: s }
    }

    fn three_leaf(a: f64, b: f64, c: f64) -> Tree {
        let leaf = |v| PreorderNode::Leaf(Leaf { estimate: v, weight_total: 1.0, count: 1 });
        Tree::from_preorder(
            vec![
                PreorderNode::Split(SplitSpec { feature: 0, threshold: 1.5 }),
                leaf(a),
                PreorderNode::Split(SplitSpec { feature: 0, threshold: 2.5 }),
                leaf(b),
                leaf(c),
            ],
            1,
            GrowthPolicy::AlgorithmicK { k: 1 },
            seeds(),
        )
        .unwrap()
    }

    fn forest(trees: Vec<Tree>) -> Forest {
        let config = ForestConfig {
            num_trees: trees.len(),
            m_try: MTry::All,
            policy: GrowthPolicy::AlgorithmicK { k: 1 },
            weight_scheme: WeightScheme::ConstantOne,
            master_seed: 0,
        };
        Forest::from_parts(trees, config, 1).unwrap()
    }

    #[test]
    fn correlation_examples() {
        let q = vec![vec![1.0], vec![2.0], vec![3.0]];
        let same = forest(vec![three_leaf(1.0, 2.0, 3.0); 4]);
        assert!((inter_tree_correlation(&same, &q).unwrap().mean - 1.0).abs() < 1e-12);
        let anti = forest(vec![three_leaf(1.0, 2.0, 3.0), three_leaf(3.0, 2.0, 1.0)]);
        assert!((inter_tree_correlation(&anti, &q).unwrap().mean + 1.0).abs() < 1e-12);
        let with_flat = forest(vec![three_leaf(1.0, 2.0, 3.0), three_leaf(5.0, 5.0, 5.0), three_leaf(2.0, 4.0, 7.0)]);
        let s = inter_tree_correlation(&with_flat, &q).unwrap();
        assert_eq!((s.pairs, s.skipped_trees), (1, 1));
        let flat = forest(vec![three_leaf(5.0, 5.0, 5.0), three_leaf(1.0, 1.0, 1.0)]);
        assert!(matches!(inter_tree_correlation(&flat, &q), Err(Error::DegenerateVariance)));
        assert!(inter_tree_correlation(&same, &q[..2]).is_err());
    }

    #[test]
    fn spec_validation() {
        let mut spec = ExperimentSpec::new(DgpKind::M1, vec![Method::rf_rw_2()]);
        assert!(spec.validate().is_ok());
        spec.replications = 0;
        assert!(spec.validate().is_err());
        spec.replications = 1;
        spec.t_values = vec![10];
        assert!(spec.validate().is_err());
    }
}

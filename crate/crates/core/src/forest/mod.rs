//! Weighted regression trees and forests.
//!
//! Each tree is grown on the full training set with its own observation
//! weight vector. Splits minimize the weighted within-child sum of squares and
//! leaves predict the weighted mean response. The forest averages its trees.

mod split;
mod tree;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use split::{best_split, node_estimate, split_score, ScoredSplit, SplitSpec};
pub use tree::{grow_tree, Leaf, Node, PreorderNode, SeedRecord, SortedColumns, Tree};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::policy::GrowthPolicy;
use crate::rng::{Purpose, Substream};
use crate::weighting::{draw_weights, WeightScheme};

/// Number of features tried at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MTry {
    /// `max(1, floor(p / 3))`.
    Third,
    /// All `p` features.
    All,
    Fixed(usize),
}

impl MTry {
    pub fn resolve(&self, p: usize) -> Result<usize> {
        let m = match *self {
            MTry::Third => (p / 3).max(1),
            MTry::All => p,
            MTry::Fixed(m) => m,
        };
        if m == 0 || m > p {
            return Err(Error::InvalidConfig(format!("m_try {m} not in [1, {p}]")));
        }
        Ok(m)
    }
}

impl fmt::Display for MTry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MTry::Third => f.write_str("third"),
            MTry::All => f.write_str("all"),
            MTry::Fixed(m) => write!(f, "{m}"),
        }
    }
}

impl FromStr for MTry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "third" => Ok(MTry::Third),
            "all" => Ok(MTry::All),
            n => n
                .parse()
                .map(MTry::Fixed)
                .map_err(|_| Error::Parse(format!("bad m_try `{n}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub num_trees: usize,
    pub m_try: MTry,
    pub policy: GrowthPolicy,
    pub weight_scheme: WeightScheme,
    pub master_seed: u64,
}

impl ForestConfig {
    /// Minimum node size `k` of the growth policy.
    pub fn min_node(&self) -> usize {
        self.policy.k()
    }

    pub fn validate(&self, p: usize) -> Result<usize> {
        if self.num_trees == 0 {
            return Err(Error::InvalidConfig("num_trees must be at least 1".into()));
        }
        self.policy.validate()?;
        if let WeightScheme::MovingBlockBootstrap { block_len: 0 } = self.weight_scheme {
            return Err(Error::InvalidBlockLen { block_len: 0, len: 0 });
        }
        self.m_try.resolve(p)
    }

    /// Substreams used for tree `b`.
    pub fn tree_streams(&self, b: usize) -> SeedRecord {
        SeedRecord {
            weights: Substream::new(self.master_seed, Purpose::Weights, b as u64),
            features: Substream::new(self.master_seed, Purpose::Features, b as u64),
        }
    }
}

/// An ensemble of weighted regression trees.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub(crate) trees: Vec<Tree>,
    pub(crate) config: ForestConfig,
    pub(crate) n_features: usize,
}

impl Forest {
    pub fn from_parts(trees: Vec<Tree>, config: ForestConfig, n_features: usize) -> Result<Self> {
        if trees.len() != config.num_trees {
            return Err(Error::InvalidConfig(format!(
                "expected {} trees, got {}",
                config.num_trees,
                trees.len()
            )));
        }
        if trees.iter().any(|t| t.n_features() != n_features) {
            return Err(Error::InvalidConfig("trees disagree on feature count".into()));
        }
        Ok(Forest {
            trees,
            config,
            n_features,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict_unchecked(x)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    /// Per-tree predictions at `x`, in tree order.
    pub fn tree_predictions(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.trees.iter().map(|t| t.predict(x)).collect()
    }

    pub fn predict_rows(&self, data: &Dataset) -> Result<Vec<f64>> {
        (0..data.n_rows()).map(|t| self.predict(&data.row(t))).collect()
    }
}

/// Fits `config.num_trees` trees. Tree `b` draws its weights from substream
/// `(master_seed, Weights, b)` and its feature samples from
/// `(master_seed, Features, b)`, so the result does not depend on scheduling.
pub fn fit_forest(data: &Dataset, config: &ForestConfig) -> Result<Forest> {
    let m_try = config.validate(data.n_features())?;
    let sorted = SortedColumns::new(data);
    let trees = (0..config.num_trees)
        .into_par_iter()
        .map(|b| {
            let streams = config.tree_streams(b);
            let weights = draw_weights(config.weight_scheme, data.n_rows(), streams.weights)?;
            tree::grow_tree_presorted(data, &sorted, &weights, m_try, &config.policy, streams.features)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest {
        trees,
        config: *config,
        n_features: data.n_features(),
    })
}

//! Tree-growth stopping rules and an auditor for fitted trees.
//!
//! Two rules are supported. `AlgorithmicK` keeps splitting any cell holding at
//! least `max(2, k)` rows, so leaves may end up smaller than `k`.
//! `ValidPartition` is the (xi, k, m)-valid partition: every split sends at
//! least `max(k, ceil(xi * n))` rows to each child, leaves hold at least `k`
//! rows, and a cell with `m` or more rows must split when any feature allows it.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::{Node, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowthPolicy {
    AlgorithmicK { k: usize },
    ValidPartition { xi: f64, k: usize, m: usize },
}

impl GrowthPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GrowthPolicy::AlgorithmicK { k: 0 } => {
                Err(Error::InvalidConfig("k must be at least 1".into()))
            }
            GrowthPolicy::AlgorithmicK { .. } => Ok(()),
            GrowthPolicy::ValidPartition { xi, k, m } => {
                if k == 0 {
                    return Err(Error::InvalidConfig("k must be at least 1".into()));
                }
                if !(xi > 0.0 && xi < 0.5) {
                    return Err(Error::InvalidConfig(format!("xi {xi} not in (0, 1/2)")));
                }
                if m < 2 * k {
                    return Err(Error::InvalidConfig(format!("m {m} must be at least 2k = {}", 2 * k)));
                }
                Ok(())
            }
        }
    }

    pub fn k(&self) -> usize {
        match *self {
            GrowthPolicy::AlgorithmicK { k } | GrowthPolicy::ValidPartition { k, .. } => k,
        }
    }

    /// Smallest node size that may be split.
    pub fn min_split_size(&self) -> usize {
        match *self {
            GrowthPolicy::AlgorithmicK { k } => k.max(2),
            GrowthPolicy::ValidPartition { m, .. } => m.max(2),
        }
    }

    pub fn may_split(&self, node_size: usize) -> bool {
        node_size >= self.min_split_size()
    }

    /// Minimum number of rows each child of a `parent_size` node must receive.
    pub fn child_constraint(&self, parent_size: usize) -> usize {
        match *self {
            GrowthPolicy::AlgorithmicK { .. } => 1,
            GrowthPolicy::ValidPartition { xi, k, .. } => {
                k.max((xi * parent_size as f64).ceil() as usize)
            }
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            GrowthPolicy::AlgorithmicK { .. } => "algk",
            GrowthPolicy::ValidPartition { .. } => "valid",
        }
    }
}

/// Minimum node size schedule `floor(0.02 (ln T)^4 ln(ln T))`.
pub fn paper_node_size(t: usize) -> Result<usize> {
    if t < 16 {
        return Err(Error::DomainError(t));
    }
    let l = (t as f64).ln();
    Ok((0.02 * l.powi(4) * l.ln()).floor() as usize)
}

/// Training rows replayed through a fitted tree.
#[derive(Debug, Clone)]
pub struct Replay<'a> {
    data: &'a Dataset,
    /// Positive-weight rows routed to each node.
    pub counts: Vec<usize>,
    leaf_rows: Vec<Vec<usize>>,
}

impl<'a> Replay<'a> {
    /// Routes every positive-weight row of `data` through `tree`.
    pub fn new(tree: &Tree, data: &'a Dataset, weights: &[f64]) -> Result<Self> {
        if data.n_features() != tree.n_features() {
            return Err(Error::DimensionMismatch {
                expected: tree.n_features(),
                got: data.n_features(),
            });
        }
        if weights.len() != data.n_rows() {
            return Err(Error::LengthMismatch(weights.len(), data.n_rows()));
        }
        let nodes = tree.nodes();
        let mut counts = vec![0; nodes.len()];
        let mut leaf_rows = vec![Vec::new(); nodes.len()];
        for t in (0..data.n_rows()).filter(|&t| weights[t] > 0.0) {
            let mut i = 0;
            loop {
                counts[i] += 1;
                match &nodes[i] {
                    Node::Leaf(_) => {
                        leaf_rows[i].push(t);
                        break;
                    }
                    Node::Internal { split, left, right } => {
                        i = if data.value(t, split.feature) <= split.threshold {
                            *left
                        } else {
                            *right
                        };
                    }
                }
            }
        }
        Ok(Replay {
            data,
            counts,
            leaf_rows,
        })
    }

    pub fn leaf_rows(&self, node: usize) -> &[usize] {
        &self.leaf_rows[node]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    /// Broken links, non-finite threshold, or a split outside its cell.
    Structure,
    /// Split applied to a node too small to split, or a child below the minimum.
    SplitFraction,
    /// Leaf with fewer than `k` rows under `ValidPartition`.
    LeafBelowK,
    /// Leaf with at least `m` rows that admits a valid split.
    MissedSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Offender {
    pub node: usize,
    pub violation: Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub is_recursive_partition: bool,
    pub leaves_min_k_ok: bool,
    pub split_fraction_ok: bool,
    pub must_split_ok: bool,
    /// Requirement that every feature can be split with positive probability
    /// holds by uniform feature sampling; it is not checked numerically.
    pub feature_coverage_note: &'static str,
    pub offenders: Vec<Offender>,
    pub n_nodes: usize,
    pub n_leaves: usize,
    pub routed_rows: usize,
    pub depth: usize,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.offenders.is_empty()
    }
}

/// Checks a fitted tree against `policy` using replayed training rows.
pub fn audit_tree(tree: &Tree, replay: &Replay<'_>, policy: &GrowthPolicy) -> AuditReport {
    let nodes = tree.nodes();
    let mut offenders = Vec::new();
    let mut flag = |node, violation| offenders.push(Offender { node, violation });

    // Structure: pre-order links, every node visited once, each threshold
    // strictly inside the cell it refines.
    let mut visited = vec![0u32; nodes.len()];
    let p = tree.n_features();
    let mut stack = vec![(0usize, vec![(f64::NEG_INFINITY, f64::INFINITY); p])];
    while let Some((i, bounds)) = stack.pop() {
        visited[i] += 1;
        if let Node::Internal { split, left, right } = &nodes[i] {
            let (lo, hi) = bounds[split.feature];
            let links_ok = *left == i + 1 && *right > *left && *right < nodes.len();
            let inside = split.threshold.is_finite() && lo < split.threshold && split.threshold < hi;
            if !links_ok || !inside {
                flag(i, Violation::Structure);
            }
            if !links_ok {
                continue;
            }
            let mut lb = bounds.clone();
            lb[split.feature].1 = split.threshold;
            let mut rb = bounds;
            rb[split.feature].0 = split.threshold;
            stack.push((*right, rb));
            stack.push((*left, lb));
        }
    }
    for (i, &v) in visited.iter().enumerate() {
        if v != 1 {
            flag(i, Violation::Structure);
        }
    }

    let is_valid = matches!(policy, GrowthPolicy::ValidPartition { .. });
    for (i, node) in nodes.iter().enumerate() {
        let n = replay.counts[i];
        match node {
            Node::Internal { left, right, .. } => {
                let (Some(&nl), Some(&nr)) = (replay.counts.get(*left), replay.counts.get(*right)) else {
                    continue;
                };
                let min_child = policy.child_constraint(n).max(1);
                if !policy.may_split(n) || nl < min_child || nr < min_child {
                    flag(i, Violation::SplitFraction);
                }
            }
            Node::Leaf(_) if is_valid => {
                if i != 0 && n < policy.k() {
                    flag(i, Violation::LeafBelowK);
                }
                if policy.may_split(n) && admits_split(replay, i, policy) {
                    flag(i, Violation::MissedSplit);
                }
            }
            Node::Leaf(_) => {}
        }
    }

    let has = |v: Violation| offenders.iter().any(|o| o.violation == v);
    AuditReport {
        is_recursive_partition: !has(Violation::Structure),
        leaves_min_k_ok: !has(Violation::LeafBelowK),
        split_fraction_ok: !has(Violation::SplitFraction),
        must_split_ok: !has(Violation::MissedSplit),
        feature_coverage_note: "informational: uniform m_try sampling gives every feature positive split probability",
        n_nodes: nodes.len(),
        n_leaves: tree.n_leaves(),
        routed_rows: replay.counts.first().copied().unwrap_or(0),
        depth: tree.depth(),
        offenders,
    }
}

/// Whether any feature admits a split of leaf `node` meeting the child constraint.
fn admits_split(replay: &Replay<'_>, node: usize, policy: &GrowthPolicy) -> bool {
    let rows = replay.leaf_rows(node);
    let min_child = policy.child_constraint(rows.len()).max(1);
    (0..replay.data.n_features()).any(|j| {
        let col = replay.data.column(j);
        let mut values: Vec<f64> = rows.iter().map(|&t| col[t]).collect();
        values.sort_by(f64::total_cmp);
        (min_child..=values.len().saturating_sub(min_child))
            .any(|n_left| n_left > 0 && values[n_left - 1] < values[n_left])
    })
}

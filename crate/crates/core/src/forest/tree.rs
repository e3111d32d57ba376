use std::hash::{DefaultHasher, Hash, Hasher};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::split::{sweep_feature, NodeStats, ScoredSplit, SplitSpec};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::policy::GrowthPolicy;
use crate::rng::{StreamRng, Substream};
use crate::weighting::WeightVector;

/// Terminal cell of a tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    /// Weighted mean response of the rows in the cell.
    pub estimate: f64,
    pub weight_total: f64,
    /// Positive-weight training rows in the cell.
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Internal {
        split: SplitSpec,
        left: usize,
        right: usize,
    },
    Leaf(Leaf),
}

/// Substreams a tree was grown from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub weights: Substream,
    pub features: Substream,
}

/// A regression tree stored as a pre-order node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
    pub(crate) n_features: usize,
    pub policy: GrowthPolicy,
    pub seed_record: SeedRecord,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf(_) => 0,
                Node::Internal { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Index of the leaf containing `x`.
    #[inline]
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(_) => return i,
                Node::Internal { split, left, right } => {
                    i = if split.goes_left(x) { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    #[inline]
    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf(leaf) => leaf.estimate,
            Node::Internal { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    /// Hash of the split structure and leaf estimates.
    pub fn structure_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for node in &self.nodes {
            match node {
                Node::Internal { split, left, right } => {
                    0u8.hash(&mut h);
                    split.feature.hash(&mut h);
                    split.threshold.to_bits().hash(&mut h);
                    left.hash(&mut h);
                    right.hash(&mut h);
                }
                Node::Leaf(leaf) => {
                    1u8.hash(&mut h);
                    leaf.estimate.to_bits().hash(&mut h);
                    leaf.count.hash(&mut h);
                }
            }
        }
        h.finish()
    }

    /// Rebuilds a tree from a pre-order node list without child links.
    pub fn from_preorder(
        items: Vec<PreorderNode>,
        n_features: usize,
        policy: GrowthPolicy,
        seed_record: SeedRecord,
    ) -> Result<Self> {
        fn build(items: &[PreorderNode], pos: &mut usize, nodes: &mut Vec<Node>) -> Result<usize> {
            let item = items
                .get(*pos)
                .ok_or_else(|| Error::Parse("truncated node list".into()))?;
            *pos += 1;
            let idx = nodes.len();
            match *item {
                PreorderNode::Leaf(leaf) => nodes.push(Node::Leaf(leaf)),
                PreorderNode::Split(split) => {
                    nodes.push(Node::Leaf(Leaf {
                        estimate: 0.0,
                        weight_total: 0.0,
                        count: 0,
                    }));
                    let left = build(items, pos, nodes)?;
                    let right = build(items, pos, nodes)?;
                    nodes[idx] = Node::Internal { split, left, right };
                }
            }
            Ok(idx)
        }
        let mut nodes = Vec::with_capacity(items.len());
        let mut pos = 0;
        build(&items, &mut pos, &mut nodes)?;
        if pos != items.len() {
            return Err(Error::Parse("trailing nodes after a complete tree".into()));
        }
        for node in &nodes {
            match node {
                Node::Internal { split, .. } => {
                    if split.feature >= n_features || !split.threshold.is_finite() {
                        return Err(Error::Parse(format!("invalid split {split:?}")));
                    }
                }
                Node::Leaf(leaf) => {
                    if !leaf.estimate.is_finite() {
                        return Err(Error::Parse("non-finite leaf estimate".into()));
                    }
                }
            }
        }
        Ok(Tree {
            nodes,
            n_features,
            policy,
            seed_record,
        })
    }

    pub fn to_preorder(&self) -> Vec<PreorderNode> {
        // The arena is already in pre-order.
        self.nodes
            .iter()
            .map(|n| match *n {
                Node::Internal { split, .. } => PreorderNode::Split(split),
                Node::Leaf(leaf) => PreorderNode::Leaf(leaf),
            })
            .collect()
    }
}

/// Node of a serialized pre-order listing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreorderNode {
    Split(SplitSpec),
    Leaf(Leaf),
}

/// Row orderings of every feature column, shared by all trees of a fit.
#[derive(Debug, Clone)]
pub struct SortedColumns {
    orders: Vec<Vec<u32>>,
}

impl SortedColumns {
    pub fn new(data: &Dataset) -> Self {
        assert!(data.n_rows() <= u32::MAX as usize);
        let orders = data
            .columns()
            .iter()
            .map(|col| {
                let mut order: Vec<u32> = (0..col.len() as u32).collect();
                order.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                order
            })
            .collect();
        SortedColumns { orders }
    }
}

/// Grows one tree. `m_try` features are sampled without replacement from the
/// `features` substream at every node that is eligible to split.
pub fn grow_tree(
    data: &Dataset,
    weights: &WeightVector,
    m_try: usize,
    policy: &GrowthPolicy,
    features: Substream,
) -> Result<Tree> {
    grow_tree_presorted(data, &SortedColumns::new(data), weights, m_try, policy, features)
}

pub(crate) fn grow_tree_presorted(
    data: &Dataset,
    sorted: &SortedColumns,
    weights: &WeightVector,
    m_try: usize,
    policy: &GrowthPolicy,
    features: Substream,
) -> Result<Tree> {
    let p = data.n_features();
    if weights.len() != data.n_rows() {
        return Err(Error::LengthMismatch(weights.len(), data.n_rows()));
    }
    if m_try == 0 || m_try > p {
        return Err(Error::InvalidConfig(format!("m_try {m_try} not in [1, {p}]")));
    }
    policy.validate()?;
    let w = &weights.values;
    let orders: Vec<Vec<u32>> = sorted
        .orders
        .iter()
        .map(|o| o.iter().copied().filter(|&t| w[t as usize] > 0.0).collect())
        .collect();
    if orders[0].is_empty() {
        return Err(Error::DegenerateData);
    }
    let mut grower = Grower {
        data,
        weights: w,
        policy,
        m_try,
        rng: features.rng(),
        scratch: Vec::with_capacity(orders[0].len()),
        goes_left: vec![false; data.n_rows()],
        orders,
        nodes: Vec::new(),
    };
    grower.run();
    Ok(Tree {
        nodes: grower.nodes,
        n_features: p,
        policy: *policy,
        seed_record: SeedRecord {
            weights: weights.substream,
            features,
        },
    })
}

struct Task {
    start: usize,
    end: usize,
    parent: Option<(usize, bool)>,
}

struct Grower<'a> {
    data: &'a Dataset,
    weights: &'a [f64],
    policy: &'a GrowthPolicy,
    m_try: usize,
    rng: StreamRng,
    /// Per-feature row orders; every node owns the same `[start, end)` range in each.
    orders: Vec<Vec<u32>>,
    scratch: Vec<u32>,
    goes_left: Vec<bool>,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn run(&mut self) {
        let mut stack = vec![Task {
            start: 0,
            end: self.orders[0].len(),
            parent: None,
        }];
        while let Some(task) = stack.pop() {
            let idx = self.nodes.len();
            if let Some((parent, is_left)) = task.parent {
                if let Node::Internal { left, right, .. } = &mut self.nodes[parent] {
                    *(if is_left { left } else { right }) = idx;
                }
            }
            let rows = &self.orders[0][task.start..task.end];
            let stats = NodeStats::accumulate(rows, self.weights, self.data.response());
            match self.find_split(task.start, task.end, &stats) {
                None => {
                    let estimate = stats.reference + stats.sum / stats.weight;
                    self.nodes.push(Node::Leaf(Leaf {
                        estimate,
                        weight_total: stats.weight,
                        count: task.end - task.start,
                    }));
                }
                Some(best) => {
                    self.nodes.push(Node::Internal {
                        split: best.split,
                        left: usize::MAX,
                        right: usize::MAX,
                    });
                    let mid = self.partition(task.start, task.end, &best.split);
                    stack.push(Task {
                        start: mid,
                        end: task.end,
                        parent: Some((idx, false)),
                    });
                    stack.push(Task {
                        start: task.start,
                        end: mid,
                        parent: Some((idx, true)),
                    });
                }
            }
        }
    }

    fn find_split(&mut self, start: usize, end: usize, stats: &NodeStats) -> Option<ScoredSplit> {
        let n = end - start;
        if !self.policy.may_split(n) {
            return None;
        }
        let p = self.data.n_features();
        let constant = |j: usize| {
            let col = self.data.column(j);
            col[self.orders[j][start] as usize] == col[self.orders[j][end - 1] as usize]
        };
        // Cells that are a single point in feature space never split and draw nothing.
        if (0..p).all(constant) {
            return None;
        }
        let mut candidates: Vec<usize> = if self.m_try >= p {
            (0..p).collect()
        } else {
            index::sample(&mut self.rng, p, self.m_try).into_vec()
        };
        candidates.sort_unstable();
        let min_child = self.policy.child_constraint(n);

        let mut best = self.search(&candidates, start, end, stats, min_child);
        if best.is_none() && matches!(self.policy, GrowthPolicy::ValidPartition { .. }) {
            // A node with at least m rows must split whenever any feature admits it.
            let rest: Vec<usize> = (0..p).filter(|j| candidates.binary_search(j).is_err()).collect();
            best = self.search(&rest, start, end, stats, min_child);
        }
        best
    }

    fn search(
        &self,
        features: &[usize],
        start: usize,
        end: usize,
        stats: &NodeStats,
        min_child: usize,
    ) -> Option<ScoredSplit> {
        let mut best: Option<ScoredSplit> = None;
        for &j in features {
            let found = sweep_feature(
                &self.orders[j][start..end],
                self.data.column(j),
                self.weights,
                self.data.response(),
                stats,
                min_child,
            );
            if let Some(found) = found {
                if stats.improves(found.score, best.map(|b| b.score)) {
                    best = Some(ScoredSplit {
                        split: SplitSpec {
                            feature: j,
                            threshold: found.threshold,
                        },
                        score: found.score,
                    });
                }
            }
        }
        best
    }

    /// Stable partition of every feature order over `[start, end)`; returns the
    /// boundary between the left and right child ranges.
    fn partition(&mut self, start: usize, end: usize, split: &SplitSpec) -> usize {
        let column = self.data.column(split.feature);
        let mut n_left = 0;
        for &t in &self.orders[split.feature][start..end] {
            let left = column[t as usize] <= split.threshold;
            self.goes_left[t as usize] = left;
            n_left += left as usize;
        }
        for order in &mut self.orders {
            let range = &mut order[start..end];
            self.scratch.clear();
            let mut write = 0;
            for i in 0..range.len() {
                let t = range[i];
                if self.goes_left[t as usize] {
                    range[write] = t;
                    write += 1;
                } else {
                    self.scratch.push(t);
                }
            }
            range[write..].copy_from_slice(&self.scratch);
        }
        start + n_left
    }
}

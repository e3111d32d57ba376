//! Weighted least-squares split search.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::policy::GrowthPolicy;

/// An axis-aligned split: rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub feature: usize,
    pub threshold: f64,
}

impl SplitSpec {
    #[inline]
    pub fn goes_left(&self, x: &[f64]) -> bool {
        x[self.feature] <= self.threshold
    }
}

/// A split together with its weighted sum of squared errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredSplit {
    pub split: SplitSpec,
    pub score: f64,
}

/// Weighted mean of the response over `rows`.
pub fn node_estimate(rows: &[usize], weights: &[f64], response: &[f64]) -> Result<f64> {
    // Centred on the first response so a single row or constant node is exact.
    let reference = rows.first().map_or(0.0, |&t| response[t]);
    let (mut w_sum, mut wy_sum) = (0.0, 0.0);
    for &t in rows {
        w_sum += weights[t];
        wy_sum += weights[t] * (response[t] - reference);
    }
    if w_sum <= 0.0 {
        return Err(Error::ZeroWeightLeaf);
    }
    Ok(reference + wy_sum / w_sum)
}

/// Weighted sum of squared deviations of both children around their own
/// weighted means. Computed in two passes; this is the reference form.
pub fn split_score(
    candidate: &SplitSpec,
    rows: &[usize],
    weights: &[f64],
    data: &Dataset,
    response: &[f64],
) -> Result<f64> {
    let column = data.column(candidate.feature);
    let (left, right): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .copied()
        .filter(|&t| weights[t] > 0.0)
        .partition(|&t| column[t] <= candidate.threshold);
    if left.is_empty() || right.is_empty() {
        return Err(Error::EmptyChild);
    }
    let sse = |side: &[usize]| -> Result<f64> {
        let c = node_estimate(side, weights, response)?;
        Ok(side.iter().map(|&t| weights[t] * (response[t] - c).powi(2)).sum())
    };
    Ok(sse(&left)? + sse(&right)?)
}

/// Best split of `rows` over `candidate_features`, honoring the policy's
/// minimum child size. Zero-weight rows are ignored. Ties go to the lower
/// feature index, then the lower threshold.
pub fn best_split(
    rows: &[usize],
    weights: &[f64],
    data: &Dataset,
    candidate_features: &[usize],
    policy: &GrowthPolicy,
) -> Option<ScoredSplit> {
    let active: Vec<u32> = rows
        .iter()
        .filter(|&&t| weights[t] > 0.0)
        .map(|&t| t as u32)
        .collect();
    if active.len() < 2 {
        return None;
    }
    let response = data.response();
    let stats = NodeStats::accumulate(&active, weights, response);
    let min_child = policy.child_constraint(active.len());

    let mut features = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut best: Option<ScoredSplit> = None;
    let mut order = active.clone();
    for j in features {
        let column = data.column(j);
        order.copy_from_slice(&active);
        order.sort_by(|&a, &b| {
            column[a as usize]
                .total_cmp(&column[b as usize])
                .then(a.cmp(&b))
        });
        if let Some(found) = sweep_feature(&order, column, weights, response, &stats, min_child) {
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

/// Weighted sums over a node, with the response shifted by `reference` to
/// keep the one-pass variance formula well conditioned.
#[derive(Debug, Clone, Copy)]
pub(crate) struct NodeStats {
    pub reference: f64,
    pub weight: f64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl NodeStats {
    pub fn accumulate(rows: &[u32], weights: &[f64], response: &[f64]) -> Self {
        let reference = response[rows[0] as usize];
        let (mut weight, mut sum, mut sum_sq) = (0.0, 0.0, 0.0);
        for &t in rows {
            let t = t as usize;
            let (w, y) = (weights[t], response[t] - reference);
            weight += w;
            sum += w * y;
            sum_sq += w * y * y;
        }
        NodeStats {
            reference,
            weight,
            sum,
            sum_sq,
        }
    }

    /// Whether `score` beats `best` by more than accumulated rounding error.
    /// Scores closer than that count as tied, and the earlier candidate stays.
    #[inline]
    pub fn improves(&self, score: f64, best: Option<f64>) -> bool {
        best.is_none_or(|b| score < b - TIE_TOLERANCE * self.sum_sq)
    }
}

const TIE_TOLERANCE: f64 = 1e-11;

#[derive(Debug, Clone, Copy)]
pub(crate) struct SweepResult {
    pub score: f64,
    pub threshold: f64,
}

#[inline]
fn weighted_sse(weight: f64, sum: f64, sum_sq: f64) -> f64 {
    (sum_sq - sum * sum / weight).max(0.0)
}

/// Midpoint of two consecutive distinct values, kept in `[lo, hi)` so that
/// `lo` routes left and `hi` routes right.
#[inline]
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo * 0.5 + hi * 0.5;
    if mid >= lo && mid < hi {
        mid
    } else {
        lo
    }
}

/// Scans every boundary between distinct values of `order` (rows sorted by
/// `column`, all with positive weight) and returns the lowest-score threshold
/// leaving at least `min_child` rows on each side.
pub(crate) fn sweep_feature(
    order: &[u32],
    column: &[f64],
    weights: &[f64],
    response: &[f64],
    stats: &NodeStats,
    min_child: usize,
) -> Option<SweepResult> {
    let n = order.len();
    let min_child = min_child.max(1);
    if n < 2 * min_child {
        return None;
    }
    let (mut w_left, mut s_left, mut q_left) = (0.0, 0.0, 0.0);
    let mut best: Option<SweepResult> = None;
    for i in 0..n - 1 {
        let t = order[i] as usize;
        let (w, y) = (weights[t], response[t] - stats.reference);
        w_left += w;
        s_left += w * y;
        q_left += w * y * y;

        let n_left = i + 1;
        if n_left < min_child {
            continue;
        }
        if n - n_left < min_child {
            break;
        }
        let (x, x_next) = (column[t], column[order[i + 1] as usize]);
        if x == x_next {
            continue;
        }
        let score = weighted_sse(w_left, s_left, q_left)
            + weighted_sse(
                stats.weight - w_left,
                stats.sum - s_left,
                stats.sum_sq - q_left,
            );
        if stats.improves(score, best.map(|b| b.score)) {
            best = Some(SweepResult {
                score,
                threshold: midpoint(x, x_next),
            });
        }
    }
    best
}

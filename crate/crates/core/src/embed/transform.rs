//! Per-feature strictly increasing maps into `[0, 1]`.
//!
//! Trees only compare feature values, so refitting on transformed features
//! must reproduce the same partitions of the training rows. These maps exist
//! to check that; forests never apply them during fitting.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::data::Dataset;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMapKind {
    /// Standard normal CDF of the standardized column.
    GaussianCdf,
    /// Empirical CDF of the training column.
    EmpiricalCdf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnMap {
    Gaussian { mean: f64, sd: f64 },
    Empirical { knots: Vec<f64> },
    /// Degenerate column, mapped to 0.5.
    Constant,
}

impl ColumnMap {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            ColumnMap::Gaussian { mean, sd } => 0.5 * erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2)),
            ColumnMap::Empirical { knots } => {
                knots.partition_point(|&k| k <= x) as f64 / knots.len() as f64
            }
            ColumnMap::Constant => 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTransform {
    pub kind: FeatureMapKind,
    pub columns: Vec<ColumnMap>,
    /// Columns that were constant and therefore mapped to 0.5.
    pub constant_columns: Vec<usize>,
}

pub fn fit_feature_transform(data: &Dataset, kind: FeatureMapKind) -> FeatureTransform {
    let mut constant_columns = Vec::new();
    let columns = data
        .columns()
        .iter()
        .enumerate()
        .map(|(j, col)| {
            let first = col[0];
            if col.iter().all(|&v| v == first) {
                constant_columns.push(j);
                return ColumnMap::Constant;
            }
            match kind {
                FeatureMapKind::GaussianCdf => {
                    let n = col.len() as f64;
                    let mean = col.iter().sum::<f64>() / n;
                    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                    ColumnMap::Gaussian { mean, sd: var.sqrt() }
                }
                FeatureMapKind::EmpiricalCdf => {
                    let mut knots = col.clone();
                    knots.sort_by(f64::total_cmp);
                    ColumnMap::Empirical { knots }
                }
            }
        })
        .collect();
    FeatureTransform {
        kind,
        columns,
        constant_columns,
    }
}

pub fn transform_rows(ft: &FeatureTransform, data: &Dataset) -> Result<Dataset> {
    data.map_features(|j, v| ft.columns[j].apply(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> Dataset {
        let rows: Vec<Vec<f64>> = [1.0, 4.0, -2.0, 7.5, 3.0].iter().map(|&v| vec![v, 2.0]).collect();
        Dataset::from_rows(&rows, vec![0.0; 5]).unwrap()
    }

    #[test]
    fn gaussian_mean_maps_to_half() {
        let ft = fit_feature_transform(&data(), FeatureMapKind::GaussianCdf);
        assert!((ft.columns[0].apply(2.7) - 0.5).abs() < 1e-15);
        assert_eq!(ft.constant_columns, vec![1]);
        assert_eq!(ft.columns[1].apply(123.0), 0.5);
    }

    #[test]
    fn empirical_max_maps_to_one() {
        let ft = fit_feature_transform(&data(), FeatureMapKind::EmpiricalCdf);
        assert_eq!(ft.columns[0].apply(7.5), 1.0);
        assert_eq!(ft.columns[0].apply(-2.0), 0.2);
        assert_eq!(ft.columns[0].apply(-9.0), 0.0);
    }

    #[test]
    fn strictly_increasing_on_training_values() {
        for kind in [FeatureMapKind::GaussianCdf, FeatureMapKind::EmpiricalCdf] {
            let d = data();
            let ft = fit_feature_transform(&d, kind);
            let out = transform_rows(&ft, &d).unwrap();
            let mut pairs: Vec<(f64, f64)> = d.column(0).iter().copied().zip(out.column(0).iter().copied()).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            assert!(pairs.windows(2).all(|w| w[0].1 < w[1].1));
            assert!(out.column(0).iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

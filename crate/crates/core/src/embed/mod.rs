//! Lag embedding of time series into supervised datasets, stationarizing
//! transforms, and teacher-forced forecasting.

mod pipeline;
mod transform;

use serde::{Deserialize, Serialize};

pub use pipeline::{Step, TransformPipeline};
pub use transform::{fit_feature_transform, transform_rows, ColumnMap, FeatureMapKind, FeatureTransform};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::Forest;

/// A named exogenous channel aligned with the response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub values: Vec<f64>,
}

/// Time-ascending response values with optional exogenous channels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    pub exogenous: Vec<Channel>,
    pub timestamps: Option<Vec<String>>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Self {
        TimeSeries {
            values,
            ..Default::default()
        }
    }

    pub fn with_channel(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::LengthMismatch(values.len(), self.values.len()));
        }
        self.exogenous.push(Channel {
            name: name.into(),
            values,
        });
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.exogenous
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
    }

    /// Sub-series over `range` of time indices.
    pub fn slice(&self, range: std::ops::Range<usize>) -> TimeSeries {
        TimeSeries {
            values: self.values[range.clone()].to_vec(),
            exogenous: self
                .exogenous
                .iter()
                .map(|c| Channel {
                    name: c.name.clone(),
                    values: c.values[range.clone()].to_vec(),
                })
                .collect(),
            timestamps: self.timestamps.as_ref().map(|ts| ts[range].to_vec()),
        }
    }
}

/// Which past values become features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagSpec {
    pub response_lags: Vec<usize>,
    #[serde(default)]
    pub exogenous_lags: Vec<(String, Vec<usize>)>,
}

impl LagSpec {
    /// Response lags `1..=n`.
    pub fn response(n: usize) -> Self {
        LagSpec {
            response_lags: (1..=n).collect(),
            exogenous_lags: Vec::new(),
        }
    }

    /// Adds lags `1..=n` of an exogenous channel.
    pub fn with_channel(mut self, name: impl Into<String>, n: usize) -> Self {
        self.exogenous_lags.push((name.into(), (1..=n).collect()));
        self
    }

    pub fn max_lag(&self) -> usize {
        self.response_lags
            .iter()
            .chain(self.exogenous_lags.iter().flat_map(|(_, l)| l))
            .copied()
            .max()
            .unwrap_or(0)
    }

    pub fn n_features(&self) -> usize {
        self.response_lags.len() + self.exogenous_lags.iter().map(|(_, l)| l.len()).sum::<usize>()
    }

    /// Sorts and deduplicates every lag list and rejects zero or empty lag sets.
    pub fn normalized(&self) -> Result<Self> {
        let clean = |lags: &[usize]| -> Result<Vec<usize>> {
            let mut l = lags.to_vec();
            l.sort_unstable();
            l.dedup();
            if l.first() == Some(&0) {
                return Err(Error::InvalidConfig("lags must be positive".into()));
            }
            Ok(l)
        };
        let spec = LagSpec {
            response_lags: clean(&self.response_lags)?,
            exogenous_lags: self
                .exogenous_lags
                .iter()
                .map(|(n, l)| Ok((n.clone(), clean(l)?)))
                .collect::<Result<_>>()?,
        };
        if spec.n_features() == 0 {
            return Err(Error::InvalidConfig("lag specification selects no features".into()));
        }
        Ok(spec)
    }

    /// Feature vector for predicting time `t` (which may equal `series.len()`).
    /// Only indices before `t` are read.
    pub fn feature_row(&self, series: &TimeSeries, t: usize) -> Result<Vec<f64>> {
        if t < self.max_lag() || t > series.len() {
            return Err(Error::IndexOutOfHistory(t));
        }
        let mut row: Vec<f64> = self.response_lags.iter().map(|&l| series.values[t - l]).collect();
        for (name, lags) in &self.exogenous_lags {
            let ch = series
                .channel(name)
                .ok_or_else(|| Error::UnknownChannel(name.clone()))?;
            row.extend(lags.iter().map(|&l| ch[t - l]));
        }
        Ok(row)
    }
}

/// One row per time `t` in `max_lag..len`: features are the lagged values
/// (response lags ascending, then each channel's lags), response `values[t]`.
pub fn embed(series: &TimeSeries, spec: &LagSpec) -> Result<Dataset> {
    let spec = spec.normalized()?;
    let max_lag = spec.max_lag();
    if series.len() <= max_lag {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            max_lag,
        });
    }
    let mut columns = Vec::with_capacity(spec.n_features());
    let n = series.len();
    for &l in &spec.response_lags {
        columns.push(series.values[max_lag - l..n - l].to_vec());
    }
    for (name, lags) in &spec.exogenous_lags {
        let ch = series
            .channel(name)
            .ok_or_else(|| Error::UnknownChannel(name.clone()))?;
        for &l in lags {
            columns.push(ch[max_lag - l..n - l].to_vec());
        }
    }
    Dataset::from_columns(columns, series.values[max_lag..].to_vec())
}

/// Prediction for one test time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Forecast {
    /// Time index in the level series.
    pub t: usize,
    /// Prediction on the transformed (model) scale.
    pub transformed: f64,
    /// Prediction mapped back to levels, when a pipeline is in use.
    pub level: Option<f64>,
}

impl Forecast {
    /// The prediction on the scale of the input series.
    pub fn value(&self) -> f64 {
        self.level.unwrap_or(self.transformed)
    }
}

/// Teacher-forced one-step-ahead forecasts of the last `horizon` points of
/// `series`: each feature row is built from actual history only.
pub fn one_step_forecasts(
    forest: &Forest,
    series: &TimeSeries,
    spec: &LagSpec,
    pipeline: Option<&TransformPipeline>,
    horizon: usize,
) -> Result<Vec<Forecast>> {
    let spec = spec.normalized()?;
    let n = series.len();
    if horizon > n {
        return Err(Error::InsufficientLength {
            len: n,
            train: 0,
            test: horizon,
        });
    }
    let (transformed, offset) = match pipeline {
        Some(p) => (p.apply(series)?, p.offset()),
        None => (series.clone(), 0),
    };
    (n - horizon..n)
        .map(|t| {
            let i = t.checked_sub(offset).ok_or(Error::IndexOutOfHistory(t))?;
            let x = spec.feature_row(&transformed, i)?;
            let pred = forest.predict(&x)?;
            let level = match pipeline {
                Some(p) => Some(p.invert_one_step(pred, &series.values[..t], t)?),
                None => None,
            };
            Ok(Forecast {
                t,
                transformed: pred,
                level,
            })
        })
        .collect()
}

/// Multi-step forecasts beyond the end of `history`, feeding predictions back
/// as lagged inputs. Only response lags are supported.
pub fn recursive_forecasts(
    forest: &Forest,
    history: &TimeSeries,
    spec: &LagSpec,
    pipeline: Option<&TransformPipeline>,
    horizon: usize,
) -> Result<Vec<Forecast>> {
    let spec = spec.normalized()?;
    if !spec.exogenous_lags.is_empty() {
        return Err(Error::InvalidConfig(
            "recursive forecasting needs future exogenous values".into(),
        ));
    }
    let mut levels = TimeSeries::new(history.values.clone());
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let t = levels.len();
        let (transformed, offset) = match pipeline {
            Some(p) => (p.apply(&levels)?, p.offset()),
            None => (levels.clone(), 0),
        };
        let i = t.checked_sub(offset).ok_or(Error::IndexOutOfHistory(t))?;
        let pred = forest.predict(&spec.feature_row(&transformed, i)?)?;
        let level = match pipeline {
            Some(p) => Some(p.invert_one_step(pred, &levels.values, t)?),
            None => None,
        };
        let f = Forecast {
            t,
            transformed: pred,
            level,
        };
        levels.values.push(f.value());
        out.push(f);
    }
    Ok(out)
}

/// Replaces missing or non-positive entries by linear interpolation of the
/// logs of the nearest valid neighbours (nearest valid value at the edges).
pub fn clean_positive(values: &[Option<f64>]) -> Result<Vec<f64>> {
    let valid: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| matches!(v, Some(x) if *x > 0.0 && x.is_finite()))
        .map(|(i, _)| i)
        .collect();
    if valid.is_empty() {
        return Err(Error::InvalidDataset("series has no positive values".into()));
    }
    let at = |i: usize| values[i].expect("valid index");
    let mut out = Vec::with_capacity(values.len());
    let mut next = 0;
    for i in 0..values.len() {
        while next < valid.len() && valid[next] < i {
            next += 1;
        }
        if next < valid.len() && valid[next] == i {
            out.push(at(i));
            continue;
        }
        let before = next.checked_sub(1).map(|k| valid[k]);
        let after = valid.get(next).copied();
        out.push(match (before, after) {
            (Some(a), Some(b)) => {
                let frac = (i - a) as f64 / (b - a) as f64;
                (at(a).ln() * (1.0 - frac) + at(b).ln() * frac).exp()
            }
            (Some(a), None) => at(a),
            (None, Some(b)) => at(b),
            (None, None) => unreachable!("at least one valid value"),
        });
    }
    Ok(out)
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TimeSeries;
use crate::error::{Error, Result};

/// One stationarizing step applied to the response channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Step {
    /// `ln x_t - ln x_{t-1}`.
    LogDiff,
    /// `x_t - x_{t-period}`.
    SeasonalDiff { period: usize },
}

impl Step {
    fn lag(&self) -> usize {
        match *self {
            Step::LogDiff => 1,
            Step::SeasonalDiff { period } => period,
        }
    }
}

/// Ordered stationarizing transform of the response, with the leading raw
/// values it consumes kept for level reconstruction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TransformPipeline {
    pub steps: Vec<Step>,
    #[serde(default)]
    pub initial_values: Vec<f64>,
}

impl TransformPipeline {
    pub fn new(steps: Vec<Step>) -> Result<Self> {
        if steps
            .iter()
            .any(|s| matches!(s, Step::SeasonalDiff { period: 0 }))
        {
            return Err(Error::InvalidConfig("seasonal period must be at least 1".into()));
        }
        Ok(TransformPipeline {
            steps,
            initial_values: Vec::new(),
        })
    }

    /// Log difference followed by a seasonal difference of `period`.
    pub fn log_seasonal(period: usize) -> Result<Self> {
        Self::new(vec![Step::LogDiff, Step::SeasonalDiff { period }])
    }

    pub fn is_identity(&self) -> bool {
        self.steps.is_empty()
    }

    /// Number of leading observations consumed by the steps.
    pub fn offset(&self) -> usize {
        self.steps.iter().map(Step::lag).sum()
    }

    /// Copy of the pipeline that remembers the leading values of `levels`.
    pub fn fitted(&self, levels: &[f64]) -> Result<Self> {
        let offset = self.offset();
        if levels.len() < offset {
            return Err(Error::SeriesTooShort {
                len: levels.len(),
                max_lag: offset,
            });
        }
        Ok(TransformPipeline {
            steps: self.steps.clone(),
            initial_values: levels[..offset].to_vec(),
        })
    }

    /// Transforms the response; exogenous channels and timestamps lose their
    /// first `offset()` entries so every channel stays aligned.
    pub fn apply(&self, series: &TimeSeries) -> Result<TimeSeries> {
        let mut stage = series.values.clone();
        for step in &self.steps {
            stage = match *step {
                Step::LogDiff => {
                    if let Some(i) = stage.iter().position(|&v| v <= 0.0 || v.is_nan()) {
                        return Err(Error::NonPositiveValue {
                            index: i + (series.values.len() - stage.len()),
                            value: stage[i],
                        });
                    }
                    stage.windows(2).map(|w| w[1].ln() - w[0].ln()).collect()
                }
                Step::SeasonalDiff { period } => {
                    if stage.len() < period {
                        Vec::new()
                    } else {
                        (period..stage.len()).map(|i| stage[i] - stage[i - period]).collect()
                    }
                }
            };
        }
        let offset = self.offset().min(series.len());
        Ok(TimeSeries {
            values: stage,
            exogenous: series
                .exogenous
                .iter()
                .map(|c| super::Channel {
                    name: c.name.clone(),
                    values: c.values[offset..].to_vec(),
                })
                .collect(),
            timestamps: series.timestamps.as_ref().map(|ts| ts[offset..].to_vec()),
        })
    }

    /// Value of intermediate stage `k` (0 = raw levels) at time `t`, from levels.
    fn stage_value(&self, k: usize, levels: &[f64], t: usize) -> Result<f64> {
        if k == 0 {
            let v = *levels.get(t).ok_or(Error::IndexOutOfHistory(t))?;
            return Ok(v);
        }
        let step = self.steps[k - 1];
        let back = t.checked_sub(step.lag()).ok_or(Error::IndexOutOfHistory(t))?;
        let (now, before) = (self.stage_value(k - 1, levels, t)?, self.stage_value(k - 1, levels, back)?);
        match step {
            Step::LogDiff => {
                for (i, v) in [(t, now), (back, before)] {
                    if v <= 0.0 {
                        return Err(Error::NonPositiveValue { index: i, value: v });
                    }
                }
                Ok(now.ln() - before.ln())
            }
            Step::SeasonalDiff { .. } => Ok(now - before),
        }
    }

    /// Level at time `t` implied by a transformed-scale prediction, given the
    /// actual levels `history[..t]`.
    pub fn invert_one_step(&self, predicted: f64, history: &[f64], t: usize) -> Result<f64> {
        if t < self.offset() || history.len() < t {
            return Err(Error::IndexOutOfHistory(t));
        }
        let mut value = predicted;
        for k in (1..=self.steps.len()).rev() {
            let step = self.steps[k - 1];
            let previous = self.stage_value(k - 1, history, t - step.lag())?;
            value = match step {
                Step::LogDiff => {
                    if previous <= 0.0 {
                        return Err(Error::NonPositiveValue {
                            index: t - 1,
                            value: previous,
                        });
                    }
                    previous * value.exp()
                }
                Step::SeasonalDiff { .. } => value + previous,
            };
        }
        if !value.is_finite() {
            return Err(Error::IndexOutOfHistory(t));
        }
        Ok(value)
    }

    /// Rebuilds the full level series from transformed values and the stored
    /// initial values.
    pub fn invert_series(&self, transformed: &[f64]) -> Result<Vec<f64>> {
        let offset = self.offset();
        if self.initial_values.len() != offset {
            return Err(Error::InvalidConfig("pipeline has no stored initial values".into()));
        }
        let mut levels = self.initial_values.clone();
        for (i, &r) in transformed.iter().enumerate() {
            let t = offset + i;
            let level = self.invert_one_step(r, &levels, t)?;
            levels.push(level);
        }
        Ok(levels)
    }
}

impl fmt::Display for TransformPipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.steps.is_empty() {
            return f.write_str("none");
        }
        let parts: Vec<String> = self
            .steps
            .iter()
            .map(|s| match s {
                Step::LogDiff => "logdiff".to_string(),
                Step::SeasonalDiff { period } => format!("sdiff:{period}"),
            })
            .collect();
        f.write_str(&parts.join("+"))
    }
}

impl FromStr for TransformPipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "none" {
            return Ok(TransformPipeline::default());
        }
        let steps = s
            .split('+')
            .map(|part| match part {
                "logdiff" => Ok(Step::LogDiff),
                other => other
                    .strip_prefix("sdiff:")
                    .and_then(|p| p.parse().ok())
                    .map(|period| Step::SeasonalDiff { period })
                    .ok_or_else(|| Error::Parse(format!("unknown pipeline step `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(values: Vec<f64>) -> TimeSeries {
        TimeSeries::new(values)
    }

    #[test]
    fn constant_series_transforms_to_zero() {
        let p = TransformPipeline::log_seasonal(7).unwrap();
        let out = p.apply(&series(vec![42.0; 30])).unwrap();
        assert_eq!(out.len(), 30 - 8);
        assert!(out.values.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn geometric_series_telescopes() {
        let levels: Vec<f64> = (0..20).map(|t| 2f64.powi(t)).collect();
        let logdiff = TransformPipeline::new(vec![Step::LogDiff]).unwrap();
        let out = logdiff.apply(&series(levels.clone())).unwrap();
        assert!(out.values.iter().all(|&r| (r - std::f64::consts::LN_2).abs() < 1e-12));
        let both = TransformPipeline::log_seasonal(7).unwrap();
        let out = both.apply(&series(levels)).unwrap();
        assert!(out.values.iter().all(|&r| r.abs() < 1e-12));
    }

    #[test]
    fn matches_closed_form() {
        let c: Vec<f64> = (0..40).map(|t| 100.0 + 30.0 * ((t as f64) * 0.9).sin() + t as f64).collect();
        let p = TransformPipeline::log_seasonal(7).unwrap();
        let r = p.apply(&series(c.clone())).unwrap().values;
        for t in 8..40 {
            let expected = (c[t].ln() - c[t - 1].ln()) - (c[t - 7].ln() - c[t - 8].ln());
            assert!((r[t - 8] - expected).abs() < 1e-12);
            let level = (r[t - 8] + (c[t - 7].ln() - c[t - 8].ln()) + c[t - 1].ln()).exp();
            assert!((p.invert_one_step(r[t - 8], &c[..t], t).unwrap() - level).abs() < 1e-9);
        }
    }

    #[test]
    fn errors() {
        let p = TransformPipeline::log_seasonal(7).unwrap();
        assert!(matches!(
            p.apply(&series(vec![1.0, 2.0, 0.0, 3.0])),
            Err(Error::NonPositiveValue { index: 2, .. })
        ));
        assert!(matches!(
            p.invert_one_step(0.0, &[1.0; 5], 5),
            Err(Error::IndexOutOfHistory(5))
        ));
        assert!(matches!(
            p.invert_one_step(0.0, &[1.0; 9], 12),
            Err(Error::IndexOutOfHistory(12))
        ));
        assert!("sdiff:0".parse::<TransformPipeline>().is_err());
        assert!("logdiff+foo".parse::<TransformPipeline>().is_err());
    }

    #[test]
    fn text_form() {
        let p: TransformPipeline = "logdiff+sdiff:7".parse().unwrap();
        assert_eq!(p, TransformPipeline::log_seasonal(7).unwrap());
        assert_eq!(p.to_string(), "logdiff+sdiff:7");
        assert!("none".parse::<TransformPipeline>().unwrap().is_identity());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn round_trip(values in prop::collection::vec(1e-3f64..1e6, 9..60), period in 1usize..8) {
            let p = TransformPipeline::new(vec![Step::LogDiff, Step::SeasonalDiff { period }]).unwrap();
            let transformed = p.apply(&series(values.clone())).unwrap();
            let back = p.fitted(&values).unwrap().invert_series(&transformed.values).unwrap();
            prop_assert_eq!(back.len(), values.len());
            for (a, b) in back.iter().zip(&values) {
                prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{} vs {}", a, b);
            }
        }
    }
}

//! Model files and series CSV files.
//!
//! Models are stored as pretty-printed JSON. Floats are written in shortest
//! round-trip form and parsed exactly, so a reloaded model predicts
//! bit-identically.

mod series;

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub use series::{read_series, write_forecasts, write_series, SeriesFile};

use crate::data::Dataset;
use crate::embed::{embed, LagSpec, TimeSeries, TransformPipeline};
use crate::error::{Error, Result};
use crate::forest::{Forest, ForestConfig, PreorderNode, SeedRecord, Tree};
use crate::policy::{audit_tree, AuditReport, GrowthPolicy, Replay};
use crate::weighting::draw_weights;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub library_version: String,
    /// Seconds since the Unix epoch.
    pub fitted_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub policy: GrowthPolicy,
    pub seed_record: SeedRecord,
    pub nodes: Vec<PreorderNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub config: ForestConfig,
    pub n_features: usize,
    pub lag_spec: LagSpec,
    pub pipeline: TransformPipeline,
    /// Leading series observations (level scale) used for training.
    pub train_len: usize,
    /// Rows of the embedded training dataset.
    pub n_rows: usize,
    pub provenance: Provenance,
    pub trees: Vec<TreeRecord>,
}

impl ModelFile {
    pub fn new(
        forest: &Forest,
        lag_spec: LagSpec,
        pipeline: TransformPipeline,
        train_len: usize,
        n_rows: usize,
    ) -> Self {
        let fitted_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        ModelFile {
            format_version: FORMAT_VERSION,
            config: *forest.config(),
            n_features: forest.n_features(),
            lag_spec,
            pipeline,
            train_len,
            n_rows,
            provenance: Provenance {
                seed: forest.config().master_seed,
                library_version: env!("CARGO_PKG_VERSION").to_string(),
                fitted_at,
            },
            trees: forest
                .trees()
                .iter()
                .map(|t| TreeRecord {
                    policy: t.policy,
                    seed_record: t.seed_record,
                    nodes: t.to_preorder(),
                })
                .collect(),
        }
    }

    pub fn forest(&self) -> Result<Forest> {
        let trees = self
            .trees
            .iter()
            .map(|r| Tree::from_preorder(r.nodes.clone(), self.n_features, r.policy, r.seed_record))
            .collect::<Result<Vec<_>>>()?;
        Forest::from_parts(trees, self.config, self.n_features)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a model, rejecting any `format_version` other than the current one.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Parse("model file has no format_version".into()))?;
        if version != FORMAT_VERSION as u64 {
            return Err(Error::UnsupportedVersion(version.min(u32::MAX as u64) as u32));
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Rebuilds the training dataset from the series the model was fitted on.
    pub fn training_data(&self, series: &TimeSeries) -> Result<Dataset> {
        if series.len() < self.train_len {
            return Err(Error::InsufficientLength {
                len: series.len(),
                train: self.train_len,
                test: 0,
            });
        }
        let (_, data) = training_data(&series.slice(0..self.train_len), &self.lag_spec, &self.pipeline)?;
        if data.n_features() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: data.n_features(),
            });
        }
        if data.n_rows() != self.n_rows {
            return Err(Error::LengthMismatch(data.n_rows(), self.n_rows));
        }
        Ok(data)
    }

    /// Audits every tree against its growth policy by regenerating its
    /// weights and replaying the training rows.
    pub fn audit(&self, series: &TimeSeries) -> Result<Vec<AuditReport>> {
        let data = self.training_data(series)?;
        let forest = self.forest()?;
        forest
            .trees()
            .iter()
            .map(|tree| {
                let w = draw_weights(self.config.weight_scheme, data.n_rows(), tree.seed_record.weights)?;
                let replay = Replay::new(tree, &data, &w.values)?;
                Ok(audit_tree(tree, &replay, &tree.policy))
            })
            .collect()
    }
}

/// Applies `pipeline` to the training series and embeds it. Returns the
/// pipeline with its initial values recorded, and the dataset.
pub fn training_data(
    series: &TimeSeries,
    lag_spec: &LagSpec,
    pipeline: &TransformPipeline,
) -> Result<(TransformPipeline, Dataset)> {
    let fitted = pipeline.fitted(&series.values)?;
    let transformed = fitted.apply(series)?;
    let data = embed(&transformed, lag_spec)?;
    Ok((fitted, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{fit_forest, MTry};
    use crate::weighting::WeightScheme;

    fn model() -> (ModelFile, TimeSeries) {
        let values: Vec<f64> = (0..80).map(|t| 10.0 + ((t * 7) % 11) as f64 + 0.1 * t as f64).collect();
        let series = TimeSeries::new(values);
        let spec = LagSpec::response(3);
        let (pipeline, data) = training_data(&series, &spec, &TransformPipeline::default()).unwrap();
        let config = ForestConfig {
            num_trees: 5,
            m_try: MTry::All,
            policy: GrowthPolicy::ValidPartition { xi: 0.2, k: 3, m: 6 },
            weight_scheme: WeightScheme::ExpOne,
            master_seed: 9,
        };
        let forest = fit_forest(&data, &config).unwrap();
        (ModelFile::new(&forest, spec, pipeline, 80, data.n_rows()), series)
    }

    #[test]
    fn json_round_trip() {
        let (m, _) = model();
        let back = ModelFile::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.forest().unwrap(), m.forest().unwrap());
    }

    #[test]
    fn rejects_other_versions() {
        let (m, _) = model();
        let text = m.to_json().unwrap().replacen("\"format_version\": 1", "\"format_version\": 7", 1);
        assert!(matches!(ModelFile::from_json(&text), Err(Error::UnsupportedVersion(7))));
        assert!(matches!(ModelFile::from_json("{}"), Err(Error::Parse(_))));
    }

    #[test]
    fn fresh_model_audits_clean() {
        let (m, series) = model();
        let reports = m.audit(&series).unwrap();
        assert_eq!(reports.len(), 5);
        assert!(reports.iter().all(AuditReport::is_clean));
    }

    #[test]
    fn audit_rejects_other_dimensions() {
        let (mut m, series) = model();
        m.lag_spec = LagSpec::response(4);
        assert!(matches!(m.audit(&series), Err(Error::DimensionMismatch { .. })));
    }
}

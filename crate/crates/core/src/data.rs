use crate::error::{Error, Result};

/// Time-ordered training data: a `T x p` feature matrix and a response vector.
///
/// Features are stored column-major so per-feature sweeps stay contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Vec<f64>>,
    response: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from row-major feature rows.
    pub fn from_rows(rows: &[Vec<f64>], response: Vec<f64>) -> Result<Self> {
        let p = rows.first().map(Vec::len).unwrap_or(0);
        let mut columns = vec![Vec::with_capacity(rows.len()); p];
        for (t, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::InvalidDataset(format!(
                    "row {t} has {} features, expected {p}",
                    row.len()
                )));
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        Self::from_columns(columns, response)
    }

    pub fn from_columns(columns: Vec<Vec<f64>>, response: Vec<f64>) -> Result<Self> {
        if response.is_empty() {
            return Err(Error::InvalidDataset("no rows".into()));
        }
        if columns.is_empty() {
            return Err(Error::InvalidDataset("no feature columns".into()));
        }
        for (j, col) in columns.iter().enumerate() {
            if col.len() != response.len() {
                return Err(Error::InvalidDataset(format!(
                    "column {j} has {} rows, response has {}",
                    col.len(),
                    response.len()
                )));
            }
            if let Some(t) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: t, column: j });
            }
        }
        if let Some(t) = response.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: t,
                column: columns.len(),
            });
        }
        Ok(Dataset { columns, response })
    }

    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.columns[feature][row]
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[t]).collect()
    }

    /// Applies `f(feature, value)` to every feature entry.
    pub fn map_features(&self, mut f: impl FnMut(usize, f64) -> f64) -> Result<Self> {
        let columns = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, col)| col.iter().map(|&v| f(j, v)).collect())
            .collect();
        Self::from_columns(columns, self.response.clone())
    }

    /// Keeps the listed rows, in the given order (duplicates allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Dataset {
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&t| c[t]).collect())
                .collect(),
            response: rows.iter().map(|&t| self.response[t]).collect(),
        }
    }
}

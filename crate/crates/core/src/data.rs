//! Dense numeric design matrix shared by the resampling and learning code.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Numeric,
    /// Ordinal codes of a nominal attribute.
    Categorical,
}

/// Row-major matrix of encoded attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub names: Vec<String>,
    pub kinds: Vec<ColumnKind>,
    pub rows: Vec<Vec<f64>>,
}

impl Matrix {
    pub fn new(names: Vec<String>, kinds: Vec<ColumnKind>, rows: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(names.len(), kinds.len());
        debug_assert!(rows.iter().all(|r| r.len() == names.len()));
        Matrix { names, kinds, rows }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        Matrix {
            names: self.names.clone(),
            kinds: self.kinds.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        Matrix {
            names: cols.iter().map(|&c| self.names[c].clone()).collect(),
            kinds: cols.iter().map(|&c| self.kinds[c]).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| cols.iter().map(|&c| r[c]).collect())
                .collect(),
        }
    }

    /// Indices of the named columns, `None` if any is missing.
    pub fn column_indices<S: AsRef<str>>(&self, names: &[S]) -> Option<Vec<usize>> {
        names
            .iter()
            .map(|n| self.names.iter().position(|x| x == n.as_ref()))
            .collect()
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r[c])
    }
}

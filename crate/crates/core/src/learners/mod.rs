//! Tree-ensemble classifiers: a random forest and gradient-boosted trees, a
//! one-vs-all wrapper and a cross-validated grid search.
//!
//! Training sorts the rows into a canonical order before any random draw, so
//! the same data in a different row order yields the same model.

mod boosting;
mod forest;
mod ova;
mod params;
mod search;
mod tree;

pub use ova::OneVsAllModel;
pub use params::{Family, Grid, Hyperparameters, MaxDepth, MaxFeatures};
pub use search::{grid_search, stratified_folds, CandidateScore, SearchResult};
pub use tree::{Node, Tree};

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Matrix;

/// Identifier written at the top of every serialized model.
pub const MODEL_FORMAT: &str = "lufusion-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnerError {
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("label {label} is out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("training data holds a single class")]
    SingleClass,
    #[error("class {class} has {count} rows, fewer than the {folds} folds")]
    ClassTooSmall {
        class: String,
        count: usize,
        folds: usize,
    },
    #[error("invalid learner settings: {0}")]
    Invalid(String),
    #[error("model expects columns {expected:?}, got {got:?}")]
    SchemaMismatch {
        expected: Vec<String>,
        got: Vec<String>,
    },
    #[error("model file: {0}")]
    Format(String),
}

/// What to train and how to tune it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub family: Family,
    pub params: Hyperparameters,
    #[serde(default)]
    pub grid: Grid,
    pub cv_folds: usize,
    pub seed: u64,
}

impl LearnerSpec {
    /// Family defaults, no grid, 5 folds.
    pub fn new(family: Family, seed: u64) -> Self {
        LearnerSpec {
            family,
            params: Hyperparameters::defaults(family),
            grid: Grid::default(),
            cv_folds: 5,
            seed,
        }
    }

    /// The published tuning grid of the family.
    pub fn with_published_grid(mut self) -> Self {
        self.grid = Grid::for_family(self.family);
        self
    }

    pub fn with_params(mut self, params: Hyperparameters) -> Self {
        self.params = params;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub(crate) fn validate(&self) -> Result<(), LearnerError> {
        if self.params.n_estimators == 0 {
            return Err(LearnerError::Invalid(
                "n_estimators must be at least 1".into(),
            ));
        }
        if !(self.params.learning_rate > 0.0) {
            return Err(LearnerError::Invalid(
                "learning_rate must be positive".into(),
            ));
        }
        if self.cv_folds < 2 {
            return Err(LearnerError::Invalid("cv_folds must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum Ensemble {
    Forest {
        trees: Vec<Tree>,
    },
    /// One tree per class and round (a single tree per round for two classes).
    Boosted {
        rounds: Vec<Vec<Tree>>,
    },
}

/// A fitted classifier. Immutable; safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub family: Family,
    pub classes: Vec<String>,
    /// Attribute columns the model was trained on, in order.
    pub columns: Vec<String>,
    pub params: Hyperparameters,
    ensemble: Ensemble,
}

fn check_labels(x: &Matrix, y: &[usize], n_classes: usize) -> Result<(), LearnerError> {
    if x.n_rows() != y.len() {
        return Err(LearnerError::LengthMismatch {
            rows: x.n_rows(),
            labels: y.len(),
        });
    }
    if let Some(&label) = y.iter().find(|&&l| l >= n_classes) {
        return Err(LearnerError::LabelOutOfRange {
            label,
            classes: n_classes,
        });
    }
    if y.iter().all(|&l| Some(&l) == y.first()) {
        return Err(LearnerError::SingleClass);
    }
    Ok(())
}

/// Row order used for training: lexicographic on values, then label.
fn canonical_order(x: &Matrix, y: &[usize]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| {
        x.rows[a]
            .iter()
            .zip(&x.rows[b])
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
            .then(y[a].cmp(&y[b]))
    });
    idx
}

/// Trains `spec.params` (the grid is ignored; see [`grid_search`]).
pub fn train(
    spec: &LearnerSpec,
    x: &Matrix,
    y: &[usize],
    classes: &[String],
) -> Result<TrainedModel, LearnerError> {
    spec.validate()?;
    if classes.len() < 2 {
        return Err(LearnerError::SingleClass);
    }
    check_labels(x, y, classes.len())?;
    let order = canonical_order(x, y);
    let xs = x.select_rows(&order);
    let ys: Vec<usize> = order.iter().map(|&i| y[i]).collect();
    let binned = tree::Binned::fit(&xs, spec.params.max_bins);
    let ensemble = match spec.family {
        Family::RandomForest => Ensemble::Forest {
            trees: forest::fit_forest(&binned, &ys, classes.len(), &spec.params, spec.seed),
        },
        Family::GradientBoostedTrees => Ensemble::Boosted {
            rounds: boosting::fit_boosting(
                &binned,
                &xs.rows,
                &ys,
                classes.len(),
                &spec.params,
                spec.seed,
            ),
        },
    };
    Ok(TrainedModel {
        family: spec.family,
        classes: classes.to_vec(),
        columns: x.names.clone(),
        params: spec.params.clone(),
        ensemble,
    })
}

/// Index of the largest value, ties to the first.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

impl TrainedModel {
    fn check_schema(&self, x: &Matrix) -> Result<(), LearnerError> {
        if x.names != self.columns {
            return Err(LearnerError::SchemaMismatch {
                expected: self.columns.clone(),
                got: x.names.clone(),
            });
        }
        Ok(())
    }

    /// Number of boosting rounds or forest trees.
    pub fn n_stages(&self) -> usize {
        match &self.ensemble {
            Ensemble::Forest { trees } => trees.len(),
            Ensemble::Boosted { rounds } => rounds.len(),
        }
    }

    /// Class probabilities per row, in `classes` order.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<Vec<f64>>, LearnerError> {
        self.predict_proba_stages(x, self.n_stages())
    }

    /// Probabilities using only the first `stages` trees or rounds.
    pub fn predict_proba_stages(
        &self,
        x: &Matrix,
        stages: usize,
    ) -> Result<Vec<Vec<f64>>, LearnerError> {
        self.check_schema(x)?;
        let k = self.classes.len();
        let stages = stages.min(self.n_stages());
        Ok(x.rows
            .par_iter()
            .map(|row| match &self.ensemble {
                Ensemble::Forest { trees } => forest::forest_proba(&trees[..stages], row, k),
                Ensemble::Boosted { rounds } => boosting::margins_to_proba(
                    &boosting::boosting_margins(&rounds[..stages], row, k),
                    k,
                ),
            })
            .collect())
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>, LearnerError> {
        Ok(self.predict_proba(x)?.iter().map(|p| argmax(p)).collect())
    }

    pub fn to_json(&self) -> String {
        to_envelope(self)
    }

    pub fn from_json(s: &str) -> Result<Self, LearnerError> {
        from_envelope(s)
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    model: T,
}

pub(crate) fn to_envelope<T: Serialize + Clone>(model: &T) -> String {
    let env = Envelope {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        model: model.clone(),
    };
    serde_json::to_string(&env).expect("models serialize")
}

pub(crate) fn from_envelope<T: DeserializeOwned>(s: &str) -> Result<T, LearnerError> {
    #[derive(Deserialize)]
    struct Header {
        format: String,
        version: u32,
    }
    let h: Header = serde_json::from_str(s).map_err(|e| LearnerError::Format(e.to_string()))?;
    if h.format != MODEL_FORMAT {
        return Err(LearnerError::Format(format!(
            "not a model file (format {:?})",
            h.format
        )));
    }
    if h.version != MODEL_VERSION {
        return Err(LearnerError::Format(format!(
            "unsupported model version {}",
            h.version
        )));
    }
    let env: Envelope<T> =
        serde_json::from_str(s).map_err(|e| LearnerError::Format(e.to_string()))?;
    Ok(env.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnKind;
    use rand::Rng;

    fn classes(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{i}")).collect()
    }

    fn blobs(per_class: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = crate::rng::substream(seed, "blobs");
        let centers = [(0.0, 0.0), (5.0, 0.0), (0.0, 5.0)];
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (c, &(cx, cy)) in centers.iter().enumerate() {
            for _ in 0..per_class {
                rows.push(vec![
                    cx + rng.gen_range(-1.0..1.0),
                    cy + rng.gen_range(-1.0..1.0),
                ]);
                y.push(c);
            }
        }
        (
            Matrix::new(
                vec!["a".into(), "b".into()],
                vec![ColumnKind::Numeric; 2],
                rows,
            ),
            y,
        )
    }

    #[test]
    fn both_families_fit_blobs() {
        let (x, y) = blobs(60, 1);
        for family in [Family::RandomForest, Family::GradientBoostedTrees] {
            let mut spec = LearnerSpec::new(family, 3);
            spec.params.n_estimators = 20;
            let m = train(&spec, &x, &y, &classes(3)).unwrap();
            let pred = m.predict(&x).unwrap();
            assert_eq!(pred, y, "{family}");
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let (x, _) = blobs(5, 1);
        let spec = LearnerSpec::new(Family::RandomForest, 0);
        assert_eq!(
            train(&spec, &x, &[1; 15], &classes(3)),
            Err(LearnerError::SingleClass)
        );
    }

    #[test]
    fn json_round_trip_is_exact() {
        let (x, y) = blobs(30, 2);
        for family in [Family::RandomForest, Family::GradientBoostedTrees] {
            let mut spec = LearnerSpec::new(family, 5);
            spec.params.n_estimators = 5;
            let m = train(&spec, &x, &y, &classes(3)).unwrap();
            let back = TrainedModel::from_json(&m.to_json()).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.to_json(), m.to_json());
        }
        assert!(matches!(
            TrainedModel::from_json("{\"format\":\"x\",\"version\":1}"),
            Err(LearnerError::Format(_))
        ));
    }

    #[test]
    fn schema_is_checked() {
        let (x, y) = blobs(10, 2);
        let mut spec = LearnerSpec::new(Family::RandomForest, 5);
        spec.params.n_estimators = 2;
        let m = train(&spec, &x, &y, &classes(3)).unwrap();
        let other = x.select_columns(&[1, 0]);
        assert!(matches!(
            m.predict_proba(&other),
            Err(LearnerError::SchemaMismatch { .. })
        ));
    }
}

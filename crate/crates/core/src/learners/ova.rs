use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_labels, from_envelope, grid_search, to_envelope, train, LearnerError, LearnerSpec,
    TrainedModel,
};
use crate::data::Matrix;
use crate::rng::substream;

/// One binary model per singleton hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneVsAllModel {
    pub classes: Vec<String>,
    pub models: Vec<TrainedModel>,
}

impl OneVsAllModel {
    /// Trains `H` against the rest for every class `H`. With `tune`, each
    /// binary problem gets its own grid search first.
    pub fn train(
        spec: &LearnerSpec,
        x: &Matrix,
        y: &[usize],
        classes: &[String],
        tune: bool,
    ) -> Result<Self, LearnerError> {
        check_labels(x, y, classes.len())?;
        let mut models = Vec::with_capacity(classes.len());
        for (k, h) in classes.iter().enumerate() {
            let yb: Vec<usize> = y.iter().map(|&l| usize::from(l == k)).collect();
            let names = vec![format!("not {h}"), h.clone()];
            let seed = substream(spec.seed, &format!("one-vs-all/{k}")).gen();
            let mut s = spec.clone().with_seed(seed);
            if tune {
                s = grid_search(&s, x, &yb, &names)?.tuned(&s);
            }
            models.push(train(&s, x, &yb, &names)?);
        }
        Ok(OneVsAllModel {
            classes: classes.to_vec(),
            models,
        })
    }

    /// `P_H` per row and class. Not normalized across classes.
    pub fn predict_singletons(&self, x: &Matrix) -> Result<Vec<Vec<f64>>, LearnerError> {
        let per_class: Vec<Vec<Vec<f64>>> = self
            .models
            .iter()
            .map(|m| m.predict_proba(x))
            .collect::<Result<_, _>>()?;
        Ok((0..x.n_rows())
            .map(|i| per_class.iter().map(|p| p[i][1]).collect())
            .collect())
    }

    pub fn to_json(&self) -> String {
        to_envelope(self)
    }

    pub fn from_json(s: &str) -> Result<Self, LearnerError> {
        from_envelope(s)
    }
}

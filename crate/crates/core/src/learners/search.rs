use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_labels, train, Hyperparameters, LearnerError, LearnerSpec};
use crate::data::Matrix;
use crate::evaluation::ConfusionMatrix;
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub params: Hyperparameters,
    pub fold_scores: Vec<f64>,
    pub mean_macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_index: usize,
    /// One entry per grid candidate, in grid order.
    pub scores: Vec<CandidateScore>,
}

impl SearchResult {
    pub fn best(&self) -> &Hyperparameters {
        &self.scores[self.best_index].params
    }

    /// `spec` with the winning hyperparameters.
    pub fn tuned(&self, spec: &LearnerSpec) -> LearnerSpec {
        spec.clone().with_params(self.best().clone())
    }
}

/// Fold index per row. Each class is shuffled on its own substream and dealt
/// round-robin over the folds, so every fold sees every class.
pub fn stratified_folds(
    y: &[usize],
    classes: &[String],
    folds: usize,
    seed: u64,
) -> Result<Vec<usize>, LearnerError> {
    if folds < 2 {
        return Err(LearnerError::Invalid("cv_folds must be at least 2".into()));
    }
    let mut out = vec![0; y.len()];
    for (c, name) in classes.iter().enumerate() {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < folds {
            return Err(LearnerError::ClassTooSmall {
                class: name.clone(),
                count: members.len(),
                folds,
            });
        }
        members.shuffle(&mut substream(seed, &format!("cv/{c}")));
        for (pos, i) in members.into_iter().enumerate() {
            out[i] = pos % folds;
        }
    }
    Ok(out)
}

/// Macro F1 over the classes present in `truth`.
pub(crate) fn macro_f1_present(classes: &[String], truth: &[usize], pred: &[usize]) -> f64 {
    let Ok(m) = ConfusionMatrix::from_predictions(classes, truth, pred).and_then(|cm| cm.metrics())
    else {
        return 0.0;
    };
    let present: Vec<usize> = (0..classes.len()).filter(|&c| truth.contains(&c)).collect();
    present.iter().map(|&c| m.f1[c]).sum::<f64>() / present.len() as f64
}

/// Exhaustive stratified k-fold search scored by mean macro F1. Ties go to
/// the earlier candidate.
pub fn grid_search(
    spec: &LearnerSpec,
    x: &Matrix,
    y: &[usize],
    classes: &[String],
) -> Result<SearchResult, LearnerError> {
    spec.validate()?;
    check_labels(x, y, classes.len())?;
    let fold_of = stratified_folds(y, classes, spec.cv_folds, spec.seed)?;
    let candidates = spec.grid.candidates(&spec.params);
    let k = spec.cv_folds;

    let jobs: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|c| (0..k).map(move |f| (c, f)))
        .collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let train_idx: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] != f).collect();
            let test_idx: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] == f).collect();
            let s = spec.clone().with_params(candidates[c].clone());
            let ytr: Vec<usize> = train_idx.iter().map(|&i| y[i]).collect();
            let model = train(&s, &x.select_rows(&train_idx), &ytr, classes)?;
            let pred = model.predict(&x.select_rows(&test_idx))?;
            let truth: Vec<usize> = test_idx.iter().map(|&i| y[i]).collect();
            Ok(macro_f1_present(classes, &truth, &pred))
        })
        .collect::<Result<_, LearnerError>>()?;

    let mut out = Vec::with_capacity(candidates.len());
    let mut best_index = 0;
    for (c, params) in candidates.into_iter().enumerate() {
        let fold_scores = scores[c * k..(c + 1) * k].to_vec();
        let mean = fold_scores.iter().sum::<f64>() / k as f64;
        if mean
            > out
                .get(best_index)
                .map_or(f64::NEG_INFINITY, |b: &CandidateScore| b.mean_macro_f1)
        {
            best_index = c;
        }
        out.push(CandidateScore {
            params,
            fold_scores,
            mean_macro_f1: mean,
        });
    }
    Ok(SearchResult {
        best_index,
        scores: out,
    })
}

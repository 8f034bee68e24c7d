use rayon::prelude::*;

use super::params::Hyperparameters;
use super::tree::{grow, Binned, GrowConfig, Newton, Tree};
use crate::rng::substream;

const MIN_HESSIAN: f64 = 1e-16;

/// Number of trees per boosting round: one logistic tree for two classes,
/// one softmax tree per class otherwise.
pub(crate) fn trees_per_round(n_classes: usize) -> usize {
    if n_classes == 2 {
        1
    } else {
        n_classes
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Class probabilities from raw margins.
pub(crate) fn margins_to_proba(margins: &[f64], n_classes: usize) -> Vec<f64> {
    if n_classes == 2 {
        let p = sigmoid(margins[0]);
        return vec![1.0 - p, p];
    }
    let max = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = margins.iter().map(|m| (m - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Newton-boosted regression trees on the log-loss, starting from zero
/// margins.
pub(crate) fn fit_boosting(
    binned: &Binned,
    rows: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    params: &Hyperparameters,
    seed: u64,
) -> Vec<Vec<Tree>> {
    let n = y.len();
    let k = trees_per_round(n_classes);
    let cfg = GrowConfig {
        max_depth: params.max_depth,
        max_features: params.max_features.resolve(binned.n_features()),
    };
    let mut margins = vec![vec![0.0; k]; n];
    let mut rounds = Vec::with_capacity(params.n_estimators);
    for round in 0..params.n_estimators {
        let proba: Vec<Vec<f64>> = margins
            .iter()
            .map(|m| margins_to_proba(m, n_classes))
            .collect();
        let trees: Vec<Tree> = (0..k)
            .into_par_iter()
            .map(|c| {
                // binary: the single margin is the logit of the second class
                let class = if k == 1 { 1 } else { c };
                let (grad, hess): (Vec<f64>, Vec<f64>) = (0..n)
                    .map(|i| {
                        let p = proba[i][class];
                        let target = if y[i] == class { 1.0 } else { 0.0 };
                        let h = if k == 1 {
                            p * (1.0 - p)
                        } else {
                            2.0 * p * (1.0 - p)
                        };
                        (p - target, h.max(MIN_HESSIAN))
                    })
                    .unzip();
                let crit = Newton {
                    grad: &grad,
                    hess: &hess,
                    lambda: params.reg_lambda,
                    min_child_weight: params.min_child_weight,
                    learning_rate: params.learning_rate,
                };
                let mut rng = substream(seed, &format!("boosting/round/{round}/tree/{c}"));
                grow(binned, (0..n as u32).collect(), &crit, &cfg, &mut rng)
            })
            .collect();
        for (i, m) in margins.iter_mut().enumerate() {
            for (c, t) in trees.iter().enumerate() {
                m[c] += t.leaf_value(&rows[i])[0];
            }
        }
        rounds.push(trees);
    }
    rounds
}

pub(crate) fn boosting_margins(rounds: &[Vec<Tree>], row: &[f64], n_classes: usize) -> Vec<f64> {
    let mut m = vec![0.0; trees_per_round(n_classes)];
    for trees in rounds {
        for (acc, t) in m.iter_mut().zip(trees) {
            *acc += t.leaf_value(row)[0];
        }
    }
    m
}

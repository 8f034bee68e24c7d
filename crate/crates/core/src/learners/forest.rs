use rand::Rng;
use rayon::prelude::*;

use super::params::Hyperparameters;
use super::tree::{grow, Binned, Gini, GrowConfig, Tree};
use crate::rng::substream;

/// Bagged Gini trees. Each tree draws its bootstrap sample and per-node
/// attribute subsets from its own substream.
pub(crate) fn fit_forest(
    binned: &Binned,
    y: &[usize],
    n_classes: usize,
    params: &Hyperparameters,
    seed: u64,
) -> Vec<Tree> {
    let n = y.len();
    let cfg = GrowConfig {
        max_depth: params.max_depth,
        max_features: params.max_features.resolve(binned.n_features()),
    };
    (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, &format!("forest/tree/{t}"));
            let mut weights = vec![0.0; n];
            if params.bootstrap {
                for _ in 0..n {
                    weights[rng.gen_range(0..n)] += 1.0;
                }
            } else {
                weights.iter_mut().for_each(|w| *w = 1.0);
            }
            let rows: Vec<u32> = (0..n as u32)
                .filter(|&i| weights[i as usize] > 0.0)
                .collect();
            let crit = Gini {
                labels: y,
                weights: &weights,
                n_classes,
                min_leaf: params.min_samples_leaf as f64,
            };
            grow(binned, rows, &crit, &cfg, &mut rng)
        })
        .collect()
}

/// Mean of the trees' leaf class distributions.
pub(crate) fn forest_proba(trees: &[Tree], row: &[f64], n_classes: usize) -> Vec<f64> {
    let mut p = vec![0.0; n_classes];
    for t in trees {
        for (acc, v) in p.iter_mut().zip(t.leaf_value(row)) {
            *acc += v;
        }
    }
    let n = trees.len() as f64;
    p.iter_mut().for_each(|v| *v /= n);
    p
}

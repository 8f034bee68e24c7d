//! Histogram-binned decision trees shared by both ensemble families.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::MaxDepth;
use crate::data::Matrix;

/// Per-attribute cut points learned from the training rows. A value falls in
/// bin `b` when exactly `b` cuts are below it, so `x <= cuts[b]` iff its bin
/// is at most `b`.
#[derive(Debug, Clone)]
pub(crate) struct Binned {
    pub cuts: Vec<Vec<f64>>,
    /// Column-major bin codes.
    pub codes: Vec<Vec<u16>>,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) * 0.5;
    if m >= b {
        a
    } else {
        m
    }
}

fn cuts_for(mut values: Vec<f64>, max_bins: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for v in values.iter().copied() {
        match distinct.last_mut() {
            Some((last, n)) if *last == v => *n += 1,
            _ => distinct.push((v, 1)),
        }
    }
    if distinct.len() <= max_bins {
        return distinct
            .windows(2)
            .map(|w| midpoint(w[0].0, w[1].0))
            .collect();
    }
    // equal-frequency cuts between distinct values
    let n = values.len();
    let mut cuts = Vec::new();
    let mut cum = 0;
    let mut j = 1;
    for i in 0..distinct.len() - 1 {
        cum += distinct[i].1;
        if j < max_bins && cum * max_bins >= j * n {
            cuts.push(midpoint(distinct[i].0, distinct[i + 1].0));
            while j < max_bins && cum * max_bins >= j * n {
                j += 1;
            }
        }
    }
    cuts
}

impl Binned {
    pub fn fit(x: &Matrix, max_bins: usize) -> Self {
        let max_bins = max_bins.clamp(2, usize::from(u16::MAX));
        let cuts: Vec<Vec<f64>> = (0..x.n_cols())
            .map(|c| cuts_for(x.column(c).collect(), max_bins))
            .collect();
        let codes = cuts
            .iter()
            .enumerate()
            .map(|(c, cut)| {
                x.column(c)
                    .map(|v| cut.partition_point(|&t| t < v) as u16)
                    .collect()
            })
            .collect();
        Binned { cuts, codes }
    }

    pub fn n_features(&self) -> usize {
        self.cuts.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_value(&self, row: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
                Node::Leaf { value } => return value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

/// Split quality and leaf values over additive per-row statistics.
pub(crate) trait Criterion: Sync {
    fn width(&self) -> usize;
    fn accumulate(&self, row: usize, out: &mut [f64]);
    /// Improvement of splitting `parent` into `left` and `right`; `None` when
    /// the split is not allowed.
    fn gain(&self, parent: &[f64], left: &[f64], right: &[f64]) -> Option<f64>;
    fn min_gain(&self) -> f64;
    fn can_split(&self, stats: &[f64]) -> bool;
    fn leaf(&self, stats: &[f64]) -> Vec<f64>;
}

/// Gini impurity over weighted class counts.
pub(crate) struct Gini<'a> {
    pub labels: &'a [usize],
    pub weights: &'a [f64],
    pub n_classes: usize,
    pub min_leaf: f64,
}

fn sum_sq_over(s: &[f64]) -> f64 {
    let n: f64 = s.iter().sum();
    s.iter().map(|c| c * c).sum::<f64>() / n
}

impl Criterion for Gini<'_> {
    fn width(&self) -> usize {
        self.n_classes
    }

    fn accumulate(&self, row: usize, out: &mut [f64]) {
        out[self.labels[row]] += self.weights[row];
    }

    fn gain(&self, parent: &[f64], left: &[f64], right: &[f64]) -> Option<f64> {
        let (nl, nr): (f64, f64) = (left.iter().sum(), right.iter().sum());
        if nl < self.min_leaf || nr < self.min_leaf {
            return None;
        }
        Some(sum_sq_over(left) + sum_sq_over(right) - sum_sq_over(parent))
    }

    fn min_gain(&self) -> f64 {
        1e-12
    }

    fn can_split(&self, stats: &[f64]) -> bool {
        stats.iter().filter(|&&c| c > 0.0).count() > 1
            && stats.iter().sum::<f64>() >= 2.0 * self.min_leaf
    }

    fn leaf(&self, stats: &[f64]) -> Vec<f64> {
        let n: f64 = stats.iter().sum();
        stats.iter().map(|c| c / n).collect()
    }
}

/// Second-order boosting objective: stats are (gradient sum, hessian sum).
pub(crate) struct Newton<'a> {
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub lambda: f64,
    pub min_child_weight: f64,
    pub learning_rate: f64,
}

impl Newton<'_> {
    fn score(&self, s: &[f64]) -> f64 {
        s[0] * s[0] / (s[1] + self.lambda)
    }
}

impl Criterion for Newton<'_> {
    fn width(&self) -> usize {
        2
    }

    fn accumulate(&self, row: usize, out: &mut [f64]) {
        out[0] += self.grad[row];
        out[1] += self.hess[row];
    }

    fn gain(&self, parent: &[f64], left: &[f64], right: &[f64]) -> Option<f64> {
        if left[1] < self.min_child_weight || right[1] < self.min_child_weight {
            return None;
        }
        Some(0.5 * (self.score(left) + self.score(right) - self.score(parent)))
    }

    fn min_gain(&self) -> f64 {
        1e-6
    }

    fn can_split(&self, stats: &[f64]) -> bool {
        stats[1] >= 2.0 * self.min_child_weight
    }

    fn leaf(&self, stats: &[f64]) -> Vec<f64> {
        vec![-stats[0] / (stats[1] + self.lambda) * self.learning_rate]
    }
}

pub(crate) struct GrowConfig {
    pub max_depth: MaxDepth,
    /// Non-constant attributes examined per node before settling.
    pub max_features: usize,
}

struct Best {
    feature: usize,
    bin: usize,
    gain: f64,
}

/// Best split of one attribute and whether it varies within the node.
fn scan_feature<C: Criterion>(
    binned: &Binned,
    feature: usize,
    rows: &[u32],
    total: &[f64],
    crit: &C,
) -> (bool, Option<(usize, f64)>) {
    let w = crit.width();
    let n_bins = binned.cuts[feature].len() + 1;
    if n_bins < 2 {
        return (false, None);
    }
    let codes = &binned.codes[feature];
    let mut hist = vec![0.0; n_bins * w];
    let mut seen = vec![false; n_bins];
    for &r in rows {
        let b = usize::from(codes[r as usize]);
        seen[b] = true;
        crit.accumulate(r as usize, &mut hist[b * w..(b + 1) * w]);
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return (false, None);
    }
    let last = seen.iter().rposition(|&s| s).unwrap_or(0);
    let mut left = vec![0.0; w];
    let mut right = vec![0.0; w];
    let mut best: Option<(usize, f64)> = None;
    for b in 0..last {
        for k in 0..w {
            left[k] += hist[b * w + k];
        }
        if !seen[b] {
            continue;
        }
        for k in 0..w {
            right[k] = total[k] - left[k];
        }
        if let Some(g) = crit.gain(total, &left, &right) {
            if g > crit.min_gain() && best.is_none_or(|(_, bg)| g > bg) {
                best = Some((b, g));
            }
        }
    }
    (true, best)
}

const PARALLEL_WORK: usize = 1 << 15;

fn best_split<C: Criterion>(
    binned: &Binned,
    rows: &[u32],
    total: &[f64],
    crit: &C,
    cfg: &GrowConfig,
    rng: &mut ChaCha8Rng,
) -> Option<Best> {
    let d = binned.n_features();
    let pick = |best: &mut Option<Best>, f: usize, found: Option<(usize, f64)>| {
        if let Some((bin, gain)) = found {
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                *best = Some(Best {
                    feature: f,
                    bin,
                    gain,
                });
            }
        }
    };
    let mut best = None;
    if cfg.max_features >= d {
        let scans: Vec<_> = if rows.len() * d >= PARALLEL_WORK {
            (0..d)
                .into_par_iter()
                .map(|f| scan_feature(binned, f, rows, total, crit).1)
                .collect()
        } else {
            (0..d)
                .map(|f| scan_feature(binned, f, rows, total, crit).1)
                .collect()
        };
        for (f, s) in scans.into_iter().enumerate() {
            pick(&mut best, f, s);
        }
        return best;
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(rng);
    let mut varying = 0;
    for f in order {
        if varying >= cfg.max_features && best.is_some() {
            break;
        }
        let (varies, s) = scan_feature(binned, f, rows, total, crit);
        if varies {
            varying += 1;
        }
        pick(&mut best, f, s);
    }
    best
}

/// Grows one tree over `rows` (indices into the binned training set).
pub(crate) fn grow<C: Criterion>(
    binned: &Binned,
    rows: Vec<u32>,
    crit: &C,
    cfg: &GrowConfig,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let w = crit.width();
    let mut nodes = vec![Node::Leaf { value: Vec::new() }];
    let mut stack = vec![(0usize, rows, 0usize)];
    while let Some((id, rows, depth)) = stack.pop() {
        let mut total = vec![0.0; w];
        for &r in &rows {
            crit.accumulate(r as usize, &mut total);
        }
        let split = if cfg.max_depth.allows(depth) && rows.len() > 1 && crit.can_split(&total) {
            best_split(binned, &rows, &total, crit, cfg, rng)
        } else {
            None
        };
        let Some(best) = split else {
            nodes[id] = Node::Leaf {
                value: crit.leaf(&total),
            };
            continue;
        };
        let codes = &binned.codes[best.feature];
        let (l, r): (Vec<u32>, Vec<u32>) = rows
            .iter()
            .partition(|&&i| usize::from(codes[i as usize]) <= best.bin);
        let (li, ri) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf { value: Vec::new() });
        nodes.push(Node::Leaf { value: Vec::new() });
        nodes[id] = Node::Split {
            feature: best.feature,
            threshold: binned.cuts[best.feature][best.bin],
            left: li,
            right: ri,
        };
        stack.push((ri, r, depth + 1));
        stack.push((li, l, depth + 1));
    }
    Tree { nodes }
}

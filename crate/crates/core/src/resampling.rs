//! Training-set balancing: SMOTE-NC oversampling, random undersampling or
//! nothing. Only ever applied to the training partition.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ColumnKind, Matrix};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResamplingError {
    #[error("label {label} is out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("target has {got} entries for {expected} classes")]
    TargetLength { expected: usize, got: usize },
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("class {0} has no rows to oversample from")]
    EmptyClass(usize),
    #[error("k_neighbors must be at least 1")]
    ZeroNeighbors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    #[default]
    None,
    RandomUndersample,
    SmoteNc,
}

fn default_k() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalancingPlan {
    #[serde(default)]
    pub strategy: Strategy,
    /// Per-class row counts. Defaults to the majority count for SMOTE-NC and
    /// the minority count for undersampling.
    #[serde(default)]
    pub target: Option<Vec<usize>>,
    #[serde(default = "default_k")]
    pub k_neighbors: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for BalancingPlan {
    fn default() -> Self {
        BalancingPlan {
            strategy: Strategy::None,
            target: None,
            k_neighbors: default_k(),
            seed: 0,
        }
    }
}

impl BalancingPlan {
    pub fn new(strategy: Strategy, seed: u64) -> Self {
        BalancingPlan {
            strategy,
            seed,
            ..Default::default()
        }
    }
}

/// Where an output row came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Original(usize),
    /// `base + u * (neighbor - base)` on numeric columns.
    Synthetic {
        base: usize,
        neighbor: usize,
        u: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Balanced {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub provenance: Vec<Provenance>,
}

impl Balanced {
    pub fn class_counts(&self, n_classes: usize) -> Vec<usize> {
        counts(&self.y, n_classes)
    }
}

fn counts(y: &[usize], n_classes: usize) -> Vec<usize> {
    let mut c = vec![0; n_classes];
    for &l in y {
        c[l] += 1;
    }
    c
}

fn check(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    plan: &BalancingPlan,
) -> Result<Vec<usize>, ResamplingError> {
    if x.n_rows() != y.len() {
        return Err(ResamplingError::LengthMismatch {
            rows: x.n_rows(),
            labels: y.len(),
        });
    }
    if let Some(&label) = y.iter().find(|&&l| l >= n_classes) {
        return Err(ResamplingError::LabelOutOfRange {
            label,
            classes: n_classes,
        });
    }
    if let Some(t) = &plan.target {
        if t.len() != n_classes {
            return Err(ResamplingError::TargetLength {
                expected: n_classes,
                got: t.len(),
            });
        }
    }
    Ok(counts(y, n_classes))
}

fn identity(x: &Matrix, y: &[usize]) -> Balanced {
    Balanced {
        x: x.clone(),
        y: y.to_vec(),
        provenance: (0..y.len()).map(Provenance::Original).collect(),
    }
}

/// Applies the plan's strategy.
pub fn balance(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    plan: &BalancingPlan,
) -> Result<Balanced, ResamplingError> {
    match plan.strategy {
        Strategy::None => {
            check(x, y, n_classes, plan)?;
            Ok(identity(x, y))
        }
        Strategy::RandomUndersample => random_undersample(x, y, n_classes, plan),
        Strategy::SmoteNc => smote_nc(x, y, n_classes, plan),
    }
}

/// Draws every class down to its target without replacement. Kept rows stay
/// in input order.
pub fn random_undersample(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    plan: &BalancingPlan,
) -> Result<Balanced, ResamplingError> {
    let counts = check(x, y, n_classes, plan)?;
    let floor = counts.iter().copied().filter(|&c| c > 0).min().unwrap_or(0);
    let mut keep = Vec::with_capacity(y.len());
    for class in 0..n_classes {
        let members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        let target = plan
            .target
            .as_ref()
            .map_or(floor, |t| t[class])
            .min(members.len());
        let mut rng = substream(plan.seed, &format!("undersample/{class}"));
        keep.extend(
            sample(&mut rng, members.len(), target)
                .into_iter()
                .map(|j| members[j]),
        );
    }
    keep.sort_unstable();
    Ok(Balanced {
        x: x.select_rows(&keep),
        y: keep.iter().map(|&i| y[i]).collect(),
        provenance: keep.into_iter().map(Provenance::Original).collect(),
    })
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Penalty added per categorical mismatch: the median of the numeric columns'
/// standard deviations within the class.
fn mismatch_penalty(x: &Matrix, members: &[usize]) -> f64 {
    let n = members.len() as f64;
    let stds: Vec<f64> = (0..x.n_cols())
        .filter(|&c| x.kinds[c] == ColumnKind::Numeric)
        .map(|c| {
            let mean = members.iter().map(|&i| x.rows[i][c]).sum::<f64>() / n;
            (members
                .iter()
                .map(|&i| (x.rows[i][c] - mean).powi(2))
                .sum::<f64>()
                / n)
                .sqrt()
        })
        .collect();
    median(stds).unwrap_or(1.0)
}

fn distance2(a: &[f64], b: &[f64], kinds: &[ColumnKind], penalty2: f64) -> f64 {
    let mut d = 0.0;
    for ((x, y), kind) in a.iter().zip(b).zip(kinds) {
        match kind {
            ColumnKind::Numeric => d += (x - y) * (x - y),
            ColumnKind::Categorical => {
                if x != y {
                    d += penalty2
                }
            }
        }
    }
    d
}

/// The `k` nearest class members of each member, closest first, ties by row
/// order.
fn nearest_neighbors(x: &Matrix, members: &[usize], k: usize) -> Vec<Vec<usize>> {
    let penalty = mismatch_penalty(x, members);
    let penalty2 = penalty * penalty;
    members
        .iter()
        .map(|&i| {
            let mut d: Vec<(f64, usize)> = members
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (distance2(&x.rows[i], &x.rows[j], &x.kinds, penalty2), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.truncate(k);
            d.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}

/// Most frequent value, ties to the smallest.
fn mode(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    let (mut best, mut best_n) = (v[0], 0);
    let mut i = 0;
    while i < v.len() {
        let j = v[i..]
            .iter()
            .position(|&x| x != v[i])
            .map_or(v.len(), |p| i + p);
        if j - i > best_n {
            best = v[i];
            best_n = j - i;
        }
        i = j;
    }
    best
}

/// SMOTE-NC: every class below its target (default: the majority count) is
/// topped up with synthetic rows interpolated between a random member and one
/// of its `k` nearest class neighbors. Categorical columns take the most
/// frequent value among the base row's neighbors.
///
/// Original rows come first, unchanged, followed by synthetic rows class by
/// class. A class without rows is an error only under an explicit target.
pub fn smote_nc(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    plan: &BalancingPlan,
) -> Result<Balanced, ResamplingError> {
    let counts = check(x, y, n_classes, plan)?;
    if plan.k_neighbors == 0 {
        return Err(ResamplingError::ZeroNeighbors);
    }
    let majority = counts.iter().copied().max().unwrap_or(0);
    let mut out = identity(x, y);

    for class in 0..n_classes {
        let target = plan.target.as_ref().map_or(majority, |t| t[class]);
        if target <= counts[class] {
            continue;
        }
        let members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if members.is_empty() {
            if plan.target.is_some() {
                return Err(ResamplingError::EmptyClass(class));
            }
            log::warn!("class {class} has no training rows; left empty");
            continue;
        }
        let mut rng = substream(plan.seed, &format!("smote-nc/{class}"));
        let need = target - counts[class];

        if members.len() == 1 {
            log::warn!("class {class} has a single training row; duplicating it {need} times");
            let i = members[0];
            for _ in 0..need {
                out.x.rows.push(x.rows[i].clone());
                out.y.push(class);
                out.provenance.push(Provenance::Synthetic {
                    base: i,
                    neighbor: i,
                    u: 0.0,
                });
            }
            continue;
        }

        let k = plan.k_neighbors.min(members.len() - 1);
        if k < plan.k_neighbors {
            log::warn!(
                "class {class} has {} rows; using k = {k} neighbors",
                members.len()
            );
        }
        let neighbors = nearest_neighbors(x, &members, k);
        for _ in 0..need {
            let b = rng.gen_range(0..members.len());
            let nb = &neighbors[b];
            let n = nb[rng.gen_range(0..nb.len())];
            let u: f64 = rng.gen();
            let (base, other) = (&x.rows[members[b]], &x.rows[n]);
            let row = (0..x.n_cols())
                .map(|c| match x.kinds[c] {
                    ColumnKind::Numeric => {
                        let (lo, hi) = if base[c] <= other[c] {
                            (base[c], other[c])
                        } else {
                            (other[c], base[c])
                        };
                        (base[c] + u * (other[c] - base[c])).clamp(lo, hi)
                    }
                    ColumnKind::Categorical => mode(nb.iter().map(|&j| x.rows[j][c])),
                })
                .collect();
            out.x.rows.push(row);
            out.y.push(class);
            out.provenance.push(Provenance::Synthetic {
                base: members[b],
                neighbor: n,
                u,
            });
        }
    }
    Ok(out)
}

use serde::{Deserialize, Serialize};

use super::MetricsBundle;
use crate::learners::LearnerSpec;
use crate::pipeline::{fit_post, fit_pre, PipelineError, PreRun, Prepared};
use crate::resampling::Strategy;

/// Pre-classification restricted to the columns of one source, with the
/// given (already tuned) learner settings.
pub fn single_source_ablation(
    prep: &Prepared,
    spec: &LearnerSpec,
    source: &str,
) -> Result<MetricsBundle, PipelineError> {
    Ok(fit_pre(
        prep,
        &[source.to_string()],
        spec,
        false,
        &prep.balancing_plan(),
    )?
    .metrics)
}

/// Score change from dropping one source, signed as full minus ablated:
/// positive values mean the source helps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocoDelta {
    pub source: String,
    pub overall_accuracy: f64,
    pub macro_f1: f64,
    pub f1: Vec<f64>,
    /// Metrics of the model trained without the source.
    pub ablated: MetricsBundle,
}

/// Retrains without `source` using the full run's settings.
pub fn loco_by_source(
    prep: &Prepared,
    full: &PreRun,
    source: &str,
) -> Result<LocoDelta, PipelineError> {
    if full.sources.len() < 2 {
        return Err(PipelineError::Config(
            "leaving a source out needs at least two sources".into(),
        ));
    }
    if !full.sources.iter().any(|s| s == source) {
        return Err(PipelineError::Config(format!("unknown source {source}")));
    }
    let rest: Vec<String> = full
        .sources
        .iter()
        .filter(|s| *s != source)
        .cloned()
        .collect();
    let ablated = fit_pre(prep, &rest, &full.spec, false, &prep.balancing_plan())?.metrics;
    let m = &full.metrics;
    Ok(LocoDelta {
        source: source.to_string(),
        overall_accuracy: m.overall_accuracy - ablated.overall_accuracy,
        macro_f1: m.macro_f1 - ablated.macro_f1,
        f1: m.f1.iter().zip(&ablated.f1).map(|(a, b)| a - b).collect(),
        ablated,
    })
}

/// Distribution of the number of correct single-source predictions, split by
/// whether the fused prediction is correct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceHistogram {
    pub n_sources: usize,
    /// Polygons whose fused prediction is correct.
    pub n_correct: usize,
    pub n_incorrect: usize,
    /// `correct[k]`: share of fused-correct polygons with exactly `k` correct
    /// sources. All zero when the split is empty.
    pub correct: Vec<f64>,
    pub incorrect: Vec<f64>,
}

/// `per_source[s][i]` is source `s`'s prediction for polygon `i`.
pub fn correct_source_histogram(
    per_source: &[Vec<usize>],
    fused: &[usize],
    truth: &[usize],
) -> Result<SourceHistogram, PipelineError> {
    let n = truth.len();
    if fused.len() != n || per_source.iter().any(|p| p.len() != n) {
        return Err(PipelineError::Stage {
            stage: "evaluate",
            message: "prediction vectors differ in length".into(),
        });
    }
    let bins = per_source.len() + 1;
    let mut correct = vec![0usize; bins];
    let mut incorrect = vec![0usize; bins];
    for i in 0..n {
        let k = per_source.iter().filter(|p| p[i] == truth[i]).count();
        if fused[i] == truth[i] {
            correct[k] += 1;
        } else {
            incorrect[k] += 1;
        }
    }
    let normalize = |c: &[usize]| {
        let total: usize = c.iter().sum();
        c.iter()
            .map(|&v| {
                if total == 0 {
                    0.0
                } else {
                    v as f64 / total as f64
                }
            })
            .collect::<Vec<_>>()
    };
    Ok(SourceHistogram {
        n_sources: per_source.len(),
        n_correct: correct.iter().sum(),
        n_incorrect: incorrect.iter().sum(),
        correct: normalize(&correct),
        incorrect: normalize(&incorrect),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Pre,
    Post,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Pre => "pre",
            Method::Post => "post",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalancingOutcome {
    pub strategy: Strategy,
    pub method: Method,
    pub metrics: MetricsBundle,
}

/// Both fusion approaches under each balancing strategy, learner settings
/// held fixed.
pub fn balancing_comparison(
    prep: &Prepared,
    pre: &LearnerSpec,
    post: Option<&LearnerSpec>,
) -> Result<Vec<BalancingOutcome>, PipelineError> {
    let sources = prep.sources();
    let mut out = Vec::new();
    for strategy in [
        Strategy::None,
        Strategy::RandomUndersample,
        Strategy::SmoteNc,
    ] {
        let mut plan = prep.balancing_plan();
        plan.strategy = strategy;
        plan.target = None;
        let metrics = fit_pre(prep, &sources, pre, false, &plan)?.metrics;
        out.push(BalancingOutcome {
            strategy,
            method: Method::Pre,
            metrics,
        });
        if let Some(spec) = post {
            let metrics = fit_post(prep, &sources, spec, false, &plan)?.metrics;
            out.push(BalancingOutcome {
                strategy,
                method: Method::Post,
                metrics,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_correct_puts_everything_in_the_top_bin() {
        let truth = vec![0, 1, 2, 1];
        let h = correct_source_histogram(&[truth.clone(), truth.clone()], &truth, &truth).unwrap();
        assert_eq!(h.correct, vec![0.0, 0.0, 1.0]);
        assert_eq!(h.incorrect, vec![0.0; 3]);
        assert_eq!((h.n_correct, h.n_incorrect), (4, 0));
    }

    #[test]
    fn splits_are_normalized_separately() {
        let truth = vec![0, 0, 0, 0];
        let s1 = vec![0, 1, 0, 1];
        let s2 = vec![0, 0, 1, 1];
        let fused = vec![0, 0, 1, 1];
        let h = correct_source_histogram(&[s1, s2], &fused, &truth).unwrap();
        assert_eq!(h.correct, vec![0.0, 0.5, 0.5]);
        assert_eq!(h.incorrect, vec![0.5, 0.5, 0.0]);
    }
}

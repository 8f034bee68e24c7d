//! End-to-end runs: ingestion, attribute extraction, encoding, balancing and
//! both fusion approaches.
//!
//! All randomness descends from the config's root seed through named
//! substreams (`split`, `balance`, `pre`, `post/<source>`), so stages can be
//! re-seeded independently.

pub mod config;
pub mod io;
pub mod report;
pub mod synth;

pub use config::{
    BalancingConfig, DataConfig, LayerConfig, LayerKind, LearnerConfig, RunConfig, SplitConfig,
};
pub use io::DatasetBundle;
pub use report::Report;
pub use synth::{
    generate_synthetic_scene, write_scene, EvidenceMode, RasterSpec, SceneSpec, SourceSpec,
};

use std::fmt::Display;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Matrix;
use crate::evaluation::{
    balancing_comparison, correct_source_histogram, loco_by_source, single_source_ablation,
    BalancingOutcome, ConfusionMatrix, LocoDelta, Method, MetricsBundle, SourceHistogram,
};
use crate::evidence::{
    bba_from_probs, combine_all, decide, pairwise_conflict, Decision, EvidenceError, Frame, Fusion,
    MassFunction,
};
use crate::features::{
    apply_encoder, build_attribute_table, fit_encoder, AttributeTable, EncoderState,
};
use crate::learners::{
    argmax, grid_search, train, LearnerSpec, OneVsAllModel, SearchResult, TrainedModel,
};
use crate::resampling::{balance, BalancingPlan};
use crate::rng::substream;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{}: {message}", path.display())]
    Input { path: PathBuf, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("{stage}: {message}")]
    Stage {
        stage: &'static str,
        message: String,
    },
}

impl PipelineError {
    /// Tag of the stage that failed.
    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::Input { .. } => "input",
            PipelineError::Config(_) => "config",
            PipelineError::Stage { stage, .. } => stage,
        }
    }
}

pub(crate) fn stage<E: Display>(stage: &'static str) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        message: e.to_string(),
    }
}

/// Seed of a named child stream.
pub fn child_seed(seed: u64, name: &str) -> u64 {
    substream(seed, name).gen()
}

/// Reads and validates every configured input.
pub fn ingest(config: &RunConfig) -> Result<DatasetBundle, PipelineError> {
    let path = config.resolve(&config.data.polygons);
    let polygons = io::read_polygons(&path, &config.tolerance)?;
    for p in &polygons {
        match p.label() {
            None => {
                return Err(PipelineError::Input {
                    path,
                    message: format!("polygon {} has no label", p.id()),
                });
            }
            Some(l) if !config.frame.iter().any(|h| h == l) => {
                return Err(PipelineError::Input {
                    path,
                    message: format!(
                        "polygon {} has label {l:?}, which is not in the frame",
                        p.id()
                    ),
                });
            }
            _ => {}
        }
    }
    let layers = config
        .data
        .layers
        .iter()
        .map(|l| io::read_layer(&config.base_dir, l, &config.tolerance))
        .collect::<Result<_, _>>()?;
    Ok(DatasetBundle { polygons, layers })
}

/// Row indices of the two partitions, each ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Random split with `round(fraction * n)` training rows. The stratified
/// variant orders rows by their relative rank inside their class, so every
/// class is cut at the same fraction.
pub fn split_indices(
    labels: &[usize],
    n_classes: usize,
    fraction: f64,
    stratified: bool,
    seed: u64,
) -> Split {
    let n = labels.len();
    let n_train =
        ((fraction * n as f64).round() as usize).clamp(usize::from(n > 1), n.saturating_sub(1));
    let mut rng = substream(seed, "split");
    let order: Vec<usize> = if stratified {
        let mut keyed: Vec<(f64, usize, usize)> = Vec::with_capacity(n);
        for c in 0..n_classes {
            let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            members.shuffle(&mut rng);
            let m = members.len() as f64;
            keyed.extend(
                members
                    .into_iter()
                    .enumerate()
                    .map(|(pos, i)| ((pos as f64 + 0.5) / m, c, i)),
            );
        }
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        keyed.into_iter().map(|(_, _, i)| i).collect()
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        all
    };
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Split { train, test }
}

/// Encoded attributes of every polygon with the train/test partition.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub classes: Vec<String>,
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    /// Raw attributes, before encoding.
    pub table: AttributeTable,
    /// Fitted on training rows only.
    pub encoder: EncoderState,
    pub matrix: Matrix,
    pub split: Split,
    pub seed: u64,
    pub balancing: BalancingConfig,
}

/// Attribute table of a bundle.
pub fn extract_features(
    config: &RunConfig,
    bundle: &DatasetBundle,
) -> Result<AttributeTable, PipelineError> {
    build_attribute_table(
        &bundle.polygons,
        &bundle.layers,
        config.data.geometry_source.as_deref(),
        config.data.neighbors,
        &config.tolerance,
    )
    .map_err(stage("features"))
}

/// Features, split and encoding.
pub fn prepare(config: &RunConfig, bundle: &DatasetBundle) -> Result<Prepared, PipelineError> {
    let table = extract_features(config, bundle)?;
    let labels: Vec<usize> = bundle
        .polygons
        .iter()
        .map(|p| {
            p.label()
                .and_then(|l| config.frame.iter().position(|h| h == l))
                .ok_or_else(|| PipelineError::Stage {
                    stage: "ingest",
                    message: format!("polygon {} has no frame label", p.id()),
                })
        })
        .collect::<Result<_, _>>()?;
    let split = split_indices(
        &labels,
        config.frame.len(),
        config.split.train_fraction,
        config.split.stratified,
        child_seed(config.seed, "split"),
    );
    let train_ids: Vec<String> = split
        .train
        .iter()
        .map(|&i| table.ids()[i].clone())
        .collect();
    let encoder = fit_encoder(&table, &train_ids).map_err(stage("encode"))?;
    let matrix = apply_encoder(&table, &encoder)
        .and_then(|t| t.to_matrix())
        .map_err(stage("encode"))?;
    Ok(Prepared {
        classes: config.frame.clone(),
        ids: table.ids().to_vec(),
        labels,
        table,
        encoder,
        matrix,
        split,
        seed: config.seed,
        balancing: config.balancing.clone(),
    })
}

impl Prepared {
    pub fn sources(&self) -> Vec<String> {
        self.table.sources()
    }

    /// Matrix columns owned by `sources`, in table order.
    pub fn columns_of(&self, sources: &[String]) -> Vec<usize> {
        self.table
            .columns()
            .iter()
            .enumerate()
            .filter(|(_, c)| sources.contains(&c.meta.source))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn balancing_plan(&self) -> BalancingPlan {
        self.balancing.plan(child_seed(self.seed, "balance"))
    }

    fn train_set(
        &self,
        cols: &[usize],
        plan: &BalancingPlan,
    ) -> Result<(Matrix, Vec<usize>), PipelineError> {
        let x = self
            .matrix
            .select_rows(&self.split.train)
            .select_columns(cols);
        let y: Vec<usize> = self.split.train.iter().map(|&i| self.labels[i]).collect();
        let b = balance(&x, &y, self.classes.len(), plan).map_err(stage("balance"))?;
        Ok((b.x, b.y))
    }

    fn test_set(&self, cols: &[usize]) -> (Matrix, Vec<usize>) {
        let x = self
            .matrix
            .select_rows(&self.split.test)
            .select_columns(cols);
        (x, self.split.test.iter().map(|&i| self.labels[i]).collect())
    }

    fn check_sources(&self, sources: &[String]) -> Result<Vec<usize>, PipelineError> {
        let known = self.sources();
        if let Some(s) = sources.iter().find(|s| !known.contains(s)) {
            return Err(PipelineError::Config(format!("unknown source {s}")));
        }
        let cols = self.columns_of(sources);
        if cols.is_empty() {
            return Err(PipelineError::Config(
                "no attribute columns selected".into(),
            ));
        }
        Ok(cols)
    }

    fn evaluate(
        &self,
        truth: &[usize],
        predicted: &[usize],
    ) -> Result<(ConfusionMatrix, MetricsBundle), PipelineError> {
        let cm = ConfusionMatrix::from_predictions(&self.classes, truth, predicted)
            .map_err(stage("evaluate"))?;
        let m = cm.metrics().map_err(stage("evaluate"))?;
        Ok((cm, m))
    }
}

/// One test polygon's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub truth: usize,
    pub predicted: usize,
    /// Class probabilities (pre) or pignistic probabilities (post).
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PreRun {
    pub sources: Vec<String>,
    pub spec: LearnerSpec,
    pub search: Option<SearchResult>,
    pub model: TrainedModel,
    pub predictions: Vec<Prediction>,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsBundle,
}

/// Trains one classifier on the columns of `sources` and scores it on the
/// test partition. With `tune`, `spec.grid` is searched first on the balanced
/// training set.
pub fn fit_pre(
    prep: &Prepared,
    sources: &[String],
    spec: &LearnerSpec,
    tune: bool,
    plan: &BalancingPlan,
) -> Result<PreRun, PipelineError> {
    let cols = prep.check_sources(sources)?;
    let (x, y) = prep.train_set(&cols, plan)?;
    let search = if tune {
        Some(grid_search(spec, &x, &y, &prep.classes).map_err(stage("tune"))?)
    } else {
        None
    };
    let spec = search
        .as_ref()
        .map_or_else(|| spec.clone(), |s| s.tuned(spec));
    let model = train(&spec, &x, &y, &prep.classes).map_err(stage("train"))?;
    let (xt, truth) = prep.test_set(&cols);
    let proba = model.predict_proba(&xt).map_err(stage("predict"))?;
    let predicted: Vec<usize> = proba.iter().map(|p| argmax(p)).collect();
    let (confusion, metrics) = prep.evaluate(&truth, &predicted)?;
    let predictions = prep
        .split
        .test
        .iter()
        .zip(proba)
        .zip(&predicted)
        .map(|((&i, scores), &p)| Prediction {
            id: prep.ids[i].clone(),
            truth: prep.labels[i],
            predicted: p,
            scores,
        })
        .collect();
    Ok(PreRun {
        sources: sources.to_vec(),
        spec,
        search,
        model,
        predictions,
        confusion,
        metrics,
    })
}

/// All-source classifier as configured.
pub fn run_preclassification(config: &RunConfig, prep: &Prepared) -> Result<PreRun, PipelineError> {
    let spec = config.pre.spec(child_seed(config.seed, "pre"));
    fit_pre(
        prep,
        &prep.sources(),
        &spec,
        config.pre.tune,
        &prep.balancing_plan(),
    )
}

#[derive(Debug, Clone)]
pub struct SourceOutcome {
    pub source: String,
    pub model: OneVsAllModel,
    /// `P_H` per test row and class.
    pub singleton_probs: Vec<Vec<f64>>,
    pub decisions: Vec<Decision>,
    pub metrics: MetricsBundle,
}

#[derive(Debug, Clone)]
pub struct PostRun {
    pub frame: Frame,
    pub per_source: Vec<SourceOutcome>,
    /// `bbas[row][source]` for every test row.
    pub bbas: Vec<Vec<MassFunction>>,
    pub fusions: Vec<Fusion>,
    pub decisions: Vec<Decision>,
    pub predictions: Vec<Prediction>,
    /// Mean pairwise conflict between sources.
    pub conflict: Vec<Vec<f64>>,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsBundle,
}

impl PostRun {
    pub fn sources(&self) -> Vec<String> {
        self.per_source.iter().map(|s| s.source.clone()).collect()
    }
}

/// Per-source one-vs-all models, bbas from their singleton probabilities,
/// Dempster fusion in source order and pignistic decisions.
pub fn fit_post(
    prep: &Prepared,
    sources: &[String],
    spec: &LearnerSpec,
    tune: bool,
    plan: &BalancingPlan,
) -> Result<PostRun, PipelineError> {
    let frame = Frame::new(prep.classes.clone()).map_err(stage("post"))?;
    let truth: Vec<usize> = prep.split.test.iter().map(|&i| prep.labels[i]).collect();
    let mut per_source = Vec::with_capacity(sources.len());
    let mut source_bbas: Vec<Vec<MassFunction>> = Vec::with_capacity(sources.len());
    for s in sources {
        let cols = prep.check_sources(std::slice::from_ref(s))?;
        let (x, y) = prep.train_set(&cols, plan)?;
        let spec = spec
            .clone()
            .with_seed(child_seed(spec.seed, &format!("post/{s}")));
        let model =
            OneVsAllModel::train(&spec, &x, &y, &prep.classes, tune).map_err(stage("train"))?;
        let (xt, _) = prep.test_set(&cols);
        let singleton_probs = model.predict_singletons(&xt).map_err(stage("predict"))?;
        let bbas: Vec<MassFunction> = singleton_probs
            .iter()
            .map(|p| bba_from_probs(&frame, p))
            .collect::<Result<_, _>>()
            .map_err(stage("post"))?;
        let decisions: Vec<Decision> = bbas.iter().map(decide).collect();
        let predicted: Vec<usize> = decisions.iter().map(|d| d.hypothesis).collect();
        let (_, metrics) = prep.evaluate(&truth, &predicted)?;
        source_bbas.push(bbas);
        per_source.push(SourceOutcome {
            source: s.clone(),
            model,
            singleton_probs,
            decisions,
            metrics,
        });
    }

    let bbas: Vec<Vec<MassFunction>> = (0..truth.len())
        .map(|r| source_bbas.iter().map(|b| b[r].clone()).collect())
        .collect();
    let mut fusions = Vec::with_capacity(bbas.len());
    for (r, row) in bbas.iter().enumerate() {
        let fused = combine_all(row).map_err(|e| match e {
            EvidenceError::TotalConflict { first, second } => PipelineError::Stage {
                stage: "fuse",
                message: format!(
                    "polygon {}: total conflict between sources {} and {}",
                    prep.ids[prep.split.test[r]], sources[first], sources[second]
                ),
            },
            other => stage("fuse")(other),
        })?;
        fusions.push(fused);
    }
    let decisions: Vec<Decision> = fusions.iter().map(|f| decide(&f.mass)).collect();
    let predicted: Vec<usize> = decisions.iter().map(|d| d.hypothesis).collect();
    let (confusion, metrics) = prep.evaluate(&truth, &predicted)?;
    let predictions = prep
        .split
        .test
        .iter()
        .zip(&fusions)
        .zip(&predicted)
        .map(|((&i, f), &p)| Prediction {
            id: prep.ids[i].clone(),
            truth: prep.labels[i],
            predicted: p,
            scores: crate::evidence::pignistic(&f.mass),
        })
        .collect();
    let conflict = pairwise_conflict(&bbas).map_err(stage("conflict"))?;
    Ok(PostRun {
        frame,
        per_source,
        bbas,
        fusions,
        decisions,
        predictions,
        conflict,
        confusion,
        metrics,
    })
}

/// Evidential fusion of every source as configured.
pub fn run_postclassification(
    config: &RunConfig,
    prep: &Prepared,
) -> Result<PostRun, PipelineError> {
    let spec = config.post.spec(child_seed(config.seed, "post"));
    fit_post(
        prep,
        &prep.sources(),
        &spec,
        config.post.tune,
        &prep.balancing_plan(),
    )
}

/// File names of the per-run artifacts.
pub const PREDICTIONS_PRE: &str = "predictions_pre.csv";
pub const PREDICTIONS_POST: &str = "predictions_post.csv";
pub const MODEL_PRE: &str = "model_pre.json";
pub const ENCODER: &str = "encoder.json";
pub const SPLIT: &str = "split.json";

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("artifacts serialize")
}

fn write_text(path: &std::path::Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(|e| PipelineError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Encoder, split, models and prediction files of the runs given.
pub fn write_artifacts(
    dir: &std::path::Path,
    prep: &Prepared,
    pre: Option<&PreRun>,
    post: Option<&PostRun>,
) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::Input {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    write_text(&dir.join(ENCODER), &json(&prep.encoder))?;
    let split: Vec<(&str, &str)> = prep
        .split
        .train
        .iter()
        .map(|&i| (prep.ids[i].as_str(), "train"))
        .chain(
            prep.split
                .test
                .iter()
                .map(|&i| (prep.ids[i].as_str(), "test")),
        )
        .collect();
    write_text(&dir.join(SPLIT), &json(&split))?;
    if let Some(pre) = pre {
        write_text(&dir.join(MODEL_PRE), &pre.model.to_json())?;
        report::write_predictions(&dir.join(PREDICTIONS_PRE), &prep.classes, &pre.predictions)?;
    }
    if let Some(post) = post {
        for s in &post.per_source {
            write_text(
                &dir.join(format!("model_post_{}.json", s.source)),
                &s.model.to_json(),
            )?;
        }
        report::write_predictions(
            &dir.join(PREDICTIONS_POST),
            &prep.classes,
            &post.predictions,
        )?;
    }
    Ok(())
}

/// Every study of one configuration.
#[derive(Debug, Clone)]
pub struct FullRun {
    pub pre: PreRun,
    pub post: PostRun,
    pub ablation: Vec<(String, MetricsBundle)>,
    pub loco: Vec<LocoDelta>,
    pub balancing: Vec<BalancingOutcome>,
    pub report: Report,
}

/// Single-source ablation of every source, reusing the settings chosen for
/// the full model.
pub fn ablation_study(
    prep: &Prepared,
    pre: &PreRun,
) -> Result<Vec<(String, MetricsBundle)>, PipelineError> {
    use rayon::prelude::*;
    pre.sources
        .par_iter()
        .map(|s| Ok((s.clone(), single_source_ablation(prep, &pre.spec, s)?)))
        .collect()
}

/// Leave-one-source-out for every source; empty with a single source.
pub fn loco_study(prep: &Prepared, pre: &PreRun) -> Result<Vec<LocoDelta>, PipelineError> {
    use rayon::prelude::*;
    if pre.sources.len() < 2 {
        return Ok(Vec::new());
    }
    pre.sources
        .par_iter()
        .map(|s| loco_by_source(prep, pre, s))
        .collect()
}

/// Histograms of correct single-source decisions for both methods.
pub fn source_histograms(
    pre: &PreRun,
    post: &PostRun,
) -> Result<[SourceHistogram; 2], PipelineError> {
    let truth: Vec<usize> = post.predictions.iter().map(|p| p.truth).collect();
    let per_source: Vec<Vec<usize>> = post
        .per_source
        .iter()
        .map(|s| s.decisions.iter().map(|d| d.hypothesis).collect())
        .collect();
    let fused = |p: &[Prediction]| p.iter().map(|p| p.predicted).collect::<Vec<_>>();
    Ok([
        correct_source_histogram(&per_source, &fused(&pre.predictions), &truth)?,
        correct_source_histogram(&per_source, &fused(&post.predictions), &truth)?,
    ])
}

/// Both approaches, the source studies, the balancing comparison and the
/// assembled report.
pub fn run_all(config: &RunConfig, prep: &Prepared) -> Result<FullRun, PipelineError> {
    let pre = run_preclassification(config, prep)?;
    let post = run_postclassification(config, prep)?;
    let ablation = ablation_study(prep, &pre)?;
    let loco = loco_study(prep, &pre)?;
    let post_spec = config.post.spec(child_seed(config.seed, "post"));
    let balancing = balancing_comparison(prep, &pre.spec, Some(&post_spec))?;
    let [hist_pre, hist_post] = source_histograms(&pre, &post)?;

    let mut report = Report::default();
    report.add_run("pre", &pre.metrics, pre.predictions.len());
    report.add_run("post", &post.metrics, post.predictions.len());
    for s in &post.per_source {
        report.add_run(&format!("post/{}", s.source), &s.metrics, s.decisions.len());
    }
    report.set_ablation(&ablation);
    report.set_loco(&loco);
    report.set_balancing(&balancing);
    report.set_histogram(Method::Pre, &hist_pre);
    report.set_histogram(Method::Post, &hist_post);
    report.set_evidence(&post);
    Ok(FullRun {
        pre,
        post,
        ablation,
        loco,
        balancing,
        report,
    })
}

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use lufusion::evaluation::single_source_ablation;
use lufusion::evidence::{decide, pignistic};
use lufusion::pipeline::*;

/// The reference scene with a minority large enough for a few hundred polygons.
fn small(n: usize) -> SceneSpec {
    let mut spec = SceneSpec::reference(n);
    spec.priors = vec![0.1, 0.3, 0.6];
    spec
}

/// Writes a scene and returns its config with fast learner settings.
fn scene(dir: &Path, spec: &SceneSpec, seed: u64) -> RunConfig {
    let path = write_scene(dir, spec, seed).unwrap();
    let mut config = RunConfig::load(&path).unwrap();
    for l in [&mut config.pre, &mut config.post] {
        l.params.n_estimators = Some(15);
    }
    config
}

fn prepared(config: &RunConfig) -> Prepared {
    prepare(config, &ingest(config).unwrap()).unwrap()
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn export_then_ingest_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = generate_synthetic_scene(&small(150), 3).unwrap();
    let config = scene(dir.path(), &small(150), 3);
    assert_eq!(ingest(&config).unwrap(), bundle);
}

#[test]
fn bad_polygon_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = scene(dir.path(), &small(50), 1);
    let polygons = config.resolve(&config.data.polygons);

    fs::write(&polygons, r#"{"type":"FeatureCollection","features":[]}"#).unwrap();
    let e = ingest(&config).unwrap_err();
    assert_eq!(e.stage(), "input");

    fs::write(&polygons, "").unwrap();
    assert_eq!(ingest(&config).unwrap_err().stage(), "input");

    let dir = tempfile::tempdir().unwrap();
    config = scene(dir.path(), &small(50), 1);
    let polygons = config.resolve(&config.data.polygons);
    let text = fs::read_to_string(&polygons)
        .unwrap()
        .replacen("\"LU5\"", "\"LU9\"", 1);
    fs::write(&polygons, text).unwrap();
    let msg = ingest(&config).unwrap_err().to_string();
    assert!(msg.contains("LU9"), "{msg}");
}

#[test]
fn generated_class_counts_follow_the_priors() {
    let mut spec = small(5000);
    spec.priors = vec![0.01, 0.09, 0.90];
    let bundle = generate_synthetic_scene(&spec, 17).unwrap();
    let n = bundle.polygons.len() as f64;
    assert_eq!(bundle.polygons.len(), 5000);
    for (class, p) in spec.classes.iter().zip(&spec.priors) {
        let k = bundle
            .polygons
            .iter()
            .filter(|q| q.label() == Some(class))
            .count() as f64;
        let sigma = (n * p * (1.0 - p)).sqrt();
        assert!(
            (k - n * p).abs() <= 3.0 * sigma,
            "{class}: {k} vs {}",
            n * p
        );
    }
}

#[test]
fn perfect_source_is_learned_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small(600);
    spec.priors = vec![0.2, 0.3, 0.5];
    spec.sources = vec![SourceSpec {
        name: "exact".into(),
        fidelity: 1.0,
        mode: EvidenceMode::Abstain,
    }];
    spec.raster = None;
    let config = scene(dir.path(), &spec, 4);
    let post = run_postclassification(&config, &prepared(&config)).unwrap();
    assert!(
        post.per_source[0].metrics.macro_f1 >= 0.99,
        "{:?}",
        post.per_source[0].metrics
    );
}

#[test]
fn split_never_mixes_partitions() {
    let dir = tempfile::tempdir().unwrap();
    let config = scene(dir.path(), &small(303), 8);
    let prep = prepared(&config);
    let (train, test) = (&prep.split.train, &prep.split.test);
    assert_eq!(train.len() + test.len(), 303);
    assert!(train.iter().all(|i| !test.contains(i)));
    assert!((train.len() as f64 - 0.8 * 303.0).abs() <= 1.0);
}

#[test]
fn test_labels_do_not_reach_fitted_state() {
    let dir = tempfile::tempdir().unwrap();
    let config = scene(dir.path(), &small(300), 6);
    let bundle = ingest(&config).unwrap();
    let prep = prepare(&config, &bundle).unwrap();

    let mut altered = bundle.clone();
    for &i in &prep.split.test {
        let flipped = if altered.polygons[i].label() == Some("LU5") {
            "LU3"
        } else {
            "LU5"
        };
        altered.polygons[i].set_label(Some(flipped.into()));
    }
    let other = prepare(&config, &altered).unwrap();
    assert_eq!(other.split, prep.split);
    assert_eq!(other.encoder, prep.encoder);
    assert_eq!(other.matrix, prep.matrix);
    let a = run_preclassification(&config, &prep).unwrap();
    let b = run_preclassification(&config, &other).unwrap();
    assert_eq!(a.model.to_json(), b.model.to_json());
}

#[test]
fn one_source_config_matches_the_ablation() {
    let dir = tempfile::tempdir().unwrap();
    let config = scene(dir.path(), &small(400), 2);
    let prep = prepared(&config);
    let spec = config.pre.spec(child_seed(config.seed, "pre"));
    let ablated = single_source_ablation(&prep, &spec, "s1").unwrap();

    let mut single = config.clone();
    single.data.layers.retain(|l| l.source == "s1");
    let run = run_preclassification(&single, &prepared(&single)).unwrap();
    assert_eq!(run.metrics, ablated);
}

#[test]
fn single_source_fusion_is_its_pignistic_argmax() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = scene(dir.path(), &small(300), 9);
    config.data.layers.retain(|l| l.source == "s2");
    let post = run_postclassification(&config, &prepared(&config)).unwrap();
    assert_eq!(post.sources(), ["s2"]);
    for (r, p) in post.predictions.iter().enumerate() {
        let m = &post.bbas[r][0];
        assert_eq!(post.fusions[r].mass, *m);
        assert!(post.fusions[r].step_conflicts.is_empty());
        assert_eq!(p.predicted, decide(m).hypothesis);
        assert_eq!(p.scores, pignistic(m));
        assert_eq!(post.decisions[r], post.per_source[0].decisions[r]);
    }
}

#[test]
fn conflict_matrix_is_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let config = scene(dir.path(), &small(250), 5);
    let post = run_postclassification(&config, &prepared(&config)).unwrap();
    let c = &post.conflict;
    assert_eq!(c.len(), 4);
    for s in 0..4 {
        for t in 0..4 {
            assert_eq!(c[s][t], c[t][s]);
            assert!((0.0..1.0).contains(&c[s][t]));
        }
    }
}

#[test]
fn full_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = scene(dir.path(), &small(250), 12);
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let prep = prepared(&config);
        let full = run_all(&config, &prep).unwrap();
        write_artifacts(&out, &prep, Some(&full.pre), Some(&full.post)).unwrap();
        full.report.write(&out).unwrap();
        outputs.push(files(&out));
    }
    assert!(outputs[0].len() >= 10);
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn report_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let config = scene(dir.path(), &small(250), 13);
    let full = run_all(&config, &prepared(&config)).unwrap();
    let out = dir.path().join("report");
    full.report.write(&out).unwrap();
    let back = Report::read(&out).unwrap();
    assert_eq!(back, full.report);
}

#[test]
fn config_errors_are_tagged() {
    let dir = tempfile::tempdir().unwrap();
    let config = scene(dir.path(), &small(50), 1);
    let mut text = config.to_toml();
    text = text.replacen("train_fraction = 0.8", "train_fraction = 1.5", 1);
    let e = RunConfig::from_toml(&text, dir.path()).unwrap_err();
    assert_eq!(e.stage(), "config");
    assert!(RunConfig::load(&dir.path().join("missing.toml")).is_err());
}

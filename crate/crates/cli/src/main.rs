use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use lufusion::evaluation::Method;
use lufusion::pipeline::{
    ablation_study, ingest, io, loco_study, prepare, report, run_all, run_postclassification,
    run_preclassification, source_histograms, write_artifacts, write_scene, PipelineError,
    Prepared, Report, RunConfig, SceneSpec,
};

#[derive(Parser)]
#[command(
    name = "lufusion",
    version,
    about = "Land-use classification by fusing heterogeneous sources"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Overrides the configured root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Reads and validates every input of a config.
    IngestCheck(Common),
    /// Writes a synthetic scene and a config that runs on it.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Scene description (TOML); the reference scene when absent.
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Number of polygons of the reference scene.
        #[arg(long, default_value_t = 5000)]
        polygons: usize,
    },
    /// Writes the encoded attribute matrix and the column manifest.
    Features(Common),
    /// Trains and evaluates the all-source classifier.
    TrainPre(Common),
    /// Trains per-source classifiers and fuses them.
    TrainPost(Common),
    /// Both approaches plus the correct-source histograms.
    Evaluate(Common),
    /// Single-source ablation.
    Ablate(Common),
    /// Leave one source out.
    Loco(Common),
    /// Conflict matrix, per-step conflict and source mass functions.
    Conflict(Common),
    /// Every run and study, written as one report.
    Report(Common),
}

fn load(common: &Common) -> Result<RunConfig, PipelineError> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| PipelineError::Config("--config is required".into()))?;
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out = std::path::absolute(out).map_err(|e| PipelineError::Config(e.to_string()))?;
    }
    Ok(config)
}

fn prepared(common: &Common) -> Result<(RunConfig, Prepared), PipelineError> {
    let config = load(common)?;
    let bundle = ingest(&config)?;
    info!(
        "ingested {} polygons and {} layers",
        bundle.polygons.len(),
        bundle.layers.len()
    );
    let prep = prepare(&config, &bundle)?;
    info!(
        "{} attribute columns, {} train / {} test",
        prep.matrix.n_cols(),
        prep.split.train.len(),
        prep.split.test.len()
    );
    Ok((config, prep))
}

/// Loads the report already in `dir`, applies `update` and writes it back.
fn update_report(dir: &Path, update: impl FnOnce(&mut Report)) -> Result<(), PipelineError> {
    let mut r = Report::read(dir)?;
    update(&mut r);
    r.write(dir)?;
    println!("{}", dir.join(report::SUMMARY).display());
    Ok(())
}

fn synth(common: &Common, scene: Option<&Path>, polygons: usize) -> Result<(), PipelineError> {
    let spec = match scene {
        Some(p) => SceneSpec::load(p)?,
        None => SceneSpec::reference(polygons),
    };
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("scene"));
    std::fs::create_dir_all(&dir).map_err(|e| PipelineError::Input {
        path: dir.clone(),
        message: e.to_string(),
    })?;
    let config = write_scene(&dir, &spec, common.seed.unwrap_or(0))?;
    println!("{}", config.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match &cli.command {
        Command::IngestCheck(c) => {
            let config = load(c)?;
            let bundle = ingest(&config)?;
            println!("polygons: {}", bundle.polygons.len());
            for class in &config.frame {
                let n = bundle
                    .polygons
                    .iter()
                    .filter(|p| p.label() == Some(class.as_str()))
                    .count();
                println!("  {class}: {n}");
            }
            for l in &bundle.layers {
                println!(
                    "layer {} (source {}, {})",
                    l.name,
                    l.source,
                    l.payload.kind_name()
                );
            }
        }
        Command::Synth {
            common,
            scene,
            polygons,
        } => synth(common, scene.as_deref(), *polygons)?,
        Command::Features(c) => {
            let (config, prep) = prepared(c)?;
            let dir = config.out_dir();
            std::fs::create_dir_all(&dir).map_err(|e| PipelineError::Input {
                path: dir.clone(),
                message: e.to_string(),
            })?;
            report::write_matrix(&dir.join("features.csv"), &prep.ids, &prep.matrix)?;
            let pairs: Vec<(String, String)> = prep
                .table
                .columns()
                .iter()
                .map(|c| (c.meta.name.clone(), c.meta.source.clone()))
                .collect();
            io::write_manifest(&dir.join("manifest.csv"), &pairs)?;
            write_artifacts(&dir, &prep, None, None)?;
            println!("{}", dir.join("features.csv").display());
        }
        Command::TrainPre(c) => {
            let (config, prep) = prepared(c)?;
            let pre = run_preclassification(&config, &prep)?;
            let dir = config.out_dir();
            write_artifacts(&dir, &prep, Some(&pre), None)?;
            update_report(&dir, |r| {
                r.add_run("pre", &pre.metrics, pre.predictions.len())
            })?;
        }
        Command::TrainPost(c) => {
            let (config, prep) = prepared(c)?;
            let post = run_postclassification(&config, &prep)?;
            let dir = config.out_dir();
            write_artifacts(&dir, &prep, None, Some(&post))?;
            update_report(&dir, |r| {
                r.add_run("post", &post.metrics, post.predictions.len());
                for s in &post.per_source {
                    r.add_run(&format!("post/{}", s.source), &s.metrics, s.decisions.len());
                }
                r.set_evidence(&post);
            })?;
        }
        Command::Evaluate(c) => {
            let (config, prep) = prepared(c)?;
            let pre = run_preclassification(&config, &prep)?;
            let post = run_postclassification(&config, &prep)?;
            let [h_pre, h_post] = source_histograms(&pre, &post)?;
            let dir = config.out_dir();
            write_artifacts(&dir, &prep, Some(&pre), Some(&post))?;
            update_report(&dir, |r| {
                r.add_run("pre", &pre.metrics, pre.predictions.len());
                r.add_run("post", &post.metrics, post.predictions.len());
                for s in &post.per_source {
                    r.add_run(&format!("post/{}", s.source), &s.metrics, s.decisions.len());
                }
                r.set_histogram(Method::Pre, &h_pre);
                r.set_histogram(Method::Post, &h_post);
            })?;
        }
        Command::Ablate(c) | Command::Loco(c) => {
            let (config, prep) = prepared(c)?;
            let pre = run_preclassification(&config, &prep)?;
            if matches!(cli.command, Command::Ablate(_)) {
                let ablation = ablation_study(&prep, &pre)?;
                update_report(&config.out_dir(), |r| r.set_ablation(&ablation))?;
            } else {
                let loco = loco_study(&prep, &pre)?;
                update_report(&config.out_dir(), |r| r.set_loco(&loco))?;
            }
        }
        Command::Conflict(c) => {
            let (config, prep) = prepared(c)?;
            let post = run_postclassification(&config, &prep)?;
            update_report(&config.out_dir(), |r| r.set_evidence(&post))?;
        }
        Command::Report(c) => {
            let (config, prep) = prepared(c)?;
            let full = run_all(&config, &prep)?;
            let dir = config.out_dir();
            write_artifacts(&dir, &prep, Some(&full.pre), Some(&full.post))?;
            full.report.write(&dir)?;
            println!("{}", dir.join(report::SUMMARY).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.stage());
            ExitCode::FAILURE
        }
    }
}

//! Report tables. One CSV per table plus `summary.md`; every table reads
//! back into the rows that produced it.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{PipelineError, PostRun, Prediction};
use crate::evaluation::{
    percent, BalancingOutcome, LocoDelta, Method, MetricsBundle, Quantity, SourceHistogram,
};
use crate::evidence::MassFunction;

pub const RUNS: &str = "runs.csv";
pub const PER_CLASS: &str = "per_class.csv";
pub const ABLATION: &str = "ablation.csv";
pub const LOCO: &str = "loco.csv";
pub const CONFLICT: &str = "conflict.csv";
pub const BALANCING: &str = "balancing.csv";
pub const HISTOGRAM: &str = "histogram.csv";
pub const KAPPA: &str = "kappa.csv";
pub const BBAS: &str = "bbas.csv";
pub const SUMMARY: &str = "summary.md";

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Rows of `path`; an absent file reads as no rows.
pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    r.deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run: String,
    pub n_test: usize,
    pub overall_accuracy: f64,
    pub macro_f1: f64,
    pub oa_pct: i64,
    pub mf1_pct: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub run: String,
    pub class: String,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub recall_pct: i64,
    pub precision_pct: i64,
    pub f1_pct: i64,
    /// Ratios with a zero denominator, `;`-separated.
    pub undefined: String,
}

/// Long-format metric: `metric` is `oa`, `mf1` or `f1` (with a class).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub name: String,
    pub metric: String,
    pub class: String,
    pub value: f64,
    pub pct: i64,
}

/// Signed full-minus-ablated difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocoRow {
    pub source: String,
    pub metric: String,
    pub class: String,
    pub delta: f64,
    pub delta_points: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub method: Method,
    pub fused_correct: bool,
    pub correct_sources: usize,
    pub frequency: f64,
    /// Size of the split the frequency is relative to.
    pub split_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaRow {
    pub id: String,
    /// Step `i` merges source `i + 1` into the fused prefix.
    pub step: usize,
    pub source: String,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BbaRow {
    pub id: String,
    pub source: String,
    pub frame: String,
    pub focal_mask: u32,
    pub focal_set: String,
    pub mass: f64,
}

/// Square table of mean pairwise conflicts.
#[derive(Debug, Clone, PartialEq)]
pub struct ConflictTable {
    pub sources: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl ConflictTable {
    pub fn write(&self, path: &Path) -> Result<(), PipelineError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
        let header = std::iter::once("source".to_string()).chain(self.sources.iter().cloned());
        w.write_record(header).map_err(|e| io_err(path, e))?;
        for (s, row) in self.sources.iter().zip(&self.values) {
            let rec = std::iter::once(s.clone()).chain(row.iter().map(f64::to_string));
            w.write_record(rec).map_err(|e| io_err(path, e))?;
        }
        w.flush().map_err(|e| io_err(path, e))
    }

    pub fn read(path: &Path) -> Result<Option<Self>, PipelineError> {
        if !path.exists() {
            return Ok(None);
        }
        let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
        let sources: Vec<String> = r
            .headers()
            .map_err(|e| io_err(path, e))?
            .iter()
            .skip(1)
            .map(String::from)
            .collect();
        let mut values = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| io_err(path, e))?;
            if rec.get(0) != sources.get(i).map(String::as_str) || rec.len() != sources.len() + 1 {
                return Err(io_err(
                    path,
                    format!("row {} does not match the header", i + 1),
                ));
            }
            let row = rec
                .iter()
                .skip(1)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|e| io_err(path, format!("row {}: {e}", i + 1)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            values.push(row);
        }
        if values.len() != sources.len() {
            return Err(io_err(path, "conflict table is not square"));
        }
        Ok(Some(ConflictTable { sources, values }))
    }
}

fn undefined_list(m: &MetricsBundle, class: usize) -> String {
    m.undefined
        .iter()
        .filter(|u| u.class == class)
        .map(|u| match u.quantity {
            Quantity::Recall => "recall",
            Quantity::Precision => "precision",
            Quantity::F1 => "f1",
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn metric_rows(name: &str, m: &MetricsBundle) -> Vec<MetricRow> {
    let row = |metric: &str, class: &str, value: f64| MetricRow {
        name: name.to_string(),
        metric: metric.into(),
        class: class.into(),
        value,
        pct: percent(value),
    };
    let mut rows = vec![
        row("oa", "", m.overall_accuracy),
        row("mf1", "", m.macro_f1),
    ];
    rows.extend(m.classes.iter().zip(&m.f1).map(|(c, &f)| row("f1", c, f)));
    rows
}

/// Everything the pipeline reports. Tables left empty are not written.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub runs: Vec<RunRow>,
    pub per_class: Vec<ClassRow>,
    pub ablation: Vec<MetricRow>,
    pub loco: Vec<LocoRow>,
    pub conflict: Option<ConflictTable>,
    pub balancing: Vec<MetricRow>,
    pub histogram: Vec<HistogramRow>,
    pub kappa: Vec<KappaRow>,
    pub bbas: Vec<BbaRow>,
}

impl Report {
    /// Replaces any earlier run of the same name.
    pub fn add_run(&mut self, run: &str, m: &MetricsBundle, n_test: usize) {
        self.runs.retain(|r| r.run != run);
        self.per_class.retain(|r| r.run != run);
        self.runs.push(RunRow {
            run: run.into(),
            n_test,
            overall_accuracy: m.overall_accuracy,
            macro_f1: m.macro_f1,
            oa_pct: percent(m.overall_accuracy),
            mf1_pct: percent(m.macro_f1),
        });
        for (k, class) in m.classes.iter().enumerate() {
            self.per_class.push(ClassRow {
                run: run.into(),
                class: class.clone(),
                recall: m.recall[k],
                precision: m.precision[k],
                f1: m.f1[k],
                recall_pct: percent(m.recall[k]),
                precision_pct: percent(m.precision[k]),
                f1_pct: percent(m.f1[k]),
                undefined: undefined_list(m, k),
            });
        }
    }

    pub fn set_ablation(&mut self, results: &[(String, MetricsBundle)]) {
        self.ablation = results
            .iter()
            .flat_map(|(s, m)| metric_rows(s, m))
            .collect();
    }

    pub fn set_loco(&mut self, deltas: &[LocoDelta]) {
        self.loco.clear();
        for d in deltas {
            let mut push = |metric: &str, class: &str, delta: f64| {
                self.loco.push(LocoRow {
                    source: d.source.clone(),
                    metric: metric.into(),
                    class: class.into(),
                    delta,
                    delta_points: percent(delta),
                })
            };
            push("oa", "", d.overall_accuracy);
            push("mf1", "", d.macro_f1);
            for (c, &f) in d.ablated.classes.iter().zip(&d.f1) {
                push("f1", c, f);
            }
        }
    }

    pub fn set_balancing(&mut self, outcomes: &[BalancingOutcome]) {
        self.balancing = outcomes
            .iter()
            .flat_map(|o| {
                let strategy = serde_json::to_value(o.strategy)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from));
                metric_rows(
                    &format!("{}/{}", o.method, strategy.unwrap_or_default()),
                    &o.metrics,
                )
            })
            .collect();
    }

    /// Replaces the rows of `method`.
    pub fn set_histogram(&mut self, method: Method, h: &SourceHistogram) {
        self.histogram.retain(|r| r.method != method);
        for (fused_correct, freqs, size) in [
            (true, &h.correct, h.n_correct),
            (false, &h.incorrect, h.n_incorrect),
        ] {
            for (k, &frequency) in freqs.iter().enumerate() {
                self.histogram.push(HistogramRow {
                    method,
                    fused_correct,
                    correct_sources: k,
                    frequency,
                    split_size: size,
                });
            }
        }
        self.histogram
            .sort_by_key(|r| (r.method != Method::Pre, !r.fused_correct, r.correct_sources));
    }

    /// Conflict matrix, κ per fusion step and every source's bba.
    pub fn set_evidence(&mut self, post: &PostRun) {
        let sources = post.sources();
        self.conflict = Some(ConflictTable {
            sources: sources.clone(),
            values: post.conflict.clone(),
        });
        self.kappa.clear();
        self.bbas.clear();
        for (p, fusion) in post.predictions.iter().zip(&post.fusions) {
            for (step, &kappa) in fusion.step_conflicts.iter().enumerate() {
                self.kappa.push(KappaRow {
                    id: p.id.clone(),
                    step,
                    source: sources[step + 1].clone(),
                    kappa,
                });
            }
        }
        for (p, row) in post.predictions.iter().zip(&post.bbas) {
            for (s, m) in sources.iter().zip(row) {
                self.bbas.extend(m.to_records().into_iter().map(|r| BbaRow {
                    id: p.id.clone(),
                    source: s.clone(),
                    frame: r.frame,
                    focal_mask: r.focal_mask,
                    focal_set: r.focal_set,
                    mass: r.mass,
                }));
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == Report::default()
    }

    pub fn write(&self, dir: &Path) -> Result<(), PipelineError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        fn put<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<(), PipelineError> {
            if rows.is_empty() {
                return Ok(());
            }
            write_csv(&dir.join(name), rows)
        }
        put(dir, RUNS, &self.runs)?;
        put(dir, PER_CLASS, &self.per_class)?;
        put(dir, ABLATION, &self.ablation)?;
        put(dir, LOCO, &self.loco)?;
        put(dir, BALANCING, &self.balancing)?;
        put(dir, HISTOGRAM, &self.histogram)?;
        put(dir, KAPPA, &self.kappa)?;
        put(dir, BBAS, &self.bbas)?;
        if let Some(c) = &self.conflict {
            c.write(&dir.join(CONFLICT))?;
        }
        let path = dir.join(SUMMARY);
        fs::write(&path, self.summary()).map_err(|e| io_err(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self, PipelineError> {
        Ok(Report {
            runs: read_csv(&dir.join(RUNS))?,
            per_class: read_csv(&dir.join(PER_CLASS))?,
            ablation: read_csv(&dir.join(ABLATION))?,
            loco: read_csv(&dir.join(LOCO))?,
            conflict: ConflictTable::read(&dir.join(CONFLICT))?,
            balancing: read_csv(&dir.join(BALANCING))?,
            histogram: read_csv(&dir.join(HISTOGRAM))?,
            kappa: read_csv(&dir.join(KAPPA))?,
            bbas: read_csv(&dir.join(BBAS))?,
        })
    }

    /// Markdown rendering with integer percentages.
    pub fn summary(&self) -> String {
        let mut s = String::from("# Run summary\n");
        if !self.runs.is_empty() {
            s.push_str("\n## Runs\n\n| run | test polygons | OA % | mF1 % |\n|---|---|---|---|\n");
            for r in &self.runs {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} |",
                    r.run, r.n_test, r.oa_pct, r.mf1_pct
                );
            }
            s.push_str("\n## Per class\n\n| run | class | recall % | precision % | F1 % |\n|---|---|---|---|---|\n");
            for r in &self.per_class {
                let flag = if r.undefined.is_empty() {
                    String::new()
                } else {
                    format!(" (undefined: {})", r.undefined)
                };
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {}{} |",
                    r.run, r.class, r.recall_pct, r.precision_pct, r.f1_pct, flag
                );
            }
        }
        let long = |s: &mut String, title: &str, rows: &[MetricRow], head: &str| {
            if rows.is_empty() {
                return;
            }
            let _ = writeln!(
                s,
                "\n## {title}\n\n| {head} | metric | class | % |\n|---|---|---|---|"
            );
            for r in rows {
                let _ = writeln!(s, "| {} | {} | {} | {} |", r.name, r.metric, r.class, r.pct);
            }
        };
        long(&mut s, "Single-source ablation", &self.ablation, "source");
        if !self.loco.is_empty() {
            s.push_str("\n## Leave one source out (full minus ablated, points)\n\n| source | metric | class | delta |\n|---|---|---|---|\n");
            for r in &self.loco {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} |",
                    r.source, r.metric, r.class, r.delta_points
                );
            }
        }
        long(
            &mut s,
            "Balancing comparison",
            &self.balancing,
            "method/strategy",
        );
        if let Some(c) = &self.conflict {
            let _ = writeln!(
                s,
                "\n## Mean pairwise conflict\n\n| | {} |",
                c.sources.join(" | ")
            );
            let _ = writeln!(s, "|---|{}", "---|".repeat(c.sources.len()));
            for (src, row) in c.sources.iter().zip(&c.values) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
                let _ = writeln!(s, "| {} | {} |", src, cells.join(" | "));
            }
        }
        if !self.histogram.is_empty() {
            s.push_str("\n## Correct single-source predictions\n\n| method | fused correct | sources correct | frequency |\n|---|---|---|---|\n");
            for r in &self.histogram {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {:.3} |",
                    r.method, r.fused_correct, r.correct_sources, r.frequency
                );
            }
        }
        s
    }
}

/// Prediction file: `id,truth,predicted,p_<class>...` with class names.
pub fn write_predictions(
    path: &Path,
    classes: &[String],
    predictions: &[Prediction],
) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let header = ["id", "truth", "predicted"]
        .map(String::from)
        .into_iter()
        .chain(classes.iter().map(|c| format!("p_{c}")));
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for p in predictions {
        let rec = [
            p.id.clone(),
            classes[p.truth].clone(),
            classes[p.predicted].clone(),
        ]
        .into_iter()
        .chain(p.scores.iter().map(f64::to_string));
        w.write_record(rec).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_predictions(path: &Path, classes: &[String]) -> Result<Vec<Prediction>, PipelineError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let class = |name: &str, line: usize| {
        classes
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| io_err(path, format!("line {line}: unknown class {name:?}")))
    };
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| io_err(path, e))?;
        if rec.len() != classes.len() + 3 {
            return Err(io_err(
                path,
                format!("line {line}: expected {} fields", classes.len() + 3),
            ));
        }
        let scores = rec
            .iter()
            .skip(3)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| io_err(path, format!("line {line}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        out.push(Prediction {
            id: rec[0].to_string(),
            truth: class(&rec[1], line)?,
            predicted: class(&rec[2], line)?,
            scores,
        });
    }
    Ok(out)
}

/// Encoded attribute matrix with a leading `id` column.
pub fn write_matrix(
    path: &Path,
    ids: &[String],
    x: &crate::data::Matrix,
) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(std::iter::once("id").chain(x.names.iter().map(String::as_str)))
        .map_err(|e| io_err(path, e))?;
    for (id, row) in ids.iter().zip(&x.rows) {
        let rec = std::iter::once(id.clone()).chain(row.iter().map(f64::to_string));
        w.write_record(rec).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Mass functions of `(id, source)` pairs, in file order.
pub fn bbas_from_rows(
    rows: &[BbaRow],
) -> Result<Vec<(String, String, MassFunction)>, PipelineError> {
    let mut out: Vec<(String, String, MassFunction)> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let key = (&rows[start].id, &rows[start].source);
        let end = rows[start..]
            .iter()
            .position(|r| (&r.id, &r.source) != key)
            .map_or(rows.len(), |p| start + p);
        let records: Vec<_> = rows[start..end]
            .iter()
            .map(|r| crate::evidence::FocalRecord {
                frame: r.frame.clone(),
                focal_mask: r.focal_mask,
                focal_set: r.focal_set.clone(),
                mass: r.mass,
            })
            .collect();
        let m = MassFunction::from_records(&records).map_err(super::stage("report"))?;
        out.push((key.0.clone(), key.1.clone(), m));
        start = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::ConfusionMatrix;

    #[test]
    fn tables_round_trip() {
        let classes: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let m = ConfusionMatrix::new(
            classes.clone(),
            vec![vec![3, 1, 0], vec![0, 2, 0], vec![1, 0, 0]],
        )
        .unwrap()
        .metrics()
        .unwrap();
        let mut r = Report::default();
        r.add_run("pre", &m, 7);
        r.set_ablation(&[("s1".into(), m.clone())]);
        r.set_histogram(
            Method::Post,
            &SourceHistogram {
                n_sources: 1,
                n_correct: 3,
                n_incorrect: 0,
                correct: vec![1.0 / 3.0, 2.0 / 3.0],
                incorrect: vec![0.0; 2],
            },
        );
        r.conflict = Some(ConflictTable {
            sources: vec!["x".into(), "y".into()],
            values: vec![vec![0.1, 0.7], vec![0.7, 0.2]],
        });
        let dir = tempfile::tempdir().unwrap();
        r.write(dir.path()).unwrap();
        assert_eq!(Report::read(dir.path()).unwrap(), r);
        assert!(r
            .per_class
            .iter()
            .any(|c| c.class == "c" && c.undefined.contains("precision")));
        let p = vec![Prediction {
            id: "p1".into(),
            truth: 2,
            predicted: 0,
            scores: vec![0.1, 0.2, 0.7],
        }];
        let path = dir.path().join("pred.csv");
        write_predictions(&path, &classes, &p).unwrap();
        assert_eq!(read_predictions(&path, &classes).unwrap(), p);
    }

    #[test]
    fn diagonal_run_reports_full_accuracy() {
        let m = ConfusionMatrix::new(vec!["a".into(), "b".into()], vec![vec![4, 0], vec![0, 5]])
            .unwrap()
            .metrics()
            .unwrap();
        let mut r = Report::default();
        r.add_run("x", &m, 9);
        assert_eq!(r.runs[0].oa_pct, 100);
        assert!(r.summary().contains("| x | 9 | 100 | 100 |"));
    }
}

//! Synthetic scenes with known ground truth: a jittered-grid partition of
//! labeled polygons, categorical evidence layers of configurable fidelity and
//! a raster band shifted over one class.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::{DataConfig, RunConfig};
use super::io::{export_bundle, DatasetBundle};
use super::PipelineError;
use crate::features::{Band, CategorizedPolygon, Grid, LayerPayload, SourceLayer};
use crate::geometry::{contains_point, Point, Polygon};
use crate::rng::substream;

/// What a source reports when it does not report the true label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvidenceMode {
    /// No object at all.
    Abstain,
    /// An object with a uniformly drawn category.
    Confuse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub name: String,
    /// Probability of reporting the true label.
    pub fidelity: f64,
    pub mode: EvidenceMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RasterSpec {
    /// Source the band's columns belong to.
    pub source: String,
    /// Class whose cells get the shifted mean.
    pub class: String,
    pub shift: f64,
    pub noise: f64,
    pub cell_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub n_polygons: usize,
    pub classes: Vec<String>,
    pub priors: Vec<f64>,
    /// Side of a grid cell before jitter, in meters.
    pub cell_size: f64,
    /// Vertex jitter as a fraction of the cell size; below 0.5 keeps cells simple.
    pub jitter: f64,
    pub sources: Vec<SourceSpec>,
    #[serde(default)]
    pub raster: Option<RasterSpec>,
}

impl SceneSpec {
    /// Three classes with the published class shares, three sources of
    /// decreasing fidelity, one pure-noise source and a band over the middle
    /// class.
    pub fn reference(n_polygons: usize) -> Self {
        let src = |name: &str, fidelity: f64, mode| SourceSpec {
            name: name.into(),
            fidelity,
            mode,
        };
        SceneSpec {
            n_polygons,
            classes: vec!["LU2".into(), "LU3".into(), "LU5".into()],
            priors: vec![0.006, 0.098, 0.896],
            cell_size: 20.0,
            jitter: 0.3,
            sources: vec![
                src("s1", 0.9, EvidenceMode::Abstain),
                src("s2", 0.7, EvidenceMode::Abstain),
                src("s3", 0.5, EvidenceMode::Abstain),
                src("noise", 0.0, EvidenceMode::Confuse),
            ],
            raster: Some(RasterSpec {
                source: "s3".into(),
                class: "LU3".into(),
                shift: 1.0,
                noise: 1.0,
                cell_size: 10.0,
            }),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Input {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text).map_err(|e| PipelineError::Input {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene serializes")
    }

    fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.n_polygons == 0 {
            return bad("scene needs at least one polygon".into());
        }
        if self.priors.len() != self.classes.len() || self.classes.len() < 2 {
            return bad("one prior per class, at least two classes".into());
        }
        let sum: f64 = self.priors.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.priors.iter().any(|&p| p < 0.0) {
            return bad(format!(
                "priors must be nonnegative and sum to 1, got {sum}"
            ));
        }
        if !(0.0..0.5).contains(&self.jitter) || self.cell_size <= 0.0 {
            return bad("jitter must be in [0, 0.5) and cell_size positive".into());
        }
        if let Some(s) = self
            .sources
            .iter()
            .find(|s| !(0.0..=1.0).contains(&s.fidelity))
        {
            return bad(format!("source {} has fidelity outside [0, 1]", s.name));
        }
        if let Some(r) = &self.raster {
            if !self.classes.contains(&r.class) || r.cell_size <= 0.0 {
                return bad("raster class must be in the frame and cell_size positive".into());
            }
        }
        Ok(())
    }
}

fn draw_class(rng: &mut impl Rng, priors: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, &p) in priors.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    priors.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Generates the scene deterministically from `seed`.
pub fn generate_synthetic_scene(
    spec: &SceneSpec,
    seed: u64,
) -> Result<DatasetBundle, PipelineError> {
    spec.validate()?;
    let n = spec.n_polygons;
    let nx = (n as f64).sqrt().ceil() as usize;
    let ny = n.div_ceil(nx);
    let c = spec.cell_size;

    let mut rng = substream(seed, "generator/vertices");
    let mut vertex = vec![Point::default(); (nx + 1) * (ny + 1)];
    for j in 0..=ny {
        for i in 0..=nx {
            let (mut x, mut y) = (i as f64 * c, j as f64 * c);
            if i > 0 && i < nx && j > 0 && j < ny {
                x += rng.gen_range(-spec.jitter..=spec.jitter) * c;
                y += rng.gen_range(-spec.jitter..=spec.jitter) * c;
            }
            vertex[j * (nx + 1) + i] = Point::new(x, y);
        }
    }
    let v = |i: usize, j: usize| vertex[j * (nx + 1) + i];
    let width = n.to_string().len();

    let mut rng = substream(seed, "generator/labels");
    let mut polygons = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for k in 0..n {
        let (i, j) = (k % nx, k / nx);
        let ring = vec![v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)];
        let label = draw_class(&mut rng, &spec.priors);
        let p = Polygon::new(format!("p{k:0width$}"), ring, Vec::new()).map_err(|e| {
            PipelineError::Stage {
                stage: "synth",
                message: e.to_string(),
            }
        })?;
        polygons.push(p.with_label(spec.classes[label].clone()));
        labels.push(label);
    }

    let mut layers = Vec::new();
    for s in &spec.sources {
        let mut rng = substream(seed, &format!("generator/source/{}", s.name));
        let mut objects = Vec::new();
        for (p, &label) in polygons.iter().zip(&labels) {
            let category = if rng.gen::<f64>() < s.fidelity {
                Some(label)
            } else {
                match s.mode {
                    EvidenceMode::Abstain => None,
                    EvidenceMode::Confuse => Some(rng.gen_range(0..spec.classes.len())),
                }
            };
            let Some(cat) = category else { continue };
            let centre = p.centroid();
            let ring = p
                .exterior()
                .iter()
                .map(|q| {
                    Point::new(
                        centre.x + 0.6 * (q.x - centre.x),
                        centre.y + 0.6 * (q.y - centre.y),
                    )
                })
                .collect();
            let geometry = Polygon::new(format!("{}-{}", s.name, p.id()), ring, Vec::new())
                .map_err(|e| PipelineError::Stage {
                    stage: "synth",
                    message: e.to_string(),
                })?;
            objects.push(CategorizedPolygon {
                geometry,
                category: spec.classes[cat].clone(),
            });
        }
        layers.push(SourceLayer::new(
            s.name.clone(),
            s.name.clone(),
            LayerPayload::PolygonCategorical {
                categories: spec.classes.clone(),
                objects,
            },
        ));
    }

    if let Some(r) = &spec.raster {
        let target = spec
            .classes
            .iter()
            .position(|k| *k == r.class)
            .expect("validated");
        let ncols = ((nx as f64 * c) / r.cell_size).ceil() as usize;
        let nrows = ((ny as f64 * c) / r.cell_size).ceil() as usize;
        let mut grid = Grid {
            ncols,
            nrows,
            xllcorner: 0.0,
            yllcorner: 0.0,
            cellsize: r.cell_size,
            nodata: Some(-9999.0),
            values: vec![-9999.0; ncols * nrows],
        };
        let normal =
            Normal::new(0.0, r.noise.max(0.0)).map_err(|e| PipelineError::Config(e.to_string()))?;
        let mut rng = substream(seed, "generator/raster");
        for row in 0..nrows {
            for col in 0..ncols {
                let pt = grid.cell_center(row, col);
                let (ci, cj) = ((pt.x / c) as isize, (pt.y / c) as isize);
                let owner = (cj - 1..=cj + 1)
                    .flat_map(|j| (ci - 1..=ci + 1).map(move |i| (i, j)))
                    .filter(|&(i, j)| i >= 0 && j >= 0 && (i as usize) < nx)
                    .map(|(i, j)| j as usize * nx + i as usize)
                    .filter(|&k| k < n)
                    .find(|&k| contains_point(&polygons[k], pt));
                let noise = normal.sample(&mut rng);
                if let Some(k) = owner {
                    let shift = if labels[k] == target { r.shift } else { 0.0 };
                    grid.values[row * ncols + col] = shift + noise;
                }
            }
        }
        let layer = SourceLayer::new(
            format!("{}_raster", r.source),
            r.source.clone(),
            LayerPayload::RasterGrid {
                bands: vec![Band {
                    name: "b1".into(),
                    grid,
                }],
            },
        );
        layers.push(layer);
    }

    Ok(DatasetBundle { polygons, layers })
}

/// Generates the scene into `dir` with `scene.toml` and a default
/// `config.toml` that runs on it. Returns the config path.
pub fn write_scene(dir: &Path, spec: &SceneSpec, seed: u64) -> Result<PathBuf, PipelineError> {
    let bundle = generate_synthetic_scene(spec, seed)?;
    let layers = export_bundle(dir, &bundle)?;
    let config = RunConfig {
        seed,
        out: PathBuf::from("out"),
        frame: spec.classes.clone(),
        data: DataConfig {
            polygons: PathBuf::from("polygons.geojson"),
            layers,
            geometry_source: None,
            neighbors: true,
        },
        split: Default::default(),
        balancing: Default::default(),
        pre: Default::default(),
        post: Default::default(),
        tolerance: Default::default(),
        base_dir: dir.to_path_buf(),
    };
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| PipelineError::Input {
            path,
            message: e.to_string(),
        })
    };
    write("scene.toml", spec.to_toml())?;
    write("config.toml", config.to_toml())?;
    Ok(dir.join("config.toml"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_is_planar_and_labeled() {
        // 8 x 7 cells, so the outer boundary is the unjittered rectangle
        let spec = SceneSpec::reference(56);
        let b = generate_synthetic_scene(&spec, 3).unwrap();
        assert_eq!(b.polygons.len(), 56);
        let total: f64 = b.polygons.iter().map(Polygon::area).sum();
        assert!((total - 56.0 * 400.0).abs() < 1e-6);
        assert!(b.polygons.iter().all(|p| p.label().is_some()));
        assert_eq!(b.layers.len(), 5);
        assert_eq!(generate_synthetic_scene(&spec, 3).unwrap(), b);
    }

    #[test]
    fn full_fidelity_source_reports_every_label() {
        let mut spec = SceneSpec::reference(30);
        spec.sources[0].fidelity = 1.0;
        let b = generate_synthetic_scene(&spec, 1).unwrap();
        let LayerPayload::PolygonCategorical { objects, .. } = &b.layers[0].payload else {
            panic!()
        };
        assert_eq!(objects.len(), 30);
        for (o, p) in objects.iter().zip(&b.polygons) {
            assert_eq!(Some(o.category.as_str()), p.label());
        }
    }

    #[test]
    fn priors_must_sum_to_one() {
        let mut spec = SceneSpec::reference(10);
        spec.priors = vec![0.5, 0.5, 0.5];
        assert!(generate_synthetic_scene(&spec, 0).is_err());
    }
}

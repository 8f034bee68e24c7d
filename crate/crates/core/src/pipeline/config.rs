use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::geometry::Tolerance;
use crate::learners::{Family, Grid, Hyperparameters, LearnerSpec, MaxDepth, MaxFeatures};
use crate::resampling::{BalancingPlan, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerKind {
    PolygonCategorical,
    PointCategorical,
    RasterGrid,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandFile {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub name: String,
    /// Manifest group of the layer's columns.
    pub source: String,
    pub kind: LayerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Closed category set; objects outside it are rejected. Defaults to the
    /// categories observed in the file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bands: Vec<BandFile>,
    /// For tables: CSV of `column,source` pairs overriding `source`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub polygons: PathBuf,
    #[serde(default)]
    pub layers: Vec<LayerConfig>,
    /// Source name of the shape descriptors; no descriptors when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry_source: Option<String>,
    /// Add perimeter-weighted neighbor columns.
    #[serde(default = "yes")]
    pub neighbors: bool,
}

fn default_fraction() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: default_fraction(),
            stratified: false,
        }
    }
}

fn default_k() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalancingConfig {
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<usize>>,
    #[serde(default = "default_k")]
    pub k_neighbors: usize,
}

fn default_strategy() -> Strategy {
    Strategy::SmoteNc
}

impl Default for BalancingConfig {
    fn default() -> Self {
        BalancingConfig {
            strategy: default_strategy(),
            target: None,
            k_neighbors: default_k(),
        }
    }
}

impl BalancingConfig {
    pub fn plan(&self, seed: u64) -> BalancingPlan {
        BalancingPlan {
            strategy: self.strategy,
            target: self.target.clone(),
            k_neighbors: self.k_neighbors,
            seed,
        }
    }
}

/// Hyperparameters left unset keep the family default.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_estimators: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_features: Option<MaxFeatures>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<MaxDepth>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_samples_leaf: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reg_lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_child_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_bins: Option<usize>,
}

impl ParamOverrides {
    pub fn apply(&self, mut p: Hyperparameters) -> Hyperparameters {
        macro_rules! set {
            ($($f:ident),*) => {$( if let Some(v) = self.$f { p.$f = v; } )*};
        }
        set!(
            n_estimators,
            max_features,
            max_depth,
            learning_rate,
            min_samples_leaf,
            bootstrap,
            reg_lambda,
            min_child_weight,
            max_bins
        );
        p
    }
}

fn default_folds() -> usize {
    5
}

fn default_family() -> Family {
    Family::GradientBoostedTrees
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    #[serde(default = "default_family")]
    pub family: Family,
    #[serde(default)]
    pub params: ParamOverrides,
    /// Run the grid search before the final fit.
    #[serde(default)]
    pub tune: bool,
    /// Tuning grid; the family's published grid when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            family: default_family(),
            params: ParamOverrides::default(),
            tune: false,
            grid: None,
            cv_folds: default_folds(),
        }
    }
}

impl LearnerConfig {
    pub fn spec(&self, seed: u64) -> LearnerSpec {
        LearnerSpec {
            family: self.family,
            params: self.params.apply(Hyperparameters::defaults(self.family)),
            grid: self
                .grid
                .clone()
                .unwrap_or_else(|| Grid::for_family(self.family)),
            cv_folds: self.cv_folds,
            seed,
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Everything a run needs. Loaded from TOML; relative paths resolve against
/// the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Class frame, in decision tie-break order.
    pub frame: Vec<String>,
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub balancing: BalancingConfig,
    /// All-source classifier.
    #[serde(default)]
    pub pre: LearnerConfig,
    /// Per-source one-vs-all classifiers.
    #[serde(default)]
    pub post: LearnerConfig,
    #[serde(default)]
    pub tolerance: Tolerance,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut c: RunConfig =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        c.base_dir = base_dir.to_path_buf();
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Input {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let f = self.split.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(PipelineError::Config(format!(
                "train_fraction {f} is outside (0, 1)"
            )));
        }
        if self.frame.len() < 2 {
            return Err(PipelineError::Config(
                "frame needs at least two classes".into(),
            ));
        }
        let mut seen = self.frame.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.frame.len() {
            return Err(PipelineError::Config("frame has duplicate classes".into()));
        }
        for l in [&self.pre, &self.post] {
            if l.cv_folds < 2 {
                return Err(PipelineError::Config("cv_folds must be at least 2".into()));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.out)
    }
}

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    RandomForest,
    GradientBoostedTrees,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::RandomForest => "random-forest",
            Family::GradientBoostedTrees => "gradient-boosted-trees",
        })
    }
}

/// Number of attributes drawn as split candidates at each node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FeaturesRepr", into = "FeaturesRepr")]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    All,
    /// Fraction of the attributes, e.g. `0.2`.
    Fraction(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FeaturesRepr {
    Name(String),
    Fraction(f64),
}

impl TryFrom<FeaturesRepr> for MaxFeatures {
    type Error = String;

    fn try_from(r: FeaturesRepr) -> Result<Self, String> {
        match r {
            FeaturesRepr::Name(n) => match n.as_str() {
                "sqrt" => Ok(MaxFeatures::Sqrt),
                "log2" => Ok(MaxFeatures::Log2),
                "all" => Ok(MaxFeatures::All),
                other => Err(format!("unknown max_features {other:?}")),
            },
            FeaturesRepr::Fraction(f) if f > 0.0 && f <= 1.0 => Ok(MaxFeatures::Fraction(f)),
            FeaturesRepr::Fraction(f) => {
                Err(format!("max_features fraction {f} is outside (0, 1]"))
            }
        }
    }
}

impl From<MaxFeatures> for FeaturesRepr {
    fn from(m: MaxFeatures) -> Self {
        match m {
            MaxFeatures::Sqrt => FeaturesRepr::Name("sqrt".into()),
            MaxFeatures::Log2 => FeaturesRepr::Name("log2".into()),
            MaxFeatures::All => FeaturesRepr::Name("all".into()),
            MaxFeatures::Fraction(f) => FeaturesRepr::Fraction(f),
        }
    }
}

impl MaxFeatures {
    /// Candidates per node for `n` attributes, at least 1.
    pub fn resolve(self, n: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (n as f64).sqrt() as usize,
            MaxFeatures::Log2 => (n as f64).log2() as usize,
            MaxFeatures::All => n,
            MaxFeatures::Fraction(f) => (f * n as f64) as usize,
        };
        k.clamp(1, n.max(1))
    }
}

/// Tree depth limit; `"none"` in config files means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DepthRepr", into = "DepthRepr")]
pub enum MaxDepth {
    Unbounded,
    Limited(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DepthRepr {
    Name(String),
    Depth(usize),
}

impl TryFrom<DepthRepr> for MaxDepth {
    type Error = String;

    fn try_from(r: DepthRepr) -> Result<Self, String> {
        match r {
            DepthRepr::Name(n) if n == "none" => Ok(MaxDepth::Unbounded),
            DepthRepr::Name(n) => Err(format!("unknown max_depth {n:?}")),
            DepthRepr::Depth(d) => Ok(MaxDepth::Limited(d)),
        }
    }
}

impl From<MaxDepth> for DepthRepr {
    fn from(d: MaxDepth) -> Self {
        match d {
            MaxDepth::Unbounded => DepthRepr::Name("none".into()),
            MaxDepth::Limited(d) => DepthRepr::Depth(d),
        }
    }
}

impl MaxDepth {
    pub fn allows(self, depth: usize) -> bool {
        match self {
            MaxDepth::Unbounded => true,
            MaxDepth::Limited(d) => depth < d,
        }
    }
}

/// Hyperparameters of both families. Fields a family does not use are kept
/// so one grid type serves both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparameters {
    pub n_estimators: usize,
    pub max_features: MaxFeatures,
    pub max_depth: MaxDepth,
    /// Shrinkage of boosted trees.
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    /// Bootstrap resampling of forest trees.
    pub bootstrap: bool,
    /// L2 penalty on boosted leaf weights.
    pub reg_lambda: f64,
    /// Minimum hessian sum per boosted child.
    pub min_child_weight: f64,
    /// Histogram bins per attribute.
    pub max_bins: usize,
}

impl Hyperparameters {
    pub fn defaults(family: Family) -> Self {
        match family {
            Family::RandomForest => Hyperparameters {
                n_estimators: 100,
                max_features: MaxFeatures::Sqrt,
                max_depth: MaxDepth::Unbounded,
                learning_rate: 0.1,
                min_samples_leaf: 1,
                bootstrap: true,
                reg_lambda: 1.0,
                min_child_weight: 1.0,
                max_bins: 256,
            },
            Family::GradientBoostedTrees => Hyperparameters {
                n_estimators: 100,
                max_features: MaxFeatures::All,
                max_depth: MaxDepth::Limited(6),
                learning_rate: 0.3,
                min_samples_leaf: 1,
                bootstrap: false,
                reg_lambda: 1.0,
                min_child_weight: 1.0,
                max_bins: 256,
            },
        }
    }
}

/// Candidate values per hyperparameter. An empty axis keeps the base value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default)]
    pub n_estimators: Vec<usize>,
    #[serde(default)]
    pub max_features: Vec<MaxFeatures>,
    #[serde(default)]
    pub max_depth: Vec<MaxDepth>,
    #[serde(default)]
    pub learning_rate: Vec<f64>,
}

impl Grid {
    /// The forest grid used for the published experiments.
    pub fn forest() -> Self {
        Grid {
            n_estimators: vec![50, 100, 150, 500, 1000],
            max_features: vec![
                MaxFeatures::Sqrt,
                MaxFeatures::Log2,
                MaxFeatures::Fraction(0.2),
            ],
            max_depth: [None, Some(2), Some(5), Some(10), Some(20), Some(50)]
                .into_iter()
                .map(|d| d.map_or(MaxDepth::Unbounded, MaxDepth::Limited))
                .collect(),
            learning_rate: Vec::new(),
        }
    }

    /// The boosting grid used for the published experiments.
    pub fn boosting() -> Self {
        Grid {
            n_estimators: vec![50, 100, 400, 700, 1000],
            max_features: Vec::new(),
            max_depth: Vec::new(),
            learning_rate: vec![0.5, 0.2, 0.1, 0.05, 0.02],
        }
    }

    pub fn for_family(family: Family) -> Self {
        match family {
            Family::RandomForest => Grid::forest(),
            Family::GradientBoostedTrees => Grid::boosting(),
        }
    }

    /// All combinations, `n_estimators` varying slowest and `learning_rate`
    /// fastest.
    pub fn candidates(&self, base: &Hyperparameters) -> Vec<Hyperparameters> {
        fn axis<T: Clone>(v: &[T], default: T) -> Vec<T> {
            if v.is_empty() {
                vec![default]
            } else {
                v.to_vec()
            }
        }
        let mut out = Vec::new();
        for n in axis(&self.n_estimators, base.n_estimators) {
            for f in axis(&self.max_features, base.max_features) {
                for d in axis(&self.max_depth, base.max_depth) {
                    for lr in axis(&self.learning_rate, base.learning_rate) {
                        out.push(Hyperparameters {
                            n_estimators: n,
                            max_features: f,
                            max_depth: d,
                            learning_rate: lr,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

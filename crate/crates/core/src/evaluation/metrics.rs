use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("confusion matrix is empty")]
    Empty,
    #[error("confusion matrix must be square with one row per class")]
    Shape,
    #[error("class index {0} is outside the class list")]
    UnknownClass(usize),
    #[error("truth and prediction lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// `counts[i][j]`: ground-truth class `i` predicted as class `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self, MetricsError> {
        if counts.len() != classes.len() || counts.iter().any(|r| r.len() != classes.len()) {
            return Err(MetricsError::Shape);
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn from_predictions(
        classes: &[String],
        truth: &[usize],
        predicted: &[usize],
    ) -> Result<Self, MetricsError> {
        if truth.len() != predicted.len() {
            return Err(MetricsError::LengthMismatch(truth.len(), predicted.len()));
        }
        let c = classes.len();
        let mut counts = vec![vec![0u64; c]; c];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= c {
                return Err(MetricsError::UnknownClass(t));
            }
            if p >= c {
                return Err(MetricsError::UnknownClass(p));
            }
            counts[t][p] += 1;
        }
        Ok(ConfusionMatrix {
            classes: classes.to_vec(),
            counts,
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Recall, precision, F1 per class plus overall accuracy and macro F1.
    pub fn metrics(&self) -> Result<MetricsBundle, MetricsError> {
        let c = self.classes.len();
        let total = self.total();
        if c == 0 || total == 0 {
            return Err(MetricsError::Empty);
        }
        let mut bundle = MetricsBundle {
            classes: self.classes.clone(),
            recall: vec![0.0; c],
            precision: vec![0.0; c],
            f1: vec![0.0; c],
            overall_accuracy: self.trace() as f64 / total as f64,
            macro_f1: 0.0,
            undefined: Vec::new(),
        };
        for i in 0..c {
            let row: u64 = self.counts[i].iter().sum();
            let col: u64 = (0..c).map(|j| self.counts[j][i]).sum();
            let hit = self.counts[i][i] as f64;
            if row == 0 {
                bundle.undefined.push(Undefined {
                    class: i,
                    quantity: Quantity::Recall,
                });
            } else {
                bundle.recall[i] = hit / row as f64;
            }
            if col == 0 {
                bundle.undefined.push(Undefined {
                    class: i,
                    quantity: Quantity::Precision,
                });
            } else {
                bundle.precision[i] = hit / col as f64;
            }
            let (r, p) = (bundle.recall[i], bundle.precision[i]);
            if r + p > 0.0 {
                bundle.f1[i] = 2.0 * r * p / (r + p);
            } else {
                bundle.undefined.push(Undefined {
                    class: i,
                    quantity: Quantity::F1,
                });
            }
        }
        bundle.macro_f1 = bundle.f1.iter().sum::<f64>() / c as f64;
        Ok(bundle)
    }
}

/// Which ratio had a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    Recall,
    Precision,
    F1,
}

/// A ratio with a zero denominator, reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Undefined {
    pub class: usize,
    pub quantity: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBundle {
    pub classes: Vec<String>,
    pub recall: Vec<f64>,
    pub precision: Vec<f64>,
    pub f1: Vec<f64>,
    pub overall_accuracy: f64,
    /// Unweighted mean of the per-class F1 scores.
    pub macro_f1: f64,
    /// Ratios whose denominator was zero; their value is reported as 0.
    pub undefined: Vec<Undefined>,
}

impl MetricsBundle {
    pub fn class_index(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }
}

/// Integer percentage, rounded half up.
pub fn percent(x: f64) -> i64 {
    (100.0 * x + 0.5).floor() as i64
}

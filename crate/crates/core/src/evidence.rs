//! Belief functions over a finite frame of discernment.
//!
//! Subsets of the frame are encoded as bitmasks over the frame order: bit `i`
//! stands for the `i`-th hypothesis. A [`MassFunction`] stores one mass per
//! subset, indexed by its mask, and never puts mass on the empty set (closed
//! world). The number of subsets doubles with every hypothesis, so frames are
//! capped at [`MAX_FRAME`] hypotheses.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported frame size.
pub const MAX_FRAME: usize = 16;

/// Tolerance used to validate that masses sum to one.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Normalizers `1 - κ` at or below this are treated as total conflict.
pub const TOTAL_CONFLICT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvidenceError {
    #[error("frame needs at least 2 hypotheses, got {0}")]
    FrameTooSmall(usize),
    #[error("frame supports at most {MAX_FRAME} hypotheses, got {0}")]
    FrameTooLarge(usize),
    #[error("duplicate hypothesis {0:?} in frame")]
    DuplicateHypothesis(String),
    #[error("unknown hypothesis {0:?}")]
    UnknownHypothesis(String),
    #[error("probability for {hypothesis} is {value}, expected a value in [0, 1]")]
    ProbabilityOutOfRange { hypothesis: String, value: f64 },
    #[error("expected {expected} probabilities, got {got}")]
    WrongArity { expected: usize, got: usize },
    #[error("invalid mass function: {0}")]
    InvalidMass(String),
    #[error("mass functions are defined on different frames")]
    FrameMismatch,
    #[error("total conflict between sources {first} and {second}")]
    TotalConflict { first: usize, second: usize },
    #[error("no mass functions to combine")]
    Empty,
}

/// Ordered, exhaustive and mutually exclusive hypotheses.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Frame {
    hypotheses: Arc<[String]>,
}

impl Frame {
    pub fn new<S: Into<String>>(
        hypotheses: impl IntoIterator<Item = S>,
    ) -> Result<Self, EvidenceError> {
        let hypotheses: Vec<String> = hypotheses.into_iter().map(Into::into).collect();
        if hypotheses.len() < 2 {
            return Err(EvidenceError::FrameTooSmall(hypotheses.len()));
        }
        if hypotheses.len() > MAX_FRAME {
            return Err(EvidenceError::FrameTooLarge(hypotheses.len()));
        }
        for (i, h) in hypotheses.iter().enumerate() {
            if hypotheses[..i].contains(h) {
                return Err(EvidenceError::DuplicateHypothesis(h.clone()));
            }
        }
        Ok(Frame {
            hypotheses: hypotheses.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn hypotheses(&self) -> &[String] {
        &self.hypotheses
    }

    pub fn index_of(&self, h: &str) -> Option<usize> {
        self.hypotheses.iter().position(|x| x == h)
    }

    /// Mask of the whole frame.
    pub fn full_mask(&self) -> u32 {
        (1u32 << self.len()) - 1
    }

    /// Number of subsets including the empty set.
    pub fn powerset_size(&self) -> usize {
        1usize << self.len()
    }

    /// Mask of a set of hypotheses given by name.
    pub fn mask_of<S: AsRef<str>>(&self, names: &[S]) -> Result<u32, EvidenceError> {
        names.iter().try_fold(0u32, |m, n| {
            let i = self
                .index_of(n.as_ref())
                .ok_or_else(|| EvidenceError::UnknownHypothesis(n.as_ref().to_string()))?;
            Ok(m | (1 << i))
        })
    }

    /// Human-readable set notation, e.g. `{LU2,LU5}`.
    pub fn describe(&self, mask: u32) -> String {
        let names: Vec<&str> = (0..self.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| self.hypotheses[i].as_str())
            .collect();
        format!("{{{}}}", names.join(","))
    }
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.hypotheses.iter()).finish()
    }
}

impl TryFrom<Vec<String>> for Frame {
    type Error = EvidenceError;
    fn try_from(v: Vec<String>) -> Result<Self, Self::Error> {
        Frame::new(v)
    }
}

impl From<Frame> for Vec<String> {
    fn from(f: Frame) -> Self {
        f.hypotheses.to_vec()
    }
}

/// Basic belief assignment over the subsets of a frame.
#[derive(Clone, PartialEq)]
pub struct MassFunction {
    frame: Frame,
    masses: Vec<f64>,
}

impl fmt::Debug for MassFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (mask, v) in self.focal_sets() {
            m.entry(&self.frame.describe(mask), &v);
        }
        m.finish()
    }
}

impl MassFunction {
    /// All mass on the whole frame: total ignorance.
    pub fn vacuous(frame: &Frame) -> Self {
        let mut masses = vec![0.0; frame.powerset_size()];
        masses[frame.full_mask() as usize] = 1.0;
        MassFunction {
            frame: frame.clone(),
            masses,
        }
    }

    /// All mass on the singleton of hypothesis `index`.
    pub fn certain(frame: &Frame, index: usize) -> Self {
        let mut masses = vec![0.0; frame.powerset_size()];
        masses[1 << index] = 1.0;
        MassFunction {
            frame: frame.clone(),
            masses,
        }
    }

    /// Builds a mass function from `(mask, mass)` pairs. Repeated masks add up.
    pub fn from_focal(frame: &Frame, focal: &[(u32, f64)]) -> Result<Self, EvidenceError> {
        let mut masses = vec![0.0; frame.powerset_size()];
        for &(mask, v) in focal {
            if mask == 0 {
                return Err(EvidenceError::InvalidMass("mass on the empty set".into()));
            }
            if mask > frame.full_mask() {
                return Err(EvidenceError::InvalidMass(format!(
                    "mask {mask:#b} outside the frame"
                )));
            }
            masses[mask as usize] += v;
        }
        Self::from_masses(frame, masses)
    }

    /// Builds a mass function from a dense vector indexed by mask.
    pub fn from_masses(frame: &Frame, masses: Vec<f64>) -> Result<Self, EvidenceError> {
        if masses.len() != frame.powerset_size() {
            return Err(EvidenceError::InvalidMass(format!(
                "expected {} entries, got {}",
                frame.powerset_size(),
                masses.len()
            )));
        }
        if masses[0] != 0.0 {
            return Err(EvidenceError::InvalidMass("mass on the empty set".into()));
        }
        if let Some(v) = masses.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(EvidenceError::InvalidMass(format!(
                "negative or non-finite mass {v}"
            )));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(EvidenceError::InvalidMass(format!("masses sum to {total}")));
        }
        Ok(MassFunction {
            frame: frame.clone(),
            masses,
        })
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    /// Mass of the subset `mask`.
    pub fn mass(&self, mask: u32) -> f64 {
        self.masses.get(mask as usize).copied().unwrap_or(0.0)
    }

    /// Dense masses indexed by subset mask (entry 0 is the empty set).
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Subsets with nonzero mass, in mask order.
    pub fn focal_sets(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.masses
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(m, v)| (m as u32, *v))
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }
}

/// Turns per-hypothesis one-vs-all probabilities into a mass function.
///
/// Each hypothesis `H` contributes `P_H / |Θ|` to `{H}` and `(1 - P_H) / |Θ|`
/// to its complement `Θ \ {H}`, so the masses sum to one by construction.
pub fn bba_from_probs(frame: &Frame, probs: &[f64]) -> Result<MassFunction, EvidenceError> {
    let n = frame.len();
    if probs.len() != n {
        return Err(EvidenceError::WrongArity {
            expected: n,
            got: probs.len(),
        });
    }
    let share = 1.0 / n as f64;
    let full = frame.full_mask();
    let mut masses = vec![0.0; frame.powerset_size()];
    for (i, &p) in probs.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(EvidenceError::ProbabilityOutOfRange {
                hypothesis: frame.hypotheses()[i].clone(),
                value: p,
            });
        }
        masses[1usize << i] += p * share;
        masses[(full ^ (1u32 << i)) as usize] += (1.0 - p) * share;
    }
    Ok(MassFunction {
        frame: frame.clone(),
        masses,
    })
}

/// Sum of `m1(X)·m2(Y)` over all pairs with `X ∩ Y = A`, for every `A`.
///
/// Pairs are visited as unordered index pairs and each pair's two products are
/// added in a fixed order, so swapping the arguments gives the same bits.
fn conjunctive(m1: &MassFunction, m2: &MassFunction) -> Vec<f64> {
    let n = m1.masses.len();
    let mut acc = vec![0.0; n];
    let (a, b) = (&m1.masses, &m2.masses);
    for i in 1..n {
        if a[i] == 0.0 && b[i] == 0.0 {
            continue;
        }
        acc[i] += a[i] * b[i];
        for j in i + 1..n {
            let t = a[i] * b[j] + a[j] * b[i];
            if t != 0.0 {
                acc[i & j] += t;
            }
        }
    }
    acc
}

/// Conflict `κ = Σ_{X∩Y=∅} m1(X)·m2(Y)`.
pub fn conflict(m1: &MassFunction, m2: &MassFunction) -> Result<f64, EvidenceError> {
    if m1.frame != m2.frame {
        return Err(EvidenceError::FrameMismatch);
    }
    Ok(conjunctive(m1, m2)[0])
}

/// Dempster's rule: conjunctive combination renormalized by `1 - κ`.
///
/// Returns the combined mass function together with the conflict `κ`. Total
/// conflict is an error.
pub fn combine_dempster(
    m1: &MassFunction,
    m2: &MassFunction,
) -> Result<(MassFunction, f64), EvidenceError> {
    if m1.frame != m2.frame {
        return Err(EvidenceError::FrameMismatch);
    }
    let mut acc = conjunctive(m1, m2);
    let kappa = acc[0];
    let norm = 1.0 - kappa;
    if norm <= TOTAL_CONFLICT {
        return Err(EvidenceError::TotalConflict {
            first: 0,
            second: 1,
        });
    }
    acc[0] = 0.0;
    for v in acc.iter_mut().skip(1) {
        *v /= norm;
    }
    Ok((
        MassFunction {
            frame: m1.frame.clone(),
            masses: acc,
        },
        kappa,
    ))
}

/// Result of fusing a list of sources.
#[derive(Debug, Clone, PartialEq)]
pub struct Fusion {
    pub mass: MassFunction,
    /// Conflict of each combination step; step `i` merges source `i + 1`.
    pub step_conflicts: Vec<f64>,
}

/// Left fold of [`combine_dempster`] over `masses`.
///
/// On total conflict the error names the first source whose evidence cannot
/// be reconciled with the fused prefix, as `(first, second)` source indices.
pub fn combine_all(masses: &[MassFunction]) -> Result<Fusion, EvidenceError> {
    let (first, rest) = masses.split_first().ok_or(EvidenceError::Empty)?;
    let mut acc = first.clone();
    let mut step_conflicts = Vec::with_capacity(rest.len());
    for (k, m) in rest.iter().enumerate() {
        let (next, kappa) = combine_dempster(&acc, m).map_err(|e| match e {
            EvidenceError::TotalConflict { .. } => {
                let source = k + 1;
                // find an earlier source in direct total conflict, else blame the prefix
                let culprit = (0..source)
                    .find(|&s| conflict(&masses[s], m).is_ok_and(|c| 1.0 - c <= TOTAL_CONFLICT))
                    .unwrap_or(0);
                EvidenceError::TotalConflict {
                    first: culprit,
                    second: source,
                }
            }
            other => other,
        })?;
        acc = next;
        step_conflicts.push(kappa);
    }
    Ok(Fusion {
        mass: acc,
        step_conflicts,
    })
}

/// Pignistic probabilities: each focal set's mass split evenly over its members.
pub fn pignistic(m: &MassFunction) -> Vec<f64> {
    let n = m.frame.len();
    let mut betp = vec![0.0; n];
    for (mask, v) in m.focal_sets() {
        let share = v / mask.count_ones() as f64;
        for (h, p) in betp.iter_mut().enumerate() {
            if mask & (1 << h) != 0 {
                *p += share;
            }
        }
    }
    betp
}

/// A decision on one singleton hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    /// Index of the chosen hypothesis in the frame.
    pub hypothesis: usize,
    /// Pignistic probability of the chosen hypothesis.
    pub probability: f64,
    /// Another hypothesis reached the same probability; the first in frame order won.
    pub tie: bool,
}

/// Absolute tolerance under which two pignistic probabilities count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Highest pignistic probability, ties broken by frame order.
pub fn decide(m: &MassFunction) -> Decision {
    decide_probabilities(&pignistic(m))
}

pub(crate) fn decide_probabilities(p: &[f64]) -> Decision {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] + TIE_TOLERANCE {
            best = i;
        }
    }
    let tie = p
        .iter()
        .enumerate()
        .any(|(i, &v)| i != best && (v - p[best]).abs() <= TIE_TOLERANCE);
    Decision {
        hypothesis: best,
        probability: p[best],
        tie,
    }
}

/// Mean pairwise conflict between sources.
///
/// `bbas[p][s]` is the mass function of source `s` for polygon `p`. Entry
/// `(s, t)` of the result is the mean over polygons of `κ(m_s, m_t)`; the
/// diagonal is each source's conflict with itself.
pub fn pairwise_conflict(bbas: &[Vec<MassFunction>]) -> Result<Vec<Vec<f64>>, EvidenceError> {
    let sources = bbas.first().map_or(0, Vec::len);
    let mut sum = vec![vec![0.0; sources]; sources];
    for row in bbas {
        if row.len() != sources {
            return Err(EvidenceError::WrongArity {
                expected: sources,
                got: row.len(),
            });
        }
        for s in 0..sources {
            for t in s..sources {
                sum[s][t] += conflict(&row[s], &row[t])?;
            }
        }
    }
    let count = bbas.len().max(1) as f64;
    for s in 0..sources {
        for t in s..sources {
            let v = sum[s][t] / count;
            sum[s][t] = v;
            sum[t][s] = v;
        }
    }
    Ok(sum)
}

/// One row of the portable `(frame, focal set, mass)` serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocalRecord {
    pub frame: String,
    pub focal_mask: u32,
    pub focal_set: String,
    pub mass: f64,
}

impl MassFunction {
    /// Flattens to one record per focal set; the frame is written as `A|B|C`.
    pub fn to_records(&self) -> Vec<FocalRecord> {
        let frame = self.frame.hypotheses().join("|");
        self.focal_sets()
            .map(|(mask, mass)| FocalRecord {
                frame: frame.clone(),
                focal_mask: mask,
                focal_set: self.frame.describe(mask),
                mass,
            })
            .collect()
    }

    pub fn from_records(records: &[FocalRecord]) -> Result<Self, EvidenceError> {
        let first = records.first().ok_or(EvidenceError::Empty)?;
        let frame = Frame::new(first.frame.split('|'))?;
        if records.iter().any(|r| r.frame != first.frame) {
            return Err(EvidenceError::FrameMismatch);
        }
        let focal: Vec<(u32, f64)> = records.iter().map(|r| (r.focal_mask, r.mass)).collect();
        MassFunction::from_focal(&frame, &focal)
    }
}

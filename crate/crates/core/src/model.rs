//! Shared domain types: samples, columns, models, dual weights and the
//! scoring/prediction contract for feature-vector tasks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tasks::multiclass::{gamma_flat, gamma_tree, Taxonomy};
use crate::weak::{WeakConfig, WeakLearner};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum StructuredLabel {
    /// 1-based class index.
    Class(usize),
    OrdinalRank(f64),
    /// One 0/1 entry per node.
    GridLabeling(Vec<u8>),
}

impl StructuredLabel {
    pub fn as_class(&self) -> Option<usize> {
        match self {
            StructuredLabel::Class(c) => Some(*c),
            _ => None,
        }
    }

    pub fn as_rank(&self) -> Option<f64> {
        match self {
            StructuredLabel::OrdinalRank(r) => Some(*r),
            StructuredLabel::Class(c) => Some(*c as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: usize,
    pub features: Vec<f64>,
    pub label: StructuredLabel,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub dim: usize,
}

impl Dataset {
    /// Validates constant dimension and unique ids.
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let dim = samples.first().map_or(0, |s| s.features.len());
        let mut seen = std::collections::HashSet::new();
        for s in &samples {
            if s.features.len() != dim {
                return invalid(format!(
                    "sample {} has {} features, expected {dim}",
                    s.id,
                    s.features.len()
                ));
            }
            if !seen.insert(s.id) {
                return invalid(format!("duplicate sample id {}", s.id));
            }
        }
        Ok(Dataset { samples, dim })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<StructuredLabel>) -> Result<Self> {
        if rows.len() != labels.len() {
            return invalid("row/label count mismatch");
        }
        let samples = rows
            .into_iter()
            .zip(labels)
            .enumerate()
            .map(|(id, (features, label))| Sample { id, features, label })
            .collect();
        Self::new(samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.features.clone()).collect()
    }

    /// Class labels, failing if any sample carries a non-integral label.
    pub fn class_labels(&self) -> Result<Vec<usize>> {
        self.samples
            .iter()
            .map(|s| match s.label {
                StructuredLabel::Class(c) => Ok(c),
                StructuredLabel::OrdinalRank(r) if r.fract() == 0.0 && r >= 1.0 => Ok(r as usize),
                _ => invalid(format!("sample {} has no class label", s.id)),
            })
            .collect()
    }

    pub fn ranks(&self) -> Result<Vec<f64>> {
        self.samples
            .iter()
            .map(|s| {
                s.label
                    .as_rank()
                    .ok_or_else(|| Error::InvalidInput(format!("sample {} has no rank", s.id)))
            })
            .collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
            dim: self.dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Unary,
    Pairwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakColumn {
    pub learner: WeakLearner,
    /// 1-based label-coding slot for multi-class and taxonomy tasks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_slot: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub part: Option<Part>,
}

impl WeakColumn {
    pub fn plain(learner: WeakLearner) -> Self {
        WeakColumn {
            learner,
            class_slot: None,
            part: None,
        }
    }

    pub fn slot(learner: WeakLearner, slot: usize) -> Self {
        WeakColumn {
            learner,
            class_slot: Some(slot),
            part: None,
        }
    }

    pub fn part(learner: WeakLearner, part: Part) -> Self {
        WeakColumn {
            learner,
            class_slot: None,
            part: Some(part),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskDescriptor {
    Binary,
    Multiclass { classes: usize },
    Tree { taxonomy: Taxonomy },
    Ranking,
    Crf,
}

impl TaskDescriptor {
    pub fn name(&self) -> &'static str {
        match self {
            TaskDescriptor::Binary => "binary",
            TaskDescriptor::Multiclass { .. } => "multiclass",
            TaskDescriptor::Tree { .. } => "tree",
            TaskDescriptor::Ranking => "ranking",
            TaskDescriptor::Crf => "crf",
        }
    }

    /// Number of candidate classes for class-valued tasks.
    pub fn classes(&self) -> Option<usize> {
        match self {
            TaskDescriptor::Binary => Some(2),
            TaskDescriptor::Multiclass { classes } => Some(*classes),
            TaskDescriptor::Tree { taxonomy } => Some(taxonomy.num_classes()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    OneSlack,
    MSlack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub c: f64,
    pub max_iters: usize,
    pub eps_cg: f64,
    pub eps_cp: f64,
    pub seed: u64,
    pub solver: SolverKind,
    pub weak: WeakConfig,
    /// Loosen the cutting-plane tolerance while the column-generation gap is large.
    pub adaptive_eps: bool,
    pub max_cp_rounds: usize,
    pub mslack_cap: usize,
    /// Evaluate the convergence diagnostics every iteration.
    pub track_diagnostics: bool,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            c: 10.0,
            max_iters: 200,
            eps_cg: 1e-5,
            eps_cp: 0.01,
            seed: 0,
            solver: SolverKind::OneSlack,
            weak: WeakConfig::default(),
            adaptive_eps: true,
            max_cp_rounds: 1000,
            mslack_cap: 1_000_000,
            track_diagnostics: false,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return invalid(format!("C must be positive, got {}", self.c));
        }
        if self.max_iters == 0 {
            return invalid("max_iters must be positive");
        }
        if !(self.eps_cg > 0.0) || !(self.eps_cp > 0.0) {
            return invalid("eps_cg and eps_cp must be strictly positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongModel {
    pub task: TaskDescriptor,
    pub columns: Vec<WeakColumn>,
    pub weights: Vec<f64>,
    pub metadata: TrainParams,
}

impl StrongModel {
    pub fn empty(task: TaskDescriptor, metadata: TrainParams) -> Self {
        StrongModel {
            task,
            columns: Vec::new(),
            weights: Vec::new(),
            metadata,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.len() != self.weights.len() {
            return invalid(format!(
                "{} columns but {} weights",
                self.columns.len(),
                self.weights.len()
            ));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return invalid("model weights must be finite and nonnegative");
        }
        for col in &self.columns {
            let slotted = matches!(
                self.task,
                TaskDescriptor::Multiclass { .. } | TaskDescriptor::Tree { .. }
            );
            if col.class_slot.is_some() != slotted {
                return invalid("class slot present iff task is multi-class or taxonomy");
            }
            if col.part.is_some() != matches!(self.task, TaskDescriptor::Crf) {
                return invalid("column part present iff task is crf");
            }
        }
        Ok(())
    }
}

fn check_dim(col: &WeakColumn, x: &[f64]) -> Result<()> {
    if x.len() < col.learner.min_dim() {
        return invalid(format!(
            "sample has {} features, learner needs {}",
            x.len(),
            col.learner.min_dim()
        ));
    }
    Ok(())
}

/// `psi_col(x, y)` for feature-vector tasks.
pub fn column_value(task: &TaskDescriptor, col: &WeakColumn, x: &[f64], y: &StructuredLabel) -> Result<f64> {
    check_dim(col, x)?;
    let phi = col.learner.eval(x);
    match task {
        TaskDescriptor::Binary => {
            let c = y
                .as_class()
                .ok_or_else(|| Error::InvalidInput("binary label must be a class".into()))?;
            let sign = match c {
                1 => -1.0,
                2 => 1.0,
                _ => return invalid(format!("binary class {c} out of range")),
            };
            Ok(0.5 * sign * phi)
        }
        TaskDescriptor::Multiclass { classes } => {
            let c = y
                .as_class()
                .ok_or_else(|| Error::InvalidInput("expected a class label".into()))?;
            let slot = col
                .class_slot
                .ok_or_else(|| Error::InvalidInput("column lacks a slot".into()))?;
            Ok(phi * f64::from(gamma_flat(c, *classes)?[slot - 1]))
        }
        TaskDescriptor::Tree { taxonomy } => {
            let c = y
                .as_class()
                .ok_or_else(|| Error::InvalidInput("expected a class label".into()))?;
            let slot = col
                .class_slot
                .ok_or_else(|| Error::InvalidInput("column lacks a slot".into()))?;
            Ok(phi * f64::from(gamma_tree(c, taxonomy)?[slot - 1]))
        }
        TaskDescriptor::Ranking => Ok(phi),
        TaskDescriptor::Crf => invalid("crf models score segmentation instances, not vectors"),
    }
}

/// `F(x, y; w) = sum_j w_j psi_j(x, y)`.
pub fn score(model: &StrongModel, x: &[f64], y: &StructuredLabel) -> Result<f64> {
    let mut acc = 0.0;
    for (col, w) in model.columns.iter().zip(&model.weights) {
        acc += w * column_value(&model.task, col, x, y)?;
    }
    Ok(acc)
}

/// Argmax of the score over the label set; ties go to the lowest class.
/// Ranking models return their score as an ordinal rank.
pub fn predict(model: &StrongModel, x: &[f64]) -> Result<StructuredLabel> {
    if let TaskDescriptor::Ranking = model.task {
        return Ok(StructuredLabel::OrdinalRank(score(
            model,
            x,
            &StructuredLabel::OrdinalRank(0.0),
        )?));
    }
    let k = model
        .task
        .classes()
        .ok_or_else(|| Error::InvalidInput(format!("{} models need instance inference", model.task.name())))?;
    let mut best = (1, f64::NEG_INFINITY);
    for c in 1..=k {
        let s = score(model, x, &StructuredLabel::Class(c))?;
        if s > best.1 {
            best = (c, s);
        }
    }
    Ok(StructuredLabel::Class(best.0))
}

/// Sparse nonnegative dual weights keyed by (example, label). Zero entries
/// are never stored; iteration order is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct DualWeights<L: Ord> {
    entries: BTreeMap<(usize, L), f64>,
}

impl<L: Ord> Default for DualWeights<L> {
    fn default() -> Self {
        DualWeights {
            entries: BTreeMap::new(),
        }
    }
}

impl<L: Ord + Clone> DualWeights<L> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, i: usize, y: L, v: f64) {
        if v == 0.0 {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.entries.entry((i, y)) {
            Entry::Vacant(e) => {
                e.insert(v);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += v;
                if *e.get() == 0.0 {
                    e.remove();
                }
            }
        }
    }

    pub fn set(&mut self, i: usize, y: L, v: f64) {
        if v == 0.0 {
            self.entries.remove(&(i, y));
        } else {
            self.entries.insert((i, y), v);
        }
    }

    pub fn get(&self, i: usize, y: &L) -> f64 {
        self.entries.get(&(i, y.clone())).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &L, f64)> {
        self.entries.iter().map(|((i, y), v)| (*i, y, *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Per-example mass `sum_y mu_(i,y)` for `m` examples.
    pub fn example_mass(&self, m: usize) -> Vec<f64> {
        let mut mass = vec![0.0; m];
        for ((i, _), v) in &self.entries {
            mass[*i] += v;
        }
        mass
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weak::{OutputRange, Stump};

    fn stump(feature: usize, threshold: f64, polarity: i8) -> WeakLearner {
        WeakLearner::Stump(Stump {
            feature,
            threshold,
            polarity,
            output_range: OutputRange::PmOne,
        })
    }

    fn multiclass(k: usize, cols: Vec<WeakColumn>, w: Vec<f64>) -> StrongModel {
        StrongModel {
            task: TaskDescriptor::Multiclass { classes: k },
            columns: cols,
            weights: w,
            metadata: TrainParams::default(),
        }
    }

    #[test]
    fn empty_model_scores_zero() {
        let m = multiclass(3, vec![], vec![]);
        assert_eq!(score(&m, &[1.0, 2.0], &StructuredLabel::Class(2)).unwrap(), 0.0);
    }

    #[test]
    fn single_column_score() {
        let m = multiclass(3, vec![WeakColumn::slot(stump(0, 0.0, 1), 2)], vec![2.5]);
        assert_eq!(score(&m, &[1.0], &StructuredLabel::Class(2)).unwrap(), 2.5);
        assert_eq!(score(&m, &[1.0], &StructuredLabel::Class(1)).unwrap(), 0.0);
    }

    #[test]
    fn three_stumps_by_hand() {
        let cols = vec![
            WeakColumn::plain(stump(0, 0.5, 1)),
            WeakColumn::plain(stump(1, -1.0, -1)),
            WeakColumn::plain(stump(1, 2.0, 1)),
        ];
        let m = StrongModel {
            task: TaskDescriptor::Ranking,
            columns: cols,
            weights: vec![0.5, 1.25, 2.0],
            metadata: TrainParams::default(),
        };
        // x = (1.0, 0.0): +1, -1, -1
        let s = score(&m, &[1.0, 0.0], &StructuredLabel::OrdinalRank(0.0)).unwrap();
        assert_eq!(s, 0.5 - 1.25 - 2.0);
    }

    #[test]
    fn predict_ties_go_to_lowest_class() {
        // scores (0, 0.9, 0.9): classes 2 and 3 tie
        let cols = vec![
            WeakColumn::slot(stump(0, f64::NEG_INFINITY, 1), 2),
            WeakColumn::slot(stump(0, f64::NEG_INFINITY, 1), 3),
        ];
        let m = multiclass(3, cols, vec![0.9, 0.9]);
        assert_eq!(predict(&m, &[0.0]).unwrap(), StructuredLabel::Class(2));
    }

    #[test]
    fn dimension_mismatch_is_invalid() {
        let m = multiclass(2, vec![WeakColumn::slot(stump(4, 0.0, 1), 1)], vec![1.0]);
        assert!(matches!(
            score(&m, &[1.0], &StructuredLabel::Class(1)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn dual_weights_drop_zeros() {
        let mut mu = DualWeights::new();
        mu.add(0, 2usize, 0.5);
        mu.add(0, 2usize, -0.5);
        mu.add(1, 1usize, 0.0);
        assert!(mu.is_empty());
        mu.set(3, 1, 0.25);
        mu.set(1, 2, 0.5);
        let keys: Vec<_> = mu.iter().map(|(i, y, _)| (i, *y)).collect();
        assert_eq!(keys, vec![(1, 2), (3, 1)]);
        assert_eq!(mu.example_mass(4), vec![0.0, 0.5, 0.0, 0.25]);
    }
}

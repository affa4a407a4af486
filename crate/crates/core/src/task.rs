//! The contract between the training drivers and a structured task.

use std::fmt::Debug;
use std::hash::Hash;

use rayon::prelude::*;

use crate::error::Result;
use crate::model::{DualWeights, WeakColumn};
use crate::weak::WeakConfig;

/// Columns produced by one weak-learner subproblem.
#[derive(Debug, Clone)]
pub struct ColumnBatch {
    pub columns: Vec<WeakColumn>,
    /// Edge `sum mu * delta_psi` of each column.
    pub edges: Vec<f64>,
    /// Index into `columns` of the column that solved the subproblem.
    pub selected: usize,
}

impl ColumnBatch {
    pub fn best_edge(&self) -> f64 {
        self.edges[self.selected]
    }
}

/// A structured prediction problem over a fixed training set.
///
/// Everything the masters need reduces to per-example losses, column values
/// and a loss-augmented inference oracle.
pub trait StructuredTask: Sync {
    type Label: Clone + Eq + Hash + Ord + Debug + Send + Sync;

    fn num_examples(&self) -> usize;

    fn truth(&self, i: usize) -> Self::Label;

    /// `Delta(y_i, y)`, zero at the truth.
    fn loss(&self, i: usize, y: &Self::Label) -> f64;

    /// `psi_col(x_i, y)`.
    fn column_value(&self, col: &WeakColumn, i: usize, y: &Self::Label) -> f64;

    /// `psi_col(x_i, y_i) - psi_col(x_i, y)`.
    fn delta_psi(&self, col: &WeakColumn, i: usize, y: &Self::Label) -> f64 {
        self.column_value(col, i, &self.truth(i)) - self.column_value(col, i, y)
    }

    /// Maximizer over the full label set (truth included) of
    /// `Delta(y_i, y) - w . delta_psi_i(y)`, with the maximal value.
    /// Ties resolve to the smallest label.
    fn loss_augmented(&self, i: usize, columns: &[WeakColumn], weights: &[f64]) -> Result<(Self::Label, f64)>;

    /// [`Self::loss_augmented`] for every example, in example order.
    fn loss_augmented_all(&self, columns: &[WeakColumn], weights: &[f64]) -> Result<Vec<(Self::Label, f64)>> {
        (0..self.num_examples())
            .into_par_iter()
            .map(|i| self.loss_augmented(i, columns, weights))
            .collect()
    }

    /// Deterministic starting label, different from the truth when possible.
    fn initial_label(&self, i: usize) -> Self::Label;

    /// Every label other than the truth, when the label set is small enough
    /// to enumerate; `None` disables the m-slack master.
    fn alternatives(&self, i: usize) -> Option<Vec<Self::Label>>;

    /// Solve the weak-learner subproblem for the current dual weights.
    /// `Ok(None)` when no learner has a usable edge (all weights zero).
    fn generate_columns(&self, mu: &DualWeights<Self::Label>, weak: &WeakConfig) -> Result<Option<ColumnBatch>>;
}

/// `sum_{i,y} mu_(i,y) delta_psi_i(y)` for one candidate column.
pub fn weak_edge<T: StructuredTask>(task: &T, mu: &DualWeights<T::Label>, col: &WeakColumn) -> f64 {
    mu.iter().map(|(i, y, v)| v * task.delta_psi(col, i, y)).sum()
}

/// `sum_j w_j delta_psi_j(i, y)`.
pub fn margin<T: StructuredTask>(task: &T, columns: &[WeakColumn], weights: &[f64], i: usize, y: &T::Label) -> f64 {
    columns
        .iter()
        .zip(weights)
        .map(|(c, w)| w * task.delta_psi(c, i, y))
        .sum()
}

/// Primal objective `sum w + (C/m) sum_i max_y [Delta - w . delta_psi]`
/// with the max over the full label set (so each term is at least zero).
pub fn objective<T: StructuredTask>(task: &T, columns: &[WeakColumn], weights: &[f64], c: f64) -> Result<f64> {
    let m = task.num_examples() as f64;
    let viol = task.loss_augmented_all(columns, weights)?;
    let hinge: f64 = viol.iter().map(|(_, v)| v.max(0.0)).sum();
    Ok(weights.iter().sum::<f64>() + c / m * hinge)
}

/// Lower bound on the objective decrease obtained by adding `new_col` with
/// weight `alpha` to the model `(columns, weights)`.
pub fn decrease_lower_bound<T: StructuredTask>(
    task: &T,
    columns: &[WeakColumn],
    weights: &[f64],
    new_col: &WeakColumn,
    alpha: f64,
    c: f64,
) -> Result<f64> {
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let mut cols = columns.to_vec();
    cols.push(new_col.clone());
    let mut w = weights.to_vec();
    w.push(alpha);
    let star = task.loss_augmented_all(&cols, &w)?;
    let m = task.num_examples() as f64;
    let sum: f64 = star
        .iter()
        .enumerate()
        .map(|(i, (y, _))| task.delta_psi(new_col, i, y))
        .sum();
    Ok(-alpha + alpha * c / m * sum)
}

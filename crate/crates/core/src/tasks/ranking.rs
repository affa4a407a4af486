//! Pairwise ranking / AUC maximization. Each ordered pair `(a, b)` with
//! `label_a > label_b` is one example; its only alternative label is the
//! reversed order, with unit loss.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{DualWeights, WeakColumn};
use crate::task::{ColumnBatch, StructuredTask};
use crate::weak::{train_perceptron, train_stump, OutputRange, WeakConfig, WeakKind, WeakLearner};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PairOrder {
    Ordered,
    Reversed,
}

/// All 0-based pairs `(i, j)` with `labels[i] > labels[j]`, `i` ascending then `j`.
pub fn build_pairs(labels: &[f64]) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    for (i, a) in labels.iter().enumerate() {
        for (j, b) in labels.iter().enumerate() {
            if a > b {
                pairs.push((i, j));
            }
        }
    }
    if pairs.is_empty() {
        return invalid("ranking needs at least two distinct label values");
    }
    Ok(pairs)
}

/// Fraction of positive/negative pairs ordered correctly, ties counting half.
pub fn auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return invalid("score/label length mismatch");
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let npos = positive.iter().filter(|&&p| p).count();
    let nneg = positive.len() - npos;
    if npos == 0 || nneg == 0 {
        return invalid("AUC needs both classes");
    }
    // sweep groups of tied scores, counting negatives below each positive
    let mut correct = 0.0;
    let mut neg_below = 0usize;
    let mut k = 0;
    while k < idx.len() {
        let s = scores[idx[k]];
        let (mut p, mut n) = (0usize, 0usize);
        while k < idx.len() && scores[idx[k]] == s {
            if positive[idx[k]] {
                p += 1;
            } else {
                n += 1;
            }
            k += 1;
        }
        correct += p as f64 * (neg_below as f64 + 0.5 * n as f64);
        neg_below += n;
    }
    Ok(correct / (npos as f64 * nneg as f64))
}

#[derive(Debug, Clone)]
pub struct RankingTask {
    rows: Vec<Vec<f64>>,
    pairs: Vec<(usize, usize)>,
}

impl RankingTask {
    pub fn new(rows: Vec<Vec<f64>>, labels: &[f64]) -> Result<Self> {
        if rows.len() != labels.len() {
            return invalid("row/label count mismatch");
        }
        let pairs = build_pairs(labels)?;
        Ok(RankingTask { rows, pairs })
    }

    pub fn with_pairs(rows: Vec<Vec<f64>>, pairs: Vec<(usize, usize)>) -> Result<Self> {
        if pairs.is_empty() {
            return invalid("empty pair set");
        }
        if pairs.iter().any(|&(a, b)| a == b || a >= rows.len() || b >= rows.len()) {
            return invalid("pair references an invalid sample");
        }
        Ok(RankingTask { rows, pairs })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Per-sample model scores `sum_j w_j phi_j(x)`.
    pub fn sample_scores(&self, columns: &[WeakColumn], weights: &[f64]) -> Vec<f64> {
        self.rows
            .par_iter()
            .map(|x| columns.iter().zip(weights).map(|(c, w)| w * c.learner.eval(x)).sum())
            .collect()
    }

    /// Per-column `phi(x_a) - phi(x_b)` for one pair.
    pub fn delta_psi_vector(&self, columns: &[WeakColumn], pair: usize) -> Vec<f64> {
        let (a, b) = self.pairs[pair];
        columns
            .iter()
            .map(|c| c.learner.eval(&self.rows[a]) - c.learner.eval(&self.rows[b]))
            .collect()
    }

    /// `e_i = sum over pairs led by i of mu - sum over pairs trailed by i of mu`.
    pub fn signed_weights(&self, mu: &DualWeights<PairOrder>) -> Vec<f64> {
        let mut e = vec![0.0; self.rows.len()];
        for (p, y, v) in mu.iter() {
            if *y == PairOrder::Reversed {
                let (a, b) = self.pairs[p];
                e[a] += v;
                e[b] -= v;
            }
        }
        e
    }

    /// Indicator of pairs whose unit margin is not met.
    pub fn most_violated_pairs(&self, columns: &[WeakColumn], weights: &[f64]) -> Vec<bool> {
        let s = self.sample_scores(columns, weights);
        self.pairs.iter().map(|&(a, b)| 1.0 - (s[a] - s[b]) > 0.0).collect()
    }
}

impl StructuredTask for RankingTask {
    type Label = PairOrder;

    fn num_examples(&self) -> usize {
        self.pairs.len()
    }

    fn truth(&self, _i: usize) -> PairOrder {
        PairOrder::Ordered
    }

    fn loss(&self, _i: usize, y: &PairOrder) -> f64 {
        match y {
            PairOrder::Ordered => 0.0,
            PairOrder::Reversed => 1.0,
        }
    }

    fn column_value(&self, col: &WeakColumn, i: usize, y: &PairOrder) -> f64 {
        let (a, b) = self.pairs[i];
        let half = 0.5 * (col.learner.eval(&self.rows[a]) - col.learner.eval(&self.rows[b]));
        match y {
            PairOrder::Ordered => half,
            PairOrder::Reversed => -half,
        }
    }

    fn delta_psi(&self, col: &WeakColumn, i: usize, y: &PairOrder) -> f64 {
        match y {
            PairOrder::Ordered => 0.0,
            PairOrder::Reversed => {
                let (a, b) = self.pairs[i];
                col.learner.eval(&self.rows[a]) - col.learner.eval(&self.rows[b])
            }
        }
    }

    fn loss_augmented(&self, i: usize, columns: &[WeakColumn], weights: &[f64]) -> Result<(PairOrder, f64)> {
        let (a, b) = self.pairs[i];
        let score = |x: &[f64]| -> f64 { columns.iter().zip(weights).map(|(c, w)| w * c.learner.eval(x)).sum() };
        Ok(decide(1.0 - (score(&self.rows[a]) - score(&self.rows[b]))))
    }

    fn loss_augmented_all(&self, columns: &[WeakColumn], weights: &[f64]) -> Result<Vec<(PairOrder, f64)>> {
        let s = self.sample_scores(columns, weights);
        Ok(self.pairs.iter().map(|&(a, b)| decide(1.0 - (s[a] - s[b]))).collect())
    }

    fn initial_label(&self, _i: usize) -> PairOrder {
        PairOrder::Reversed
    }

    fn alternatives(&self, _i: usize) -> Option<Vec<PairOrder>> {
        Some(vec![PairOrder::Reversed])
    }

    fn generate_columns(&self, mu: &DualWeights<PairOrder>, weak: &WeakConfig) -> Result<Option<ColumnBatch>> {
        let e = self.signed_weights(mu);
        if e.iter().all(|&v| v == 0.0) {
            return Ok(None);
        }
        let (learner, edge) = match weak.kind {
            WeakKind::Stump => {
                let (s, edge) = train_stump(&self.rows, &e, OutputRange::PmOne)?;
                (WeakLearner::Stump(s), edge)
            }
            WeakKind::Perceptron => train_perceptron(&self.rows, &e, None, weak)?,
        };
        Ok(Some(ColumnBatch {
            columns: vec![WeakColumn::plain(learner)],
            edges: vec![edge],
            selected: 0,
        }))
    }
}

/// Ordered sorts first, so it wins a zero-violation tie.
fn decide(violation: f64) -> (PairOrder, f64) {
    if violation > 0.0 {
        (PairOrder::Reversed, violation)
    } else {
        (PairOrder::Ordered, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::weak_edge;
    use crate::weak::Stump;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pairs() {
        assert_eq!(build_pairs(&[1.0, 0.0]).unwrap(), vec![(0, 1)]);
        assert!(build_pairs(&[1.0, 1.0]).is_err());
        assert_eq!(build_pairs(&[2.0, 1.0, 0.0]).unwrap(), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn auc_edge_cases() {
        let lab = [true, true, false, false];
        assert_eq!(auc(&[3.0, 4.0, 1.0, 2.0], &lab).unwrap(), 1.0);
        assert_eq!(auc(&[1.0, 2.0, 3.0, 4.0], &lab).unwrap(), 0.0);
        assert_eq!(auc(&[1.0; 4], &lab).unwrap(), 0.5);
        assert!(auc(&[1.0, 2.0], &[true, true]).is_err());
    }

    #[test]
    fn auc_matches_pair_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let scores: Vec<f64> = (0..40).map(|_| rng.random_range(0.0..1.0)).collect();
        let pos: Vec<bool> = (0..40).map(|i| i % 3 == 0).collect();
        let mut ok = 0;
        let mut total = 0;
        for i in 0..40 {
            for j in 0..40 {
                if pos[i] && !pos[j] {
                    total += 1;
                    if scores[i] > scores[j] {
                        ok += 1;
                    }
                }
            }
        }
        assert!((auc(&scores, &pos).unwrap() - ok as f64 / total as f64).abs() < 1e-15);
    }

    fn stump(f: usize, t: f64) -> WeakColumn {
        WeakColumn::plain(WeakLearner::Stump(Stump {
            feature: f,
            threshold: t,
            polarity: 1,
            output_range: OutputRange::PmOne,
        }))
    }

    #[test]
    fn delta_psi_per_pair() {
        let task = RankingTask::new(vec![vec![1.0], vec![1.0], vec![-1.0]], &[2.0, 1.0, 0.0]).unwrap();
        let cols = vec![stump(0, 0.0)];
        assert_eq!(task.delta_psi_vector(&cols, 0), vec![0.0]);
        assert_eq!(task.delta_psi_vector(&cols, 1), vec![2.0]);
    }

    #[test]
    fn signed_weights_examples() {
        let task = RankingTask::new(vec![vec![0.0]; 3], &[1.0, 0.0, 0.0]).unwrap();
        let mut mu = DualWeights::new();
        mu.set(0, PairOrder::Reversed, 0.3);
        assert_eq!(task.signed_weights(&mu), vec![0.3, -0.3, 0.0]);
    }

    #[test]
    fn edges_match_pair_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..15).map(|_| vec![rng.random_range(0.0..1.0)]).collect();
        let labels: Vec<f64> = (0..15).map(|i| (i % 3) as f64).collect();
        let task = RankingTask::new(rows, &labels).unwrap();
        let mut mu = DualWeights::new();
        for p in 0..task.pairs().len() {
            mu.set(p, PairOrder::Reversed, rng.random_range(0.0..0.1));
        }
        let e = task.signed_weights(&mu);
        assert!(e.iter().sum::<f64>().abs() < 1e-12);
        let col = stump(0, 0.4);
        let via_e: f64 = task.rows().iter().zip(&e).map(|(x, w)| w * col.learner.eval(x)).sum();
        assert!((via_e - weak_edge(&task, &mu, &col)).abs() < 1e-12);
    }

    #[test]
    fn violated_pairs() {
        let task = RankingTask::new(vec![vec![1.0], vec![-1.0]], &[1.0, 0.0]).unwrap();
        let cols = vec![stump(0, 0.0)];
        assert_eq!(task.most_violated_pairs(&cols, &[0.0]), vec![true]);
        assert_eq!(task.most_violated_pairs(&cols, &[0.5]), vec![false]);
        assert_eq!(task.most_violated_pairs(&cols, &[0.4]), vec![true]);
    }
}

//! Binary segmentation CRFs over super-pixel graphs. Unary weak learners
//! score per-label potential vectors; pairwise learners are {0,1} stumps on
//! edge potentials, charged only when the two labels disagree. With
//! nonnegative weights every learned energy is submodular.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graphcut::{minimize, BinaryEnergy};
use crate::model::{DualWeights, Part, StrongModel, TaskDescriptor, WeakColumn};
use crate::task::{ColumnBatch, StructuredTask};
use crate::weak::{train_stump, OutputRange, WeakConfig, WeakKind, WeakLearner};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegInstance {
    pub node_count: usize,
    pub edges: Vec<(usize, usize)>,
    /// `unary_feats[p][l]`: potential vector of node `p` under label `l`.
    pub unary_feats: Vec<[Vec<f64>; 2]>,
    pub pair_feats: Vec<Vec<f64>>,
    pub truth: Vec<u8>,
}

impl SegInstance {
    pub fn validate(&self) -> Result<()> {
        let n = self.node_count;
        if self.unary_feats.len() != n || self.truth.len() != n {
            return invalid("unary features and truth need one entry per node");
        }
        if self.pair_feats.len() != self.edges.len() {
            return invalid("pairwise features need one entry per edge");
        }
        if self.truth.iter().any(|&l| l > 1) {
            return invalid("labels must be 0 or 1");
        }
        let mut seen = std::collections::HashSet::new();
        for &(p, q) in &self.edges {
            if p >= q || q >= n {
                return invalid(format!("edge ({p}, {q}) must satisfy p < q < {n}"));
            }
            if !seen.insert((p, q)) {
                return invalid(format!("duplicate edge ({p}, {q})"));
            }
        }
        if self.pair_feats.iter().flatten().any(|v| !(*v >= 0.0)) {
            return invalid("pairwise features must be nonnegative");
        }
        let ud = self.unary_feats.first().map_or(0, |u| u[0].len());
        if self.unary_feats.iter().any(|u| u[0].len() != ud || u[1].len() != ud) {
            return invalid("unary vectors must share one dimension");
        }
        Ok(())
    }

    pub fn unary_dim(&self) -> usize {
        self.unary_feats.first().map_or(0, |u| u[0].len())
    }

    pub fn pair_dim(&self) -> usize {
        self.pair_feats.first().map_or(0, Vec::len)
    }
}

pub fn hamming(a: &[u8], b: &[u8]) -> Result<usize> {
    if a.len() != b.len() {
        return invalid(format!("labelings of length {} and {}", a.len(), b.len()));
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

fn part_of(col: &WeakColumn) -> Part {
    col.part.unwrap_or(Part::Unary)
}

/// Per-node unary costs and per-edge disagreement costs of a model.
pub fn model_energy(inst: &SegInstance, columns: &[WeakColumn], weights: &[f64]) -> BinaryEnergy {
    let n = inst.node_count;
    let mut u = [vec![0.0; n], vec![0.0; n]];
    let mut theta = vec![0.0; inst.edges.len()];
    for (col, &w) in columns.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        match part_of(col) {
            Part::Unary => {
                for p in 0..n {
                    for l in 0..2 {
                        u[l][p] += w * col.learner.eval(&inst.unary_feats[p][l]);
                    }
                }
            }
            Part::Pairwise => {
                for (k, v) in inst.pair_feats.iter().enumerate() {
                    theta[k] += w * col.learner.eval(v);
                }
            }
        }
    }
    let [unary0, unary1] = u;
    BinaryEnergy {
        unary0,
        unary1,
        edges: inst.edges.clone(),
        theta01: theta.clone(),
        theta10: theta,
    }
}

pub fn energy(inst: &SegInstance, y: &[u8], columns: &[WeakColumn], weights: &[f64]) -> f64 {
    model_energy(inst, columns, weights).evaluate(y)
}

/// Pairwise columns must be {0,1}-valued with nonnegative weight.
pub fn submodularity_check(columns: &[WeakColumn], weights: &[f64]) -> bool {
    columns
        .iter()
        .zip(weights)
        .all(|(c, &w)| part_of(c) == Part::Unary || (c.learner.output_range() == OutputRange::ZeroOne && w >= 0.0))
}

fn ensure_submodular(columns: &[WeakColumn], weights: &[f64]) -> Result<()> {
    if submodularity_check(columns, weights) {
        Ok(())
    } else {
        Err(Error::Submodularity(
            "pairwise columns need {0,1} outputs and nonnegative weights".into(),
        ))
    }
}

/// Minimum-energy labeling.
pub fn predict_labels(inst: &SegInstance, columns: &[WeakColumn], weights: &[f64]) -> Result<Vec<u8>> {
    ensure_submodular(columns, weights)?;
    Ok(minimize(&model_energy(inst, columns, weights))?.0)
}

pub fn predict_model(inst: &SegInstance, model: &StrongModel) -> Result<Vec<u8>> {
    if model.task != TaskDescriptor::Crf {
        return invalid("not a crf model");
    }
    predict_labels(inst, &model.columns, &model.weights)
}

/// Minimizer of `E(y) - Hamming(truth, y)` with that objective's value.
pub fn loss_augmented_infer(inst: &SegInstance, columns: &[WeakColumn], weights: &[f64]) -> Result<(Vec<u8>, f64)> {
    ensure_submodular(columns, weights)?;
    let mut e = model_energy(inst, columns, weights);
    for (p, &t) in inst.truth.iter().enumerate() {
        if t == 0 {
            e.unary1[p] -= 1.0;
        } else {
            e.unary0[p] -= 1.0;
        }
    }
    minimize(&e)
}

/// Grid with a random foreground rectangle. Unary vectors are
/// truth-correlated scores plus Gaussian noise; pairwise vectors hold a
/// colour-similarity term and a constant boundary term.
pub fn synth_instance(width: usize, height: usize, noise: f64, seed: u64) -> Result<SegInstance> {
    if width == 0 || height == 0 {
        return invalid("grid dimensions must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = |rng: &mut ChaCha8Rng, len: usize| -> (usize, usize) {
        let lo = rng.random_range(0..len.div_ceil(2));
        let size = rng.random_range(1..=(len - lo).max(1));
        (lo, lo + size)
    };
    let (x0, x1) = span(&mut rng, width);
    let (y0, y1) = span(&mut rng, height);
    let n = width * height;
    let truth: Vec<u8> = (0..n)
        .map(|p| {
            let (r, c) = (p / width, p % width);
            u8::from(r >= y0 && r < y1 && c >= x0 && c < x1)
        })
        .collect();
    const STRENGTH: [f64; 3] = [1.0, 0.7, 0.4];
    let gauss = |rng: &mut ChaCha8Rng| -> f64 { noise * rng.sample::<f64, _>(StandardNormal) };
    let unary_feats = truth
        .iter()
        .map(|&t| {
            let sign = if t == 1 { 1.0 } else { -1.0 };
            let l1: Vec<f64> = STRENGTH.iter().map(|a| -sign * a + gauss(&mut rng)).collect();
            let l0: Vec<f64> = STRENGTH.iter().map(|a| sign * a + gauss(&mut rng)).collect();
            [l0, l1]
        })
        .collect();
    let colour: Vec<f64> = truth.iter().map(|&t| f64::from(t) + 0.25 * gauss(&mut rng)).collect();
    let mut edges = Vec::new();
    for p in 0..n {
        let (r, c) = (p / width, p % width);
        if c + 1 < width {
            edges.push((p, p + 1));
        }
        if r + 1 < height {
            edges.push((p, p + width));
        }
    }
    let pair_feats = edges
        .iter()
        .map(|&(p, q)| vec![(-(colour[p] - colour[q]).abs()).exp(), 1.0])
        .collect();
    let inst = SegInstance {
        node_count: n,
        edges,
        unary_feats,
        pair_feats,
        truth,
    };
    inst.validate()?;
    Ok(inst)
}

/// Structured task over a set of segmentation instances.
#[derive(Debug, Clone)]
pub struct CrfTask {
    instances: Vec<SegInstance>,
    use_pairwise: bool,
}

impl CrfTask {
    pub fn new(instances: Vec<SegInstance>) -> Result<Self> {
        for inst in &instances {
            inst.validate()?;
        }
        Ok(CrfTask {
            instances,
            use_pairwise: true,
        })
    }

    /// Same task with the pairwise part disabled (unary-only baseline).
    pub fn unary_only(mut self) -> Self {
        self.use_pairwise = false;
        self
    }

    pub fn instances(&self) -> &[SegInstance] {
        &self.instances
    }

    /// Signed weights of the unary rows `(instance, node, label)` and the
    /// pairwise rows `(instance, edge)`.
    pub fn signed_weights(&self, mu: &DualWeights<Vec<u8>>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut unary: Vec<Vec<f64>> = self.instances.iter().map(|s| vec![0.0; 2 * s.node_count]).collect();
        let mut pair: Vec<Vec<f64>> = self.instances.iter().map(|s| vec![0.0; s.edges.len()]).collect();
        for (i, y, v) in mu.iter() {
            let inst = &self.instances[i];
            for p in 0..inst.node_count {
                if y[p] != inst.truth[p] {
                    unary[i][2 * p + usize::from(y[p])] += v;
                    unary[i][2 * p + usize::from(inst.truth[p])] -= v;
                }
            }
            for (k, &(p, q)) in inst.edges.iter().enumerate() {
                let dy = f64::from(u8::from(y[p] != y[q]));
                let dt = f64::from(u8::from(inst.truth[p] != inst.truth[q]));
                if dy != dt {
                    pair[i][k] += v * (dy - dt);
                }
            }
        }
        (unary, pair)
    }
}

impl StructuredTask for CrfTask {
    type Label = Vec<u8>;

    fn num_examples(&self) -> usize {
        self.instances.len()
    }

    fn truth(&self, i: usize) -> Vec<u8> {
        self.instances[i].truth.clone()
    }

    fn loss(&self, i: usize, y: &Vec<u8>) -> f64 {
        hamming(&self.instances[i].truth, y).map_or(f64::INFINITY, |h| h as f64)
    }

    fn column_value(&self, col: &WeakColumn, i: usize, y: &Vec<u8>) -> f64 {
        let inst = &self.instances[i];
        match part_of(col) {
            Part::Unary => -(0..inst.node_count)
                .map(|p| col.learner.eval(&inst.unary_feats[p][usize::from(y[p])]))
                .sum::<f64>(),
            Part::Pairwise => -inst
                .edges
                .iter()
                .zip(&inst.pair_feats)
                .filter(|((p, q), _)| y[*p] != y[*q])
                .map(|(_, v)| col.learner.eval(v))
                .sum::<f64>(),
        }
    }

    fn loss_augmented(&self, i: usize, columns: &[WeakColumn], weights: &[f64]) -> Result<(Vec<u8>, f64)> {
        let inst = &self.instances[i];
        let (y, aug) = loss_augmented_infer(inst, columns, weights)?;
        let e_truth = energy(inst, &inst.truth, columns, weights);
        // Hamming(y) - E(y) + E(truth)
        Ok((y, e_truth - aug))
    }

    fn initial_label(&self, i: usize) -> Vec<u8> {
        let t = &self.instances[i].truth;
        if t.iter().all(|&l| l == 0) {
            vec![1; t.len()]
        } else {
            vec![0; t.len()]
        }
    }

    fn alternatives(&self, _i: usize) -> Option<Vec<Vec<u8>>> {
        None
    }

    fn generate_columns(&self, mu: &DualWeights<Vec<u8>>, weak: &WeakConfig) -> Result<Option<ColumnBatch>> {
        if weak.kind != WeakKind::Stump {
            return invalid("crf training uses stumps only");
        }
        let (uw, pw) = self.signed_weights(mu);
        let mut unary_rows = Vec::new();
        let mut unary_d = Vec::new();
        for (inst, w) in self.instances.iter().zip(&uw) {
            for p in 0..inst.node_count {
                for l in 0..2 {
                    unary_rows.push(inst.unary_feats[p][l].clone());
                    unary_d.push(w[2 * p + l]);
                }
            }
        }
        let mut pair_rows = Vec::new();
        let mut pair_d = Vec::new();
        if self.use_pairwise {
            for (inst, w) in self.instances.iter().zip(&pw) {
                pair_rows.extend(inst.pair_feats.iter().cloned());
                pair_d.extend(w.iter().copied());
            }
        }
        let mut columns = Vec::new();
        let mut edges = Vec::new();
        if unary_d.iter().any(|&v| v != 0.0) {
            let (s, e) = train_stump(&unary_rows, &unary_d, OutputRange::PmOne)?;
            columns.push(WeakColumn::part(WeakLearner::Stump(s), Part::Unary));
            edges.push(e);
        }
        if pair_d.iter().any(|&v| v != 0.0) {
            let (s, e) = train_stump(&pair_rows, &pair_d, OutputRange::ZeroOne)?;
            columns.push(WeakColumn::part(WeakLearner::Stump(s), Part::Pairwise));
            edges.push(e);
        }
        if columns.is_empty() {
            return Ok(None);
        }
        let selected = if edges.len() == 2 && edges[1] > edges[0] { 1 } else { 0 };
        Ok(Some(ColumnBatch {
            columns,
            edges,
            selected,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::weak_edge;
    use crate::weak::Stump;

    fn stump(f: usize, t: f64, p: i8, r: OutputRange) -> WeakLearner {
        WeakLearner::Stump(Stump {
            feature: f,
            threshold: t,
            polarity: p,
            output_range: r,
        })
    }

    fn chain() -> SegInstance {
        SegInstance {
            node_count: 3,
            edges: vec![(0, 1), (1, 2)],
            unary_feats: vec![
                [vec![1.0], vec![-1.0]],
                [vec![-1.0], vec![1.0]],
                [vec![0.5], vec![-0.5]],
            ],
            pair_feats: vec![vec![0.9], vec![0.1]],
            truth: vec![1, 0, 1],
        }
    }

    fn chain_model() -> (Vec<WeakColumn>, Vec<f64>) {
        (
            vec![
                WeakColumn::part(stump(0, 0.0, 1, OutputRange::PmOne), Part::Unary),
                WeakColumn::part(stump(0, 0.5, 1, OutputRange::ZeroOne), Part::Pairwise),
            ],
            vec![2.0, 3.0],
        )
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming(&[0, 1, 1], &[0, 1, 1]).unwrap(), 0);
        assert_eq!(hamming(&[0, 1, 1], &[0, 0, 1]).unwrap(), 1);
        assert_eq!(hamming(&[0, 1, 0, 1], &[1, 0, 1, 0]).unwrap(), 4);
        assert!(hamming(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn chain_energy_by_hand() {
        let inst = chain();
        let (cols, w) = chain_model();
        // y = (1,1,0): unary phi(U1)=-1, phi(U1)=+1, phi(U0)=+1 -> 2*(1) = 2;
        // edge (1,2) disagrees, V=0.1 -> stump 0; edge (0,1) agrees
        assert_eq!(energy(&inst, &[1, 1, 0], &cols, &w), 2.0);
        // y = (0,1,1): phi = +1, +1, -1 -> 2; edge (0,1) disagrees V=0.9 -> 3
        assert_eq!(energy(&inst, &[0, 1, 1], &cols, &w), 5.0);
        assert_eq!(energy(&inst, &[1, 1, 1], &[], &[]), 0.0);
        let only_pair = (vec![cols[1].clone()], vec![3.0]);
        assert_eq!(energy(&inst, &[0, 0, 0], &only_pair.0, &only_pair.1), 0.0);
    }

    #[test]
    fn score_is_negated_energy() {
        let inst = synth_instance(3, 3, 0.5, 4).unwrap();
        let task = CrfTask::new(vec![inst.clone()]).unwrap();
        let (cols, w) = chain_model();
        for bits in 0..(1u32 << 9) {
            let y: Vec<u8> = (0..9).map(|p| ((bits >> p) & 1) as u8).collect();
            let s: f64 = cols.iter().zip(&w).map(|(c, w)| w * task.column_value(c, 0, &y)).sum();
            assert!((s + energy(&inst, &y, &cols, &w)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_model_inference_is_complement() {
        let inst = chain();
        let (y, v) = loss_augmented_infer(&inst, &[], &[]).unwrap();
        assert_eq!(y, vec![0, 1, 0]);
        assert_eq!(v, -3.0);
    }

    #[test]
    fn strong_unaries_recover_truth() {
        let inst = synth_instance(4, 4, 0.0, 1).unwrap();
        let cols = vec![WeakColumn::part(stump(0, 0.0, 1, OutputRange::PmOne), Part::Unary)];
        // label-1 vectors of foreground nodes are negative, so phi = -1 there
        let y = predict_labels(&inst, &cols, &[10.0]).unwrap();
        assert_eq!(y, inst.truth);
        let (aug, _) = loss_augmented_infer(&inst, &cols, &[10.0]).unwrap();
        assert_eq!(aug, inst.truth);
    }

    #[test]
    fn submodularity() {
        let (cols, w) = chain_model();
        assert!(submodularity_check(&[], &[]));
        assert!(submodularity_check(&cols, &w));
        let bad = vec![WeakColumn::part(stump(0, 0.0, 1, OutputRange::PmOne), Part::Pairwise)];
        assert!(!submodularity_check(&bad, &[1.0]));
        assert!(predict_labels(&chain(), &bad, &[1.0]).is_err());
    }

    #[test]
    fn complement_weights_expand_disagreements() {
        let inst = chain();
        let task = CrfTask::new(vec![inst.clone()]).unwrap();
        let mut mu = DualWeights::new();
        let comp: Vec<u8> = inst.truth.iter().map(|l| 1 - l).collect();
        mu.set(0, comp, 0.25);
        let (_, pair) = task.signed_weights(&mu);
        // complementing every label keeps each edge's agreement unchanged
        assert_eq!(pair[0], vec![0.0, 0.0]);
    }

    #[test]
    fn subproblem_edges_match_double_sum() {
        let insts: Vec<SegInstance> = (0..3).map(|s| synth_instance(3, 3, 0.7, s).unwrap()).collect();
        let task = CrfTask::new(insts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut mu = DualWeights::new();
        for i in 0..3 {
            for _ in 0..3 {
                let y: Vec<u8> = (0..9).map(|_| u8::from(rng.random_bool(0.5))).collect();
                if y != task.truth(i) {
                    mu.set(i, y, rng.random_range(0.01..0.2));
                }
            }
        }
        let batch = task.generate_columns(&mu, &WeakConfig::stumps()).unwrap().unwrap();
        for (col, e) in batch.columns.iter().zip(&batch.edges) {
            assert!((weak_edge(&task, &mu, col) - e).abs() < 1e-12);
        }
    }

    #[test]
    fn synthetic_instances_are_deterministic() {
        let a = synth_instance(5, 4, 0.8, 99).unwrap();
        let b = synth_instance(5, 4, 0.8, 99).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.edges.len(), 4 * 4 + 3 * 5);
        assert!(a.truth.contains(&1));
    }
}

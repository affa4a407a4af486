//! Binary, flat multi-class and taxonomy tasks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{DualWeights, WeakColumn};
use crate::task::{ColumnBatch, StructuredTask};
use crate::weak::{train_perceptron, train_stump, OutputRange, WeakConfig, WeakKind, WeakLearner};

/// Rooted class tree. Nodes are 0-based internally and 1-based in files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TaxonomyRepr", into = "TaxonomyRepr")]
pub struct Taxonomy {
    parent: Vec<Option<usize>>,
    class_nodes: Vec<usize>,
    height: Vec<usize>,
    depth: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct TaxonomyRepr {
    /// 1-based parent per node, 0 for the root.
    parent: Vec<usize>,
    /// 1-based node of each class.
    class_nodes: Vec<usize>,
}

impl TryFrom<TaxonomyRepr> for Taxonomy {
    type Error = Error;

    fn try_from(r: TaxonomyRepr) -> Result<Self> {
        let parent = r.parent.iter().map(|&p| p.checked_sub(1)).collect();
        let n = r.parent.len();
        let mut flags = vec![false; n];
        for &c in &r.class_nodes {
            if c == 0 || c > n {
                return invalid(format!("class node {c} out of range"));
            }
            flags[c - 1] = true;
        }
        let t = Taxonomy::new(parent, &flags)?;
        if t.class_nodes.iter().map(|c| c + 1).collect::<Vec<_>>() != r.class_nodes {
            return invalid("class nodes must be listed in ascending order");
        }
        Ok(t)
    }
}

impl From<Taxonomy> for TaxonomyRepr {
    fn from(t: Taxonomy) -> Self {
        TaxonomyRepr {
            parent: t.parent.iter().map(|p| p.map_or(0, |v| v + 1)).collect(),
            class_nodes: t.class_nodes.iter().map(|c| c + 1).collect(),
        }
    }
}

impl Taxonomy {
    /// Classes are the flagged nodes in ascending node order.
    pub fn new(parent: Vec<Option<usize>>, class_flags: &[bool]) -> Result<Self> {
        let n = parent.len();
        if n == 0 || class_flags.len() != n {
            return invalid("taxonomy needs one flag per node and at least one node");
        }
        let roots = parent.iter().filter(|p| p.is_none()).count();
        if roots != 1 {
            return invalid(format!("taxonomy must have exactly one root, found {roots}"));
        }
        let mut depth = vec![0; n];
        for v in 0..n {
            let mut d = 0;
            let mut cur = v;
            while let Some(p) = parent[cur] {
                if p >= n {
                    return invalid(format!("node {} has unknown parent {}", v + 1, p + 1));
                }
                d += 1;
                if d > n {
                    return invalid("taxonomy contains a cycle");
                }
                cur = p;
            }
            depth[v] = d;
        }
        let mut height = vec![0; n];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&v| std::cmp::Reverse(depth[v]));
        for v in order {
            if let Some(p) = parent[v] {
                height[p] = height[p].max(height[v] + 1);
            }
        }
        let class_nodes: Vec<usize> = (0..n).filter(|&v| class_flags[v]).collect();
        if class_nodes.is_empty() {
            return invalid("taxonomy has no class nodes");
        }
        Ok(Taxonomy {
            parent,
            class_nodes,
            height,
            depth,
        })
    }

    /// Root plus `k` leaf classes: tree loss reduces to the 0/1 loss.
    pub fn star(k: usize) -> Self {
        let mut parent = vec![Some(k); k];
        parent.push(None);
        let mut flags = vec![true; k];
        flags.push(false);
        Taxonomy::new(parent, &flags).expect("star taxonomy is valid")
    }

    /// Lines of `node_id parent_id|ROOT class_flag`, ids dense from 1.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, Option<usize>, bool)> = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| Error::Parse {
                line: ln + 1,
                msg: msg.to_string(),
            };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(err("expected 'node_id parent_id|ROOT class_flag'"));
            }
            let id: usize = f[0].parse().map_err(|_| err("bad node id"))?;
            let parent = if f[1] == "ROOT" {
                None
            } else {
                Some(f[1].parse::<usize>().map_err(|_| err("bad parent id"))?)
            };
            let flag = match f[2] {
                "1" => true,
                "0" => false,
                _ => return Err(err("class flag must be 0 or 1")),
            };
            if id == 0 || parent == Some(0) {
                return Err(err("node ids start at 1"));
            }
            entries.push((id, parent, flag));
        }
        let n = entries.len();
        let mut parent = vec![None; n];
        let mut flags = vec![false; n];
        let mut seen = vec![false; n];
        for (id, p, flag) in entries {
            if id > n || seen[id - 1] {
                return invalid(format!("node ids must be dense 1..{n}; got {id}"));
            }
            seen[id - 1] = true;
            parent[id - 1] = p.map(|v| v - 1);
            flags[id - 1] = flag;
        }
        Taxonomy::new(parent, &flags)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for v in 0..self.num_nodes() {
            let p = self.parent[v].map_or("ROOT".to_string(), |p| (p + 1).to_string());
            let flag = u8::from(self.class_nodes.contains(&v));
            s.push_str(&format!("{} {} {}\n", v + 1, p, flag));
        }
        s
    }

    pub fn num_nodes(&self) -> usize {
        self.parent.len()
    }

    pub fn num_classes(&self) -> usize {
        self.class_nodes.len()
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn height(&self, node: usize) -> usize {
        self.height[node]
    }

    /// 0-based node of a 1-based class.
    pub fn class_node(&self, class: usize) -> Result<usize> {
        if class == 0 || class > self.num_classes() {
            return invalid(format!("class {class} outside 1..={}", self.num_classes()));
        }
        Ok(self.class_nodes[class - 1])
    }

    fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].expect("non-root");
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].expect("non-root");
        }
        while a != b {
            a = self.parent[a].expect("non-root");
            b = self.parent[b].expect("non-root");
        }
        a
    }
}

/// Indicator `e_y` of length `k`.
pub fn gamma_flat(y: usize, k: usize) -> Result<Vec<u8>> {
    if y == 0 || y > k {
        return invalid(format!("class {y} outside 1..={k}"));
    }
    let mut g = vec![0; k];
    g[y - 1] = 1;
    Ok(g)
}

/// Marks the class node and all of its ancestors.
pub fn gamma_tree(y: usize, tax: &Taxonomy) -> Result<Vec<u8>> {
    let mut g = vec![0; tax.num_nodes()];
    let mut cur = Some(tax.class_node(y)?);
    while let Some(v) = cur {
        g[v] = 1;
        cur = tax.parent[v];
    }
    Ok(g)
}

/// Height of the lowest common ancestor; zero for identical classes.
pub fn tree_loss(y: usize, y2: usize, tax: &Taxonomy) -> Result<f64> {
    if y == y2 {
        tax.class_node(y)?;
        return Ok(0.0);
    }
    let (a, b) = (tax.class_node(y)?, tax.class_node(y2)?);
    Ok(tax.height[tax.lca(a, b)] as f64)
}

fn train_learner(rows: &[Vec<f64>], d: &[f64], weak: &WeakConfig) -> Result<(WeakLearner, f64)> {
    match weak.kind {
        WeakKind::Stump => {
            let (s, e) = train_stump(rows, d, OutputRange::PmOne)?;
            Ok((WeakLearner::Stump(s), e))
        }
        WeakKind::Perceptron => train_perceptron(rows, d, None, weak),
    }
}

/// Two classes; class 2 is the positive label `y = +1`.
#[derive(Debug, Clone)]
pub struct BinaryTask {
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

#[inline]
fn binary_sign(class: usize) -> f64 {
    if class == 2 {
        1.0
    } else {
        -1.0
    }
}

/// `0.5 * y * phi(x)` for `y` in {-1, +1}.
pub fn binary_map_value(col: &WeakColumn, x: &[f64], y: f64) -> f64 {
    0.5 * y * col.learner.eval(x)
}

impl BinaryTask {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if rows.len() != labels.len() {
            return invalid("row/label count mismatch");
        }
        if let Some(c) = labels.iter().find(|&&c| c != 1 && c != 2) {
            return invalid(format!("binary classes are 1 and 2, got {c}"));
        }
        Ok(BinaryTask { rows, labels })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

impl StructuredTask for BinaryTask {
    type Label = usize;

    fn num_examples(&self) -> usize {
        self.rows.len()
    }

    fn truth(&self, i: usize) -> usize {
        self.labels[i]
    }

    fn loss(&self, i: usize, y: &usize) -> f64 {
        if *y == self.labels[i] {
            0.0
        } else {
            1.0
        }
    }

    fn column_value(&self, col: &WeakColumn, i: usize, y: &usize) -> f64 {
        binary_map_value(col, &self.rows[i], binary_sign(*y))
    }

    fn delta_psi(&self, col: &WeakColumn, i: usize, y: &usize) -> f64 {
        if *y == self.labels[i] {
            0.0
        } else {
            binary_sign(self.labels[i]) * col.learner.eval(&self.rows[i])
        }
    }

    fn loss_augmented(&self, i: usize, columns: &[WeakColumn], weights: &[f64]) -> Result<(usize, f64)> {
        let truth = self.labels[i];
        let other = 3 - truth;
        let s: f64 = columns
            .iter()
            .zip(weights)
            .map(|(c, w)| w * c.learner.eval(&self.rows[i]))
            .sum();
        let v = 1.0 - binary_sign(truth) * s;
        Ok(if v > 0.0 || (v == 0.0 && other < truth) {
            (other, v)
        } else {
            (truth, 0.0)
        })
    }

    fn initial_label(&self, i: usize) -> usize {
        3 - self.labels[i]
    }

    fn alternatives(&self, i: usize) -> Option<Vec<usize>> {
        Some(vec![3 - self.labels[i]])
    }

    fn generate_columns(&self, mu: &DualWeights<usize>, weak: &WeakConfig) -> Result<Option<ColumnBatch>> {
        let mut d = vec![0.0; self.rows.len()];
        for (i, _, v) in mu.iter() {
            d[i] += v * binary_sign(self.labels[i]);
        }
        if d.iter().all(|&v| v == 0.0) {
            return Ok(None);
        }
        let (learner, edge) = train_learner(&self.rows, &d, weak)?;
        Ok(Some(ColumnBatch {
            columns: vec![WeakColumn::plain(learner)],
            edges: vec![edge],
            selected: 0,
        }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coding {
    Flat,
    Tree(Taxonomy),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    ZeroOne,
    Tree,
}

/// k-class task with flat or taxonomy label coding.
#[derive(Debug, Clone)]
pub struct MulticlassTask {
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    k: usize,
    coding: Coding,
    gammas: Vec<Vec<u8>>,
    losses: Vec<Vec<f64>>,
    /// Slots whose coding differs between some pair of classes.
    active_slots: Vec<usize>,
}

impl MulticlassTask {
    pub fn flat(rows: Vec<Vec<f64>>, labels: Vec<usize>, k: usize) -> Result<Self> {
        Self::new(rows, labels, k, Coding::Flat, LossKind::ZeroOne)
    }

    /// Taxonomy coding trained against the tree loss.
    pub fn tree(rows: Vec<Vec<f64>>, labels: Vec<usize>, tax: Taxonomy) -> Result<Self> {
        let k = tax.num_classes();
        Self::new(rows, labels, k, Coding::Tree(tax), LossKind::Tree)
    }

    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>, k: usize, coding: Coding, loss: LossKind) -> Result<Self> {
        if rows.len() != labels.len() {
            return invalid("row/label count mismatch");
        }
        if k < 2 {
            return invalid("need at least two classes");
        }
        if let Some(c) = labels.iter().find(|&&c| c == 0 || c > k) {
            return invalid(format!("class {c} outside 1..={k}"));
        }
        let gammas: Vec<Vec<u8>> = (1..=k)
            .map(|y| match &coding {
                Coding::Flat => gamma_flat(y, k),
                Coding::Tree(t) => gamma_tree(y, t),
            })
            .collect::<Result<_>>()?;
        let losses = (1..=k)
            .map(|a| {
                (1..=k)
                    .map(|b| match (&loss, &coding) {
                        (LossKind::ZeroOne, _) => Ok(f64::from(u8::from(a != b))),
                        (LossKind::Tree, Coding::Tree(t)) => tree_loss(a, b, t),
                        (LossKind::Tree, Coding::Flat) => invalid("tree loss needs a taxonomy"),
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let slots = gammas[0].len();
        let active_slots = (0..slots)
            .filter(|&r| gammas.iter().any(|g| g[r] != gammas[0][r]))
            .collect();
        Ok(MulticlassTask {
            rows,
            labels,
            k,
            coding,
            gammas,
            losses,
            active_slots,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn num_slots(&self) -> usize {
        self.gammas[0].len()
    }

    pub fn coding(&self) -> &Coding {
        &self.coding
    }

    pub fn gamma(&self, y: usize) -> &[u8] {
        &self.gammas[y - 1]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// `D[i][r] = sum_y mu_(i,y) (Gamma(y_i)[r] - Gamma(y)[r])`.
    pub fn signed_weights(&self, mu: &DualWeights<usize>) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.num_slots()]; self.rows.len()];
        for (i, y, v) in mu.iter() {
            let gt = &self.gammas[self.labels[i] - 1];
            let gy = &self.gammas[y - 1];
            for r in 0..self.num_slots() {
                let diff = f64::from(gt[r]) - f64::from(gy[r]);
                if diff != 0.0 {
                    d[i][r] += v * diff;
                }
            }
        }
        d
    }
}

/// `phi(x) * Gamma(y)[slot]` with `gamma` the coding of `y`.
pub fn joint_map_value(col: &WeakColumn, x: &[f64], gamma: &[u8]) -> f64 {
    let slot = col.class_slot.expect("multi-class columns carry a slot");
    if gamma[slot - 1] == 0 {
        0.0
    } else {
        col.learner.eval(x)
    }
}

impl StructuredTask for MulticlassTask {
    type Label = usize;

    fn num_examples(&self) -> usize {
        self.rows.len()
    }

    fn truth(&self, i: usize) -> usize {
        self.labels[i]
    }

    fn loss(&self, i: usize, y: &usize) -> f64 {
        self.losses[self.labels[i] - 1][y - 1]
    }

    fn column_value(&self, col: &WeakColumn, i: usize, y: &usize) -> f64 {
        joint_map_value(col, &self.rows[i], &self.gammas[y - 1])
    }

    fn loss_augmented(&self, i: usize, columns: &[WeakColumn], weights: &[f64]) -> Result<(usize, f64)> {
        let mut slot_score = vec![0.0; self.num_slots()];
        for (c, w) in columns.iter().zip(weights) {
            if *w != 0.0 {
                let slot = c
                    .class_slot
                    .ok_or_else(|| Error::InvalidInput("column lacks a class slot".into()))?;
                slot_score[slot - 1] += w * c.learner.eval(&self.rows[i]);
            }
        }
        let score = |y: usize| -> f64 {
            self.gammas[y - 1]
                .iter()
                .zip(&slot_score)
                .filter(|(g, _)| **g != 0)
                .map(|(_, s)| s)
                .sum()
        };
        let truth = self.labels[i];
        let st = score(truth);
        let mut best = (0, f64::NEG_INFINITY);
        for y in 1..=self.k {
            let v = if y == truth {
                0.0
            } else {
                self.loss(i, &y) - (st - score(y))
            };
            if v > best.1 {
                best = (y, v);
            }
        }
        Ok(best)
    }

    fn initial_label(&self, i: usize) -> usize {
        if self.labels[i] == 1 {
            2
        } else {
            1
        }
    }

    fn alternatives(&self, i: usize) -> Option<Vec<usize>> {
        Some((1..=self.k).filter(|&y| y != self.labels[i]).collect())
    }

    fn generate_columns(&self, mu: &DualWeights<usize>, weak: &WeakConfig) -> Result<Option<ColumnBatch>> {
        let d = self.signed_weights(mu);
        let per_slot: Vec<Option<(WeakLearner, f64)>> = self
            .active_slots
            .par_iter()
            .map(|&r| {
                let col: Vec<f64> = d.iter().map(|row| row[r]).collect();
                if col.iter().all(|&v| v == 0.0) {
                    Ok(None)
                } else {
                    train_learner(&self.rows, &col, weak).map(Some)
                }
            })
            .collect::<Result<_>>()?;
        let mut best: Option<(usize, WeakLearner, f64)> = None;
        for (pos, found) in per_slot.into_iter().enumerate() {
            if let Some((l, e)) = found {
                if best.as_ref().is_none_or(|b| e > b.2) {
                    best = Some((pos, l, e));
                }
            }
        }
        let Some((selected, learner, _)) = best else {
            return Ok(None);
        };
        let phi: Vec<f64> = self.rows.iter().map(|x| learner.eval(x)).collect();
        let edges = self
            .active_slots
            .iter()
            .map(|&r| {
                let mut e = 0.0;
                for (p, row) in phi.iter().zip(&d) {
                    e += p * row[r];
                }
                e
            })
            .collect();
        let columns = self
            .active_slots
            .iter()
            .map(|&r| WeakColumn::slot(learner.clone(), r + 1))
            .collect();
        Ok(Some(ColumnBatch {
            columns,
            edges,
            selected,
        }))
    }
}

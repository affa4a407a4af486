//! Exact minimization of binary pairwise energies with nonnegative
//! disagreement costs via s-t max-flow (shortest augmenting paths).
//!
//! Label 1 is the source side; nodes not reachable from the source in the
//! final residual graph take label 0.

use std::collections::VecDeque;

use crate::error::{Error, Result};

const SATURATION: f64 = 1e-12;

/// A binary energy: per-node unary costs for labels 0 and 1 plus, per edge
/// `(p, q)`, the cost `theta01` of `(y_p, y_q) = (0, 1)` and `theta10` of
/// `(1, 0)`. Agreeing labels cost nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryEnergy {
    pub unary0: Vec<f64>,
    pub unary1: Vec<f64>,
    pub edges: Vec<(usize, usize)>,
    pub theta01: Vec<f64>,
    pub theta10: Vec<f64>,
}

impl BinaryEnergy {
    pub fn evaluate(&self, labeling: &[u8]) -> f64 {
        let mut e = 0.0;
        for (p, &l) in labeling.iter().enumerate() {
            e += if l == 0 { self.unary0[p] } else { self.unary1[p] };
        }
        for (k, &(p, q)) in self.edges.iter().enumerate() {
            match (labeling[p], labeling[q]) {
                (0, 1) => e += self.theta01[k],
                (1, 0) => e += self.theta10[k],
                _ => {}
            }
        }
        e
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowNetwork {
    pub source_cap: Vec<f64>,
    pub sink_cap: Vec<f64>,
    /// `(p, q, cap p->q, cap q->p)`.
    pub edges: Vec<(usize, usize, f64, f64)>,
    /// Constant so that cut value plus offset equals the energy.
    pub offset: f64,
}

pub fn build_network(energy: &BinaryEnergy) -> Result<FlowNetwork> {
    let n = energy.unary0.len();
    if energy.unary1.len() != n
        || energy.theta01.len() != energy.edges.len()
        || energy.theta10.len() != energy.edges.len()
    {
        return Err(Error::InvalidInput("inconsistent energy dimensions".into()));
    }
    let mut source_cap = vec![0.0; n];
    let mut sink_cap = vec![0.0; n];
    let mut offset = 0.0;
    for p in 0..n {
        let (u0, u1) = (energy.unary0[p], energy.unary1[p]);
        if !u0.is_finite() || !u1.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite unary cost at node {p}")));
        }
        // label 0 cuts the source arc, label 1 the sink arc
        source_cap[p] = (u0 - u1).max(0.0);
        sink_cap[p] = (u1 - u0).max(0.0);
        offset += u0.min(u1);
    }
    let mut edges = Vec::with_capacity(energy.edges.len());
    for (k, &(p, q)) in energy.edges.iter().enumerate() {
        let (t01, t10) = (energy.theta01[k], energy.theta10[k]);
        if !(t01 >= 0.0) || !(t10 >= 0.0) {
            return Err(Error::Submodularity(format!(
                "edge ({p}, {q}) has negative disagreement cost"
            )));
        }
        if p >= n || q >= n || p == q {
            return Err(Error::InvalidInput(format!("bad edge ({p}, {q})")));
        }
        edges.push((p, q, t10, t01));
    }
    Ok(FlowNetwork {
        source_cap,
        sink_cap,
        edges,
        offset,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub labeling: Vec<u8>,
    /// Capacity of the cut induced by `labeling`, evaluated directly.
    pub cut_value: f64,
    pub flow_value: f64,
    pub source_flow: Vec<f64>,
    pub sink_flow: Vec<f64>,
    /// Net flow `p -> q` per edge.
    pub edge_flow: Vec<f64>,
}

struct Arc {
    to: usize,
    cap: f64,
    rev: usize,
}

pub fn min_cut(net: &FlowNetwork) -> Cut {
    let n = net.source_cap.len();
    let (s, t) = (n, n + 1);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n + 2];
    let mut arcs: Vec<Arc> = Vec::new();
    let mut add = |adj: &mut Vec<Vec<usize>>, a: usize, b: usize, cab: f64, cba: f64| -> usize {
        let i = arcs.len();
        arcs.push(Arc {
            to: b,
            cap: cab,
            rev: i + 1,
        });
        arcs.push(Arc {
            to: a,
            cap: cba,
            rev: i,
        });
        adj[a].push(i);
        adj[b].push(i + 1);
        i
    };
    let src_arc: Vec<usize> = (0..n).map(|p| add(&mut adj, s, p, net.source_cap[p], 0.0)).collect();
    let sink_arc: Vec<usize> = (0..n).map(|p| add(&mut adj, p, t, net.sink_cap[p], 0.0)).collect();
    let edge_arc: Vec<usize> = net
        .edges
        .iter()
        .map(|&(p, q, cpq, cqp)| add(&mut adj, p, q, cpq, cqp))
        .collect();

    let mut flow_value = 0.0;
    let mut pred = vec![usize::MAX; n + 2];
    loop {
        pred.iter_mut().for_each(|v| *v = usize::MAX);
        let mut queue = VecDeque::from([s]);
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &a in &adj[u] {
                let v = arcs[a].to;
                if v != s && pred[v] == usize::MAX && arcs[a].cap > SATURATION {
                    pred[v] = a;
                    if v == t {
                        found = true;
                        break;
                    }
                    queue.push_back(v);
                }
            }
            if found {
                break;
            }
        }
        if !found {
            break;
        }
        let mut bottleneck = f64::INFINITY;
        let mut v = t;
        while v != s {
            let a = pred[v];
            bottleneck = bottleneck.min(arcs[a].cap);
            v = arcs[arcs[a].rev].to;
        }
        let mut v = t;
        while v != s {
            let a = pred[v];
            arcs[a].cap -= bottleneck;
            let r = arcs[a].rev;
            arcs[r].cap += bottleneck;
            v = arcs[r].to;
        }
        flow_value += bottleneck;
    }

    let mut reach = vec![false; n + 2];
    reach[s] = true;
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        for &a in &adj[u] {
            let v = arcs[a].to;
            if !reach[v] && arcs[a].cap > SATURATION {
                reach[v] = true;
                queue.push_back(v);
            }
        }
    }
    let labeling: Vec<u8> = (0..n).map(|p| u8::from(reach[p])).collect();
    let cut_value = cut_capacity(net, &labeling);
    Cut {
        cut_value,
        flow_value,
        source_flow: (0..n).map(|p| net.source_cap[p] - arcs[src_arc[p]].cap).collect(),
        sink_flow: (0..n).map(|p| net.sink_cap[p] - arcs[sink_arc[p]].cap).collect(),
        edge_flow: net
            .edges
            .iter()
            .zip(&edge_arc)
            .map(|(&(_, _, cpq, _), &a)| cpq - arcs[a].cap)
            .collect(),
        labeling,
    }
}

/// Capacity of the s-t cut whose source side is the set of label-1 nodes.
pub fn cut_capacity(net: &FlowNetwork, labeling: &[u8]) -> f64 {
    let mut c = 0.0;
    for (p, &l) in labeling.iter().enumerate() {
        c += if l == 1 { net.sink_cap[p] } else { net.source_cap[p] };
    }
    for &(p, q, cpq, cqp) in &net.edges {
        match (labeling[p], labeling[q]) {
            (1, 0) => c += cpq,
            (0, 1) => c += cqp,
            _ => {}
        }
    }
    c
}

/// Minimizing labeling of a binary energy and its energy value.
pub fn minimize(energy: &BinaryEnergy) -> Result<(Vec<u8>, f64)> {
    let net = build_network(energy)?;
    let cut = min_cut(&net);
    let e = energy.evaluate(&cut.labeling);
    Ok((cut.labeling, e))
}

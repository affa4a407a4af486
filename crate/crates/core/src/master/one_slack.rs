//! Cutting-plane solver for the 1-slack master
//!
//! `min 1.w + C xi  s.t.  (1/m) w . sum_i c_i dpsi_i(y'_i) >= (1/m) sum_i c_i Delta_i(y'_i) - xi`
//!
//! for every working-set entry `(c, y')`, with `w, xi >= 0`.

use rayon::prelude::*;

use super::{shift_basis, CpRound, MasterSolution};
use crate::error::{Error, Result};
use crate::lp::{self, BasisEntry, LinearProgram, LpStatus};
use crate::model::{DualWeights, WeakColumn};
use crate::task::StructuredTask;

const EVICT_AFTER: usize = 10;

#[derive(Debug, Clone)]
pub struct WsEntry<L> {
    pub c: Vec<bool>,
    /// Violating label per example; the truth where `c_i = 0`.
    pub ylist: Vec<L>,
    /// Per-column coefficient `(1/m) sum_i c_i dpsi_i`.
    row: Vec<f64>,
    rhs: f64,
    idle: usize,
}

impl<L> WsEntry<L> {
    pub fn row(&self) -> &[f64] {
        &self.row
    }

    pub fn rhs(&self) -> f64 {
        self.rhs
    }
}

#[derive(Debug, Clone)]
pub struct WorkingSet<L> {
    entries: Vec<WsEntry<L>>,
}

impl<L> Default for WorkingSet<L> {
    fn default() -> Self {
        WorkingSet { entries: Vec::new() }
    }
}

impl<L: Clone + PartialEq + Send + Sync> WorkingSet<L> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[WsEntry<L>] {
        &self.entries
    }

    pub fn contains(&self, c: &[bool], ylist: &[L]) -> bool {
        self.entries.iter().any(|e| e.c == c && e.ylist == ylist)
    }

    /// Add an entry, computing its row over `columns`. Returns false for a
    /// duplicate.
    pub fn push<T: StructuredTask<Label = L>>(
        &mut self,
        task: &T,
        columns: &[WeakColumn],
        c: Vec<bool>,
        ylist: Vec<L>,
    ) -> bool {
        if self.contains(&c, &ylist) {
            return false;
        }
        let m = task.num_examples() as f64;
        let mut rhs = 0.0;
        for (i, y) in ylist.iter().enumerate() {
            if c[i] {
                rhs += task.loss(i, y);
            }
        }
        let mut entry = WsEntry {
            c,
            ylist,
            row: Vec::new(),
            rhs: rhs / m,
            idle: 0,
        };
        extend_row(task, columns, &mut entry);
        self.entries.push(entry);
        true
    }

    fn extend<T: StructuredTask<Label = L>>(&mut self, task: &T, columns: &[WeakColumn]) {
        for e in &mut self.entries {
            extend_row(task, columns, e);
        }
    }
}

fn extend_row<T: StructuredTask>(task: &T, columns: &[WeakColumn], e: &mut WsEntry<T::Label>) {
    let have = e.row.len();
    if have >= columns.len() {
        return;
    }
    let m = task.num_examples() as f64;
    let c = &e.c;
    let ylist = &e.ylist;
    let fresh: Vec<f64> = columns[have..]
        .par_iter()
        .map(|col| {
            let mut s = 0.0;
            for (i, y) in ylist.iter().enumerate() {
                if c[i] {
                    s += task.delta_psi(col, i, y);
                }
            }
            s / m
        })
        .collect();
    e.row.extend(fresh);
}

fn build_lp<L>(ws: &WorkingSet<L>, n: usize, c: f64) -> LinearProgram {
    let mut objective = vec![1.0; n];
    objective.push(c);
    let mut lp = LinearProgram::new(objective);
    for e in &ws.entries {
        let mut coeffs: Vec<(usize, f64)> = e.row[..n]
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect();
        coeffs.push((n, 1.0));
        lp.add_row(coeffs, e.rhs);
    }
    lp
}

/// Solve the LP over the current working set. An empty working set gives
/// `w = 0, xi = 0`.
pub fn solve_restricted<T: StructuredTask>(
    task: &T,
    columns: &[WeakColumn],
    ws: &mut WorkingSet<T::Label>,
    c: f64,
) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    ws.extend(task, columns);
    let n = columns.len();
    if ws.is_empty() {
        return Ok((vec![0.0; n], 0.0, Vec::new()));
    }
    let sol = lp::solve(&build_lp(ws, n, c))?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("1-slack master is {:?}", sol.status)));
    }
    Ok((sol.primal[..n].to_vec(), sol.primal[n], sol.duals))
}

/// Most violated 1-slack constraint under weights `w`: per example the
/// loss-augmented label, with `c_i = 1` iff its violation is positive.
/// Also returns the per-example violations.
pub fn find_violated<T: StructuredTask>(
    task: &T,
    columns: &[WeakColumn],
    w: &[f64],
) -> Result<(Vec<bool>, Vec<T::Label>, Vec<f64>)> {
    let found = task.loss_augmented_all(columns, w)?;
    let mut c = Vec::with_capacity(found.len());
    let mut ylist = Vec::with_capacity(found.len());
    let mut viol = Vec::with_capacity(found.len());
    for (i, (y, v)) in found.into_iter().enumerate() {
        let hit = v > 0.0;
        c.push(hit);
        ylist.push(if hit { y } else { task.truth(i) });
        viol.push(v);
    }
    Ok((c, ylist, viol))
}

/// Remove basis entries tied to dropped rows and renumber the rest.
fn drop_rows(basis: &[BasisEntry], keep: &[bool]) -> Vec<BasisEntry> {
    let mut index = Vec::with_capacity(keep.len());
    let mut next = 0;
    for &k in keep {
        index.push(next);
        next += usize::from(k);
    }
    basis
        .iter()
        .filter_map(|e| match *e {
            BasisEntry::Surplus(r) => keep[r].then(|| BasisEntry::Surplus(index[r])),
            BasisEntry::Artificial(r) => keep[r].then(|| BasisEntry::Artificial(index[r])),
            s => Some(s),
        })
        .collect()
}

/// Stateful 1-slack master: the working set and the last basis persist
/// across column-generation iterations.
#[derive(Debug, Clone)]
pub struct OneSlackMaster<L> {
    pub ws: WorkingSet<L>,
    c: f64,
    eps: f64,
    max_rounds: usize,
    basis: Option<(Vec<BasisEntry>, usize)>,
}

impl<L: Clone + Ord + Send + Sync> OneSlackMaster<L> {
    pub fn new(c: f64, eps: f64, max_rounds: usize) -> Self {
        OneSlackMaster {
            ws: WorkingSet::new(),
            c,
            eps,
            max_rounds,
            basis: None,
        }
    }

    pub fn set_eps(&mut self, eps: f64) {
        self.eps = eps;
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Alternate LP solves and separation until the newest constraint is
    /// violated by at most `eps`. Recovers
    /// `mu_(i,y) = (1/m) sum over entries with y'_i = y of lambda * c_i`.
    pub fn solve<T: StructuredTask<Label = L>>(
        &mut self,
        task: &T,
        columns: &[WeakColumn],
    ) -> Result<MasterSolution<L>> {
        let m = task.num_examples();
        let n = columns.len();
        let keep: Vec<bool> = self.ws.entries.iter().map(|e| e.idle < EVICT_AFTER).collect();
        if keep.contains(&false) {
            let mut flags = keep.iter();
            self.ws.entries.retain(|_| *flags.next().expect("one flag per entry"));
            if let Some((b, _)) = &mut self.basis {
                *b = drop_rows(b, &keep);
            }
        }
        self.ws.extend(task, columns);
        if self.ws.is_empty() {
            let ylist: Vec<L> = (0..m).map(|i| task.initial_label(i)).collect();
            self.ws.push(task, columns, vec![true; m], ylist);
        }

        let mut trace = Vec::new();
        let mut gap = f64::INFINITY;
        for round in 1..=self.max_rounds {
            let lp = build_lp(&self.ws, n, self.c);
            let sol = match &self.basis {
                Some((b, old_n)) => lp::solve_warm(&lp, &shift_basis(b, *old_n, n))?,
                None => lp::solve(&lp)?,
            };
            if sol.status != LpStatus::Optimal {
                return Err(Error::Solver(format!("1-slack master is {:?}", sol.status)));
            }
            self.basis = Some((sol.basis.clone(), n));
            let w = sol.primal[..n].to_vec();
            let xi = sol.primal[n];
            for (e, &l) in self.ws.entries.iter_mut().zip(&sol.duals) {
                e.idle = if l > 0.0 { 0 } else { e.idle + 1 };
            }

            let (c, ylist, viol) = find_violated(task, columns, &w)?;
            let total: f64 = viol.iter().zip(&c).filter(|(_, hit)| **hit).map(|(v, _)| v).sum();
            gap = total / m as f64 - xi;
            trace.push(CpRound {
                round,
                objective: sol.objective,
                gap,
                ws_size: self.ws.len(),
            });

            let done = gap <= self.eps || !self.ws.push(task, columns, c, ylist);
            if done {
                let mut mu = DualWeights::new();
                for (e, &l) in self.ws.entries.iter().zip(&sol.duals) {
                    if l > 0.0 {
                        for (i, y) in e.ylist.iter().enumerate() {
                            if e.c[i] {
                                mu.add(i, y.clone(), l / m as f64);
                            }
                        }
                    }
                }
                let lambdas = sol.duals.clone();
                return Ok(MasterSolution {
                    weights: w,
                    objective: sol.objective,
                    xi: vec![xi],
                    mu,
                    lambdas,
                    rounds: round,
                    gap,
                    trace,
                    lp,
                });
            }
        }
        Err(Error::Convergence {
            iterations: self.max_rounds,
            gap,
        })
    }
}

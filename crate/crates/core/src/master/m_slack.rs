//! The m-slack master over enumerable label sets:
//!
//! `min 1.w + (C/m) 1.xi  s.t.  w . dpsi_i(y) >= Delta(y_i, y) - xi_i`
//!
//! for every example `i` and every `y != y_i`.

use rayon::prelude::*;

use super::{shift_basis, MasterSolution};
use crate::error::{Error, Result};
use crate::lp::{self, BasisEntry, LinearProgram, LpStatus};
use crate::model::{DualWeights, WeakColumn};
use crate::task::StructuredTask;

fn enumerate_rows<T: StructuredTask>(task: &T, cap: usize) -> Result<Vec<(usize, T::Label)>> {
    let mut rows = Vec::new();
    for i in 0..task.num_examples() {
        let alts = task
            .alternatives(i)
            .ok_or_else(|| Error::InvalidInput("label set is not enumerable; use the 1-slack solver".into()))?;
        if rows.len() + alts.len() > cap {
            return Err(Error::Capacity {
                needed: rows.len() + alts.len(),
                cap,
            });
        }
        rows.extend(alts.into_iter().map(|y| (i, y)));
    }
    Ok(rows)
}

/// Sparse per-row values of one column.
fn column_entries<T: StructuredTask>(task: &T, col: &WeakColumn, rows: &[(usize, T::Label)]) -> Vec<(usize, f64)> {
    rows.iter()
        .enumerate()
        .filter_map(|(r, (i, y))| {
            let v = task.delta_psi(col, *i, y);
            (v != 0.0).then_some((r, v))
        })
        .collect()
}

fn assemble<T: StructuredTask>(
    task: &T,
    rows: &[(usize, T::Label)],
    cols: &[Vec<(usize, f64)>],
    c: f64,
) -> LinearProgram {
    let n = cols.len();
    let m = task.num_examples();
    let mut objective = vec![1.0; n];
    objective.extend(std::iter::repeat_n(c / m as f64, m));
    let mut coeffs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows.len()];
    for (j, col) in cols.iter().enumerate() {
        for &(r, v) in col {
            coeffs[r].push((j, v));
        }
    }
    let mut lp = LinearProgram::new(objective);
    for ((i, y), mut row) in rows.iter().zip(coeffs) {
        row.push((n + i, 1.0));
        lp.add_row(row, task.loss(*i, y));
    }
    lp
}

/// The full m-slack LP and the `(example, label)` key of each row.
pub fn build_mslack_lp<T: StructuredTask>(
    task: &T,
    columns: &[WeakColumn],
    c: f64,
    cap: usize,
) -> Result<(LinearProgram, Vec<(usize, T::Label)>)> {
    let rows = enumerate_rows(task, cap)?;
    let cols: Vec<Vec<(usize, f64)>> = columns.iter().map(|col| column_entries(task, col, &rows)).collect();
    Ok((assemble(task, &rows, &cols, c), rows))
}

/// m-slack master that caches per-column constraint coefficients and warm
/// starts from the previous basis.
#[derive(Debug, Clone)]
pub struct MSlackMaster<L> {
    c: f64,
    cap: usize,
    rows: Option<Vec<(usize, L)>>,
    cols: Vec<Vec<(usize, f64)>>,
    basis: Option<(Vec<BasisEntry>, usize)>,
}

impl<L: Clone + Ord + Send + Sync> MSlackMaster<L> {
    pub fn new(c: f64, cap: usize) -> Self {
        MSlackMaster {
            c,
            cap,
            rows: None,
            cols: Vec::new(),
            basis: None,
        }
    }

    pub fn solve<T: StructuredTask<Label = L>>(
        &mut self,
        task: &T,
        columns: &[WeakColumn],
    ) -> Result<MasterSolution<L>> {
        if self.rows.is_none() {
            self.rows = Some(enumerate_rows(task, self.cap)?);
        }
        let rows = self.rows.as_ref().expect("rows built");
        if self.cols.len() > columns.len() {
            self.cols.clear();
            self.basis = None;
        }
        let have = self.cols.len();
        let fresh: Vec<Vec<(usize, f64)>> = columns[have..]
            .par_iter()
            .map(|col| column_entries(task, col, rows))
            .collect();
        self.cols.extend(fresh);

        let n = columns.len();
        let m = task.num_examples();
        let lp = assemble(task, rows, &self.cols, self.c);
        let sol = match &self.basis {
            Some((b, old_n)) => lp::solve_warm(&lp, &shift_basis(b, *old_n, n))?,
            None => lp::solve(&lp)?,
        };
        if sol.status != LpStatus::Optimal {
            return Err(Error::Solver(format!("m-slack master is {:?}", sol.status)));
        }
        self.basis = Some((sol.basis.clone(), n));
        let mut mu = DualWeights::new();
        for ((i, y), &l) in rows.iter().zip(&sol.duals) {
            if l > 0.0 {
                mu.set(*i, y.clone(), l);
            }
        }
        Ok(MasterSolution {
            weights: sol.primal[..n].to_vec(),
            objective: sol.objective,
            xi: sol.primal[n..n + m].to_vec(),
            mu,
            lambdas: sol.duals.clone(),
            rounds: 1,
            gap: 0.0,
            trace: Vec::new(),
            lp,
        })
    }
}

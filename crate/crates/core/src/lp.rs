//! Revised primal simplex for `min c.x  s.t.  A x >= b, x >= 0`, returning
//! primal values, row duals and the final basis.
//!
//! Rows become equalities `A x - s + a = b` with surplus `s` and artificial
//! `a`. Basic columns with a single nonzero (surpluses, artificials, slack
//! variables that appear in one row) are handled implicitly; only the
//! remaining "general" basic columns form a dense matrix on the rows they
//! leave uncovered, which is refactored by LU at every pivot. For the
//! masters this keeps the dense part no larger than the number of
//! weak-learner weights in the basis.

use std::fmt::Write as _;

use crate::error::{Error, Result};

const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const GAP_TOL: f64 = 1e-8;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_LIMIT: usize = 50;
const NONE: usize = usize::MAX;

/// `coeffs . x >= rhs`, with `coeffs` as sparse (variable, value) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        LinearProgram {
            objective,
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push(Constraint { coeffs, rhs });
    }

    pub fn add_dense_row(&mut self, coeffs: &[f64], rhs: f64) {
        let sparse = coeffs
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect();
        self.add_row(sparse, rhs);
    }

    pub fn row_activity(&self, r: usize, x: &[f64]) -> f64 {
        self.rows[r].coeffs.iter().map(|(j, v)| v * x[*j]).sum()
    }

    /// Plain-text tableau: objective row, then one dense row per constraint.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# lp vars={} rows={}", self.num_vars(), self.num_rows());
        let fmt = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "min {}", fmt(&self.objective));
        for (r, row) in self.rows.iter().enumerate() {
            let mut dense = vec![0.0; self.num_vars()];
            for (j, v) in &row.coeffs {
                dense[*j] += v;
            }
            let _ = writeln!(s, "r{r} {} >= {}", fmt(&dense), row.rhs);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisEntry {
    Structural(usize),
    Surplus(usize),
    Artificial(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    /// One nonnegative dual per row.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub basis: Vec<BasisEntry>,
    pub pivots: usize,
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    Simplex::new(lp)?.run(None)
}

/// Solve starting from a previous basis. Entries that no longer fit are
/// dropped; rows left uncovered get their surplus or artificial column.
pub fn solve_warm(lp: &LinearProgram, hint: &[BasisEntry]) -> Result<LpSolution> {
    Simplex::new(lp)?.run(Some(hint))
}

struct Lu {
    n: usize,
    a: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(mut a: Vec<f64>, n: usize) -> Option<Lu> {
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for i in k + 1..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-11 * scale {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let piv = a[k * n + k];
            for i in k + 1..n {
                let l = a[i * n + k] / piv;
                if l != 0.0 {
                    a[i * n + k] = l;
                    for j in k + 1..n {
                        a[i * n + j] -= l * a[k * n + j];
                    }
                } else {
                    a[i * n + k] = 0.0;
                }
            }
        }
        Some(Lu { n, a, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = (0..n).map(|i| b[self.perm[i]]).collect();
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= self.a[i * n + j] * y[j];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s -= self.a[i * n + j] * y[j];
            }
            y[i] = s / self.a[i * n + i];
        }
        y
    }

    fn solve_transposed(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut v = b.to_vec();
        for i in 0..n {
            let mut s = v[i];
            for j in 0..i {
                s -= self.a[j * n + i] * v[j];
            }
            v[i] = s / self.a[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = v[i];
            for j in i + 1..n {
                s -= self.a[j * n + i] * v[j];
            }
            v[i] = s;
        }
        let mut z = vec![0.0; n];
        for i in 0..n {
            z[self.perm[i]] = v[i];
        }
        z
    }
}

/// Basis factorization: a dense LU on the non-unit nucleus plus
/// product-form updates for pivots since the last refactorization.
struct Factor {
    /// Basic unit column covering each row, or NONE.
    owner: Vec<usize>,
    general: Vec<usize>,
    uncovered: Vec<usize>,
    lu: Lu,
    /// Current basic column at each position; positions follow the
    /// factorization order (general columns, then owners by row).
    order: Vec<usize>,
    /// Position in `order` of each row owner at factorization time.
    owner_pos: Vec<usize>,
    /// Per pivot: position, pivot element, and the other nonzeros of the
    /// entering column in position coordinates.
    etas: Vec<Eta>,
    eta_nnz: usize,
}

struct Eta {
    pos: usize,
    pivot: f64,
    rest: Vec<(usize, f64)>,
}

impl Factor {
    /// Refactorize once applying the updates costs more than a fresh LU.
    fn stale(&self, rows: usize) -> bool {
        let k = self.general.len();
        self.etas.len() >= REFACTOR_EVERY || self.eta_nnz > k * k + rows
    }

    fn update(&mut self, pos: usize, entering: usize, alpha: &[(usize, f64)]) {
        self.order[pos] = entering;
        let rest: Vec<(usize, f64)> = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &(_, a))| i != pos && a != 0.0)
            .map(|(i, &(_, a))| (i, a))
            .collect();
        self.eta_nnz += rest.len() + 1;
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos].1,
            rest,
        });
    }
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    n: usize,
    m: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
    pivots: usize,
    pivot_cap: usize,
}

#[derive(PartialEq)]
enum Phase {
    One,
    Two,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram) -> Result<Self> {
        let n = lp.num_vars();
        let m = lp.num_rows();
        if n == 0 {
            return Err(Error::Solver("linear program without variables".into()));
        }
        if lp.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::Solver("non-finite objective coefficient".into()));
        }
        // bucket by column; rows arrive in order, so each bucket is sorted by row
        let mut counts = vec![0usize; n + 1];
        for (r, row) in lp.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(Error::Solver(format!("non-finite rhs in row {r}")));
            }
            for &(j, v) in &row.coeffs {
                if j >= n {
                    return Err(Error::Solver(format!("row {r} references variable {j} of {n}")));
                }
                if !v.is_finite() {
                    return Err(Error::Solver(format!("non-finite coefficient in row {r}")));
                }
                counts[j + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let mut fill = counts.clone();
        let mut raw = vec![(0usize, 0.0f64); counts[n]];
        for (r, row) in lp.rows.iter().enumerate() {
            for &(j, v) in &row.coeffs {
                raw[fill[j]] = (r, v);
                fill[j] += 1;
            }
        }
        let mut col_ptr = vec![0; n + 1];
        let mut row_idx = Vec::with_capacity(raw.len());
        let mut vals = Vec::with_capacity(raw.len());
        for j in 0..n {
            let mut k = counts[j];
            while k < counts[j + 1] {
                let r = raw[k].0;
                let mut v = 0.0;
                while k < counts[j + 1] && raw[k].0 == r {
                    v += raw[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    row_idx.push(r);
                    vals.push(v);
                }
            }
            col_ptr[j + 1] = row_idx.len();
        }
        Ok(Simplex {
            lp,
            n,
            m,
            col_ptr,
            row_idx,
            vals,
            b: lp.rows.iter().map(|r| r.rhs).collect(),
            pivots: 0,
            pivot_cap: 50 * (n + m) + 1000,
        })
    }

    fn is_artificial(&self, col: usize) -> bool {
        col >= self.n + self.m
    }

    /// Row and coefficient of a column with exactly one nonzero.
    fn unit(&self, col: usize) -> Option<(usize, f64)> {
        if col < self.n {
            let (s, e) = (self.col_ptr[col], self.col_ptr[col + 1]);
            (e - s == 1).then(|| (self.row_idx[s], self.vals[s]))
        } else if col < self.n + self.m {
            Some((col - self.n, -1.0))
        } else {
            Some((col - self.n - self.m, 1.0))
        }
    }

    fn for_each_entry(&self, col: usize, mut f: impl FnMut(usize, f64)) {
        if col < self.n {
            for k in self.col_ptr[col]..self.col_ptr[col + 1] {
                f(self.row_idx[k], self.vals[k]);
            }
        } else if col < self.n + self.m {
            f(col - self.n, -1.0);
        } else {
            f(col - self.n - self.m, 1.0);
        }
    }

    fn cost(&self, col: usize, phase: &Phase) -> f64 {
        match phase {
            Phase::One => {
                if self.is_artificial(col) {
                    1.0
                } else {
                    0.0
                }
            }
            Phase::Two => {
                if col < self.n {
                    self.lp.objective[col]
                } else {
                    0.0
                }
            }
        }
    }

    fn factor(&self, basis: &[usize]) -> Option<Factor> {
        let mut owner = vec![NONE; self.m];
        let mut general = Vec::new();
        for &col in basis {
            match self.unit(col) {
                Some((r, _)) => {
                    if owner[r] != NONE {
                        return None;
                    }
                    owner[r] = col;
                }
                None => general.push(col),
            }
        }
        let uncovered: Vec<usize> = (0..self.m).filter(|&r| owner[r] == NONE).collect();
        if uncovered.len() != general.len() {
            return None;
        }
        let k = general.len();
        let mut local = vec![NONE; self.m];
        for (i, &r) in uncovered.iter().enumerate() {
            local[r] = i;
        }
        let mut dense = vec![0.0; k * k];
        for (gi, &g) in general.iter().enumerate() {
            self.for_each_entry(g, |r, v| {
                if local[r] != NONE {
                    dense[local[r] * k + gi] = v;
                }
            });
        }
        let lu = Lu::factor(dense, k)?;
        let mut order = general.clone();
        let mut owner_pos = vec![NONE; self.m];
        for r in 0..self.m {
            if owner[r] != NONE {
                owner_pos[r] = order.len();
                order.push(owner[r]);
            }
        }
        Some(Factor {
            owner,
            general,
            uncovered,
            lu,
            order,
            owner_pos,
            etas: Vec::new(),
            eta_nnz: 0,
        })
    }

    /// Solve `B x = rhs`; returns values keyed by column through `out`,
    /// in position order.
    fn solve_b(&self, f: &Factor, rhs: &[f64], out: &mut Vec<(usize, f64)>) {
        let x = self.solve_positions(f, rhs);
        out.clear();
        out.extend(f.order.iter().copied().zip(x));
    }

    fn solve_positions(&self, f: &Factor, rhs: &[f64]) -> Vec<f64> {
        let rhs_u: Vec<f64> = f.uncovered.iter().map(|&r| rhs[r]).collect();
        let mut x = f.lu.solve(&rhs_u);
        let mut t = rhs.to_vec();
        for (&g, &v) in f.general.iter().zip(&x) {
            if v != 0.0 {
                self.for_each_entry(g, |r, a| t[r] -= a * v);
            }
        }
        for r in 0..self.m {
            let u = f.owner[r];
            if u != NONE {
                let (_, a) = self.unit(u).expect("owner is a unit column");
                x.push(t[r] / a);
            }
        }
        for eta in &f.etas {
            let xp = x[eta.pos] / eta.pivot;
            if xp != 0.0 {
                for &(i, a) in &eta.rest {
                    x[i] -= a * xp;
                }
            }
            x[eta.pos] = xp;
        }
        x
    }

    /// Solve `y^T B = c_B^T`.
    fn solve_bt(&self, f: &Factor, phase: &Phase) -> Vec<f64> {
        let c: Vec<f64> = f.order.iter().map(|&col| self.cost(col, phase)).collect();
        self.solve_bt_positions(f, c)
    }

    /// Solve `y^T B = c^T` for a cost vector in position order.
    fn solve_bt_positions(&self, f: &Factor, mut c: Vec<f64>) -> Vec<f64> {
        for eta in f.etas.iter().rev() {
            let mut s = c[eta.pos];
            for &(i, a) in &eta.rest {
                s -= c[i] * a;
            }
            c[eta.pos] = s / eta.pivot;
        }
        let mut y = vec![0.0; self.m];
        for r in 0..self.m {
            let u = f.owner[r];
            if u != NONE {
                let (_, a) = self.unit(u).expect("owner is a unit column");
                y[r] = c[f.owner_pos[r]] / a;
            }
        }
        let rhs: Vec<f64> = f
            .general
            .iter()
            .enumerate()
            .map(|(gi, &g)| {
                let mut s = c[gi];
                self.for_each_entry(g, |r, a| {
                    if f.owner[r] != NONE {
                        s -= a * y[r];
                    }
                });
                s
            })
            .collect();
        let yu = f.lu.solve_transposed(&rhs);
        for (&r, v) in f.uncovered.iter().zip(yu) {
            y[r] = v;
        }
        y
    }

    fn crash(&self) -> Vec<usize> {
        let mut unit_for_row = vec![NONE; self.m];
        for j in 0..self.n {
            if let Some((r, v)) = self.unit(j) {
                if v > 0.0 && unit_for_row[r] == NONE {
                    unit_for_row[r] = j;
                }
            }
        }
        (0..self.m)
            .map(|r| {
                if self.b[r] <= 0.0 {
                    self.n + r
                } else if unit_for_row[r] != NONE {
                    unit_for_row[r]
                } else {
                    self.n + self.m + r
                }
            })
            .collect()
    }

    fn warm_basis(&self, hint: &[BasisEntry]) -> Option<Vec<usize>> {
        let total = self.n + 2 * self.m;
        let mut seen = vec![false; total];
        let mut basis = Vec::with_capacity(self.m);
        for e in hint {
            let col = match *e {
                BasisEntry::Structural(j) if j < self.n && self.col_ptr[j + 1] > self.col_ptr[j] => j,
                BasisEntry::Surplus(r) if r < self.m => self.n + r,
                BasisEntry::Artificial(r) if r < self.m => self.n + self.m + r,
                _ => continue,
            };
            if !seen[col] {
                seen[col] = true;
                basis.push(col);
            }
        }
        if basis.len() > self.m {
            return None;
        }
        let mut covered = vec![false; self.m];
        for &col in &basis {
            if let Some((r, _)) = self.unit(col) {
                covered[r] = true;
            }
        }
        let need = self.m - basis.len();
        let fill: Vec<usize> = (0..self.m).rev().filter(|&r| !covered[r]).take(need).collect();
        if fill.len() < need {
            return None;
        }
        basis.extend(fill.iter().map(|&r| self.n + r));
        self.factor(&basis)?;
        Some(basis)
    }

    /// Swap every negative basic slack for its partner (surplus for
    /// artificial and back). Fails if a structural variable is negative.
    fn flip_negative(&self, basis: &mut [usize]) -> Option<()> {
        let f = self.factor(basis)?;
        let mut x = Vec::new();
        self.solve_b(&f, &self.b, &mut x);
        for &(col, v) in &x {
            if v < -FEAS_TOL * (1.0 + v.abs()) {
                if col < self.n {
                    return None;
                }
                let pos = basis.iter().position(|&c| c == col).expect("basic");
                basis[pos] = if self.is_artificial(col) {
                    col - self.m
                } else {
                    col + self.m
                };
            }
        }
        Some(())
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            let mut d = self.lp.objective[j];
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                d -= self.vals[k] * y[self.row_idx[k]];
            }
            d
        } else {
            y[j - self.n]
        }
    }

    fn dual_feasible(&self, basis: &[usize]) -> Option<bool> {
        let f = self.factor(basis)?;
        if basis.iter().any(|&c| self.is_artificial(c)) {
            return Some(false);
        }
        let y = self.solve_bt(&f, &Phase::Two);
        let mut in_basis = vec![false; self.n + self.m];
        for &c in basis {
            in_basis[c] = true;
        }
        Some(
            (0..self.n + self.m)
                .all(|j| in_basis[j] || self.reduced_cost(j, &y) >= -OPT_TOL * (1.0 + self.cost(j, &Phase::Two).abs())),
        )
    }

    /// Dual simplex from a dual-feasible basis. Returns false when the
    /// primal problem is infeasible.
    fn dual_phase(&mut self, basis: &mut [usize]) -> Result<bool> {
        let total = self.n + self.m;
        let mut in_basis = vec![false; total];
        for &c in basis.iter() {
            in_basis[c] = true;
        }
        let mut x = Vec::new();
        let mut alpha = Vec::new();
        let mut column = vec![0.0; self.m];
        let mut factor: Option<Factor> = None;
        loop {
            if factor.as_ref().is_none_or(|f| f.stale(self.m)) {
                factor = Some(self.factor(basis).ok_or_else(singular)?);
            }
            let f = factor.as_mut().expect("factorized");
            self.solve_b(f, &self.b, &mut x);
            let mut leave: Option<(usize, f64)> = None;
            for (p, &(_, v)) in x.iter().enumerate() {
                if v < -FEAS_TOL * (1.0 + v.abs()) && leave.is_none_or(|(_, lv)| v < lv) {
                    leave = Some((p, v));
                }
            }
            let Some((p, _)) = leave else {
                return Ok(true);
            };
            let leaving = f.order[p];
            let mut unit = vec![0.0; f.order.len()];
            unit[p] = 1.0;
            let rho = self.solve_bt_positions(f, unit);
            let y = self.solve_bt(f, &Phase::Two);
            let mut entering = NONE;
            let mut best = f64::INFINITY;
            for j in 0..total {
                if in_basis[j] {
                    continue;
                }
                let a = if j < self.n {
                    let mut a = 0.0;
                    for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                        a += self.vals[k] * rho[self.row_idx[k]];
                    }
                    a
                } else {
                    -rho[j - self.n]
                };
                if a < -PIVOT_TOL {
                    let ratio = self.reduced_cost(j, &y).max(0.0) / -a;
                    if ratio < best {
                        best = ratio;
                        entering = j;
                    }
                }
            }
            if entering == NONE {
                return Ok(false);
            }
            column.iter_mut().for_each(|v| *v = 0.0);
            self.for_each_entry(entering, |r, v| column[r] = v);
            self.solve_b(f, &column, &mut alpha);
            let pos = basis.iter().position(|&c| c == leaving).expect("leaving is basic");
            basis[pos] = entering;
            in_basis[leaving] = false;
            in_basis[entering] = true;
            f.update(p, entering, &alpha);
            self.pivots += 1;
            if self.pivots > self.pivot_cap {
                return Err(Error::Solver(format!("no optimum after {} pivots", self.pivots)));
            }
        }
    }

    fn run(mut self, hint: Option<&[BasisEntry]>) -> Result<LpSolution> {
        let mut basis = match hint.and_then(|h| self.warm_basis(h)) {
            Some(mut warm) => {
                if self.dual_feasible(&warm) == Some(true) {
                    if !self.dual_phase(&mut warm)? {
                        return Ok(self.empty(LpStatus::Infeasible, &warm));
                    }
                    warm
                } else if self.flip_negative(&mut warm).is_some() {
                    warm
                } else {
                    self.crash()
                }
            }
            None => self.crash(),
        };

        if basis.iter().any(|&c| self.is_artificial(c)) {
            self.phase(&mut basis, Phase::One)?;
            let f = self.factor(&basis).ok_or_else(singular)?;
            let mut x = Vec::new();
            self.solve_b(&f, &self.b, &mut x);
            let infeas: f64 = x
                .iter()
                .filter(|(c, _)| self.is_artificial(*c))
                .map(|(_, v)| v.max(0.0))
                .sum();
            let bscale = self.b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            if infeas > FEAS_TOL * bscale * (self.m as f64).max(1.0) {
                return Ok(self.empty(LpStatus::Infeasible, &basis));
            }
        }
        if let Outcome::Unbounded = self.phase(&mut basis, Phase::Two)? {
            return Ok(self.empty(LpStatus::Unbounded, &basis));
        }
        self.finish(&basis)
    }

    fn empty(&self, status: LpStatus, basis: &[usize]) -> LpSolution {
        LpSolution {
            status,
            primal: vec![0.0; self.n],
            duals: vec![0.0; self.m],
            objective: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            basis: self.entries(basis),
            pivots: self.pivots,
        }
    }

    fn entries(&self, basis: &[usize]) -> Vec<BasisEntry> {
        basis
            .iter()
            .map(|&c| {
                if c < self.n {
                    BasisEntry::Structural(c)
                } else if c < self.n + self.m {
                    BasisEntry::Surplus(c - self.n)
                } else {
                    BasisEntry::Artificial(c - self.n - self.m)
                }
            })
            .collect()
    }

    fn phase(&mut self, basis: &mut [usize], phase: Phase) -> Result<Outcome> {
        let total = self.n + self.m;
        let mut in_basis = vec![false; self.n + 2 * self.m];
        for &c in basis.iter() {
            in_basis[c] = true;
        }
        let mut bland = false;
        let mut degenerate = 0usize;
        let mut x = Vec::new();
        let mut alpha = Vec::new();
        let mut column = vec![0.0; self.m];
        let mut factor: Option<Factor> = None;

        loop {
            if factor.as_ref().is_none_or(|f| f.stale(self.m)) {
                factor = Some(self.factor(basis).ok_or_else(singular)?);
            }
            let f = factor.as_mut().expect("factorized");
            self.solve_b(f, &self.b, &mut x);
            let y = self.solve_bt(f, &phase);

            let mut entering = NONE;
            let mut best = -OPT_TOL;
            for j in 0..total {
                if in_basis[j] {
                    continue;
                }
                let d = if j < self.n {
                    let mut d = self.cost(j, &phase);
                    for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                        d -= self.vals[k] * y[self.row_idx[k]];
                    }
                    d
                } else {
                    y[j - self.n]
                };
                let tol = OPT_TOL * (1.0 + self.cost(j, &phase).abs());
                if d < -tol {
                    if bland {
                        entering = j;
                        break;
                    }
                    if d < best {
                        best = d;
                        entering = j;
                    }
                }
            }
            if entering == NONE {
                return Ok(Outcome::Optimal);
            }

            column.iter_mut().for_each(|v| *v = 0.0);
            self.for_each_entry(entering, |r, v| column[r] = v);
            self.solve_b(f, &column, &mut alpha);
            // solve_b emits columns in position order for any right-hand side
            let mut leave: Option<(usize, f64, f64)> = None;
            for (&(col, a), &(_, xv)) in alpha.iter().zip(&x) {
                let ratio = if phase == Phase::Two && self.is_artificial(col) {
                    if a.abs() <= PIVOT_TOL {
                        continue;
                    }
                    0.0
                } else {
                    if a <= PIVOT_TOL {
                        continue;
                    }
                    xv.max(0.0) / a
                };
                let better = match leave {
                    None => true,
                    Some((lc, lr, la)) => {
                        let tie = (ratio - lr).abs() <= 1e-12 * (1.0 + lr.abs());
                        if !tie {
                            ratio < lr
                        } else if bland {
                            col < lc
                        } else if (a.abs() - la).abs() > 1e-12 * la {
                            a.abs() > la
                        } else {
                            col < lc
                        }
                    }
                };
                if better {
                    leave = Some((col, ratio, a.abs()));
                }
            }
            let Some((leaving, ratio, _)) = leave else {
                return Ok(Outcome::Unbounded);
            };

            if ratio <= 1e-12 {
                degenerate += 1;
                if degenerate >= DEGENERATE_LIMIT {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            let pos = basis.iter().position(|&c| c == leaving).expect("leaving is basic");
            basis[pos] = entering;
            let fpos = f.order.iter().position(|&c| c == leaving).expect("leaving is basic");
            f.update(fpos, entering, &alpha);
            in_basis[leaving] = false;
            in_basis[entering] = true;
            self.pivots += 1;
            if self.pivots > self.pivot_cap {
                return Err(Error::Solver(format!("no optimum after {} pivots", self.pivots)));
            }
        }
    }

    fn finish(&self, basis: &[usize]) -> Result<LpSolution> {
        let f = self.factor(basis).ok_or_else(singular)?;
        let mut xb = Vec::new();
        self.solve_b(&f, &self.b, &mut xb);
        let mut x = vec![0.0; self.n];
        for &(col, v) in &xb {
            if col < self.n {
                x[col] = clip(v);
            }
        }
        let mut y = self.solve_bt(&f, &Phase::Two);
        for v in &mut y {
            *v = clip(*v);
        }

        let primal_obj: f64 = self.lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        let dual_obj: f64 = self.b.iter().zip(&y).map(|(b, v)| b * v).sum();

        for r in 0..self.m {
            let act = self.lp.row_activity(r, &x);
            let b = self.b[r];
            if act < b - FEAS_TOL * (1.0 + b.abs()) * 10.0 {
                return Err(Error::Solver(format!("row {r} infeasible at optimum: {act} < {b}")));
            }
            if y[r] < -FEAS_TOL {
                return Err(Error::Solver(format!("negative dual {} on row {r}", y[r])));
            }
        }
        for j in 0..self.n {
            let mut d = self.lp.objective[j];
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                d -= self.vals[k] * y[self.row_idx[k]];
            }
            if d < -FEAS_TOL * (1.0 + self.lp.objective[j].abs()) * 10.0 {
                return Err(Error::Solver(format!("dual infeasible on column {j}: {d}")));
            }
        }
        if (primal_obj - dual_obj).abs() > GAP_TOL * (1.0 + primal_obj.abs()) {
            return Err(Error::Solver(format!("duality gap {primal_obj} vs {dual_obj}")));
        }
        for v in &mut x {
            *v = v.max(0.0);
        }
        for v in &mut y {
            *v = v.max(0.0);
        }
        Ok(LpSolution {
            status: LpStatus::Optimal,
            primal: x,
            duals: y,
            objective: primal_obj,
            basis: self.entries(basis),
            pivots: self.pivots,
        })
    }
}

fn singular() -> Error {
    Error::Solver("singular basis".into())
}

fn clip(v: f64) -> f64 {
    if v.abs() < 1e-12 {
        0.0
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lp(c: &[f64], rows: &[(&[f64], f64)]) -> LinearProgram {
        let mut p = LinearProgram::new(c.to_vec());
        for (a, b) in rows {
            p.add_dense_row(a, *b);
        }
        p
    }

    #[test]
    fn single_bound() {
        let s = solve(&lp(&[1.0], &[(&[1.0], 3.0)])).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.primal, vec![3.0]);
        assert_eq!(s.duals, vec![1.0]);
        assert_eq!(s.objective, 3.0);
    }

    #[test]
    fn face_tie_picks_first_vertex() {
        let s = solve(&lp(&[1.0, 1.0], &[(&[1.0, 1.0], 1.0)])).unwrap();
        assert_eq!(s.objective, 1.0);
        assert_eq!(s.primal, vec![1.0, 0.0]);
    }

    #[test]
    fn no_rows() {
        let s = solve(&lp(&[1.0, 2.0], &[])).unwrap();
        assert_eq!(s.primal, vec![0.0, 0.0]);
        let u = solve(&lp(&[-1.0], &[])).unwrap();
        assert_eq!(u.status, LpStatus::Unbounded);
    }

    #[test]
    fn infeasible_and_unbounded() {
        // x1 >= 2 and -x1 >= -1
        let s = solve(&lp(&[1.0], &[(&[1.0], 2.0), (&[-1.0], -1.0)])).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
        let s = solve(&lp(&[-1.0, 0.0], &[(&[1.0, -1.0], 0.0)])).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn resolve_is_bitwise_identical() {
        let p = lp(
            &[1.0, 2.0, 0.5],
            &[
                (&[1.0, 1.0, 0.0], 1.0),
                (&[0.0, 1.0, 1.0], 2.0),
                (&[1.0, -1.0, 2.0], 0.5),
            ],
        );
        let a = solve(&p).unwrap();
        let b = solve(&p).unwrap();
        assert_eq!(a, b);
    }

    fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
            if a[p][k].abs() < 1e-10 {
                return None;
            }
            a.swap(k, p);
            b.swap(k, p);
            for i in 0..n {
                if i != k {
                    let l = a[i][k] / a[k][k];
                    for j in k..n {
                        a[i][j] -= l * a[k][j];
                    }
                    b[i] -= l * b[k];
                }
            }
        }
        Some((0..n).map(|i| b[i] / a[i][i]).collect())
    }

    /// Minimum over all basic feasible solutions.
    fn vertex_optimum(c: &[f64], rows: &[(Vec<f64>, f64)]) -> Option<f64> {
        let n = c.len();
        let mut all: Vec<(Vec<f64>, f64)> = rows.to_vec();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            all.push((e, 0.0));
        }
        let total = all.len();
        let mut best: Option<f64> = None;
        let mut pick = vec![0usize; n];
        fn rec(
            start: usize,
            depth: usize,
            pick: &mut Vec<usize>,
            all: &[(Vec<f64>, f64)],
            c: &[f64],
            best: &mut Option<f64>,
        ) {
            let n = c.len();
            if depth == n {
                let a: Vec<Vec<f64>> = pick.iter().map(|&k| all[k].0.clone()).collect();
                let b: Vec<f64> = pick.iter().map(|&k| all[k].1).collect();
                if let Some(x) = gauss(a, b) {
                    let ok = all
                        .iter()
                        .all(|(a, b)| a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() >= b - 1e-9);
                    if ok {
                        let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                        if best.is_none_or(|b| v < b) {
                            *best = Some(v);
                        }
                    }
                }
                return;
            }
            for k in start..all.len() {
                pick[depth] = k;
                rec(k + 1, depth + 1, pick, all, c, best);
            }
        }
        let _ = total;
        rec(0, 0, &mut pick, &all, c, &mut best);
        best
    }

    #[test]
    fn random_lps_match_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..50 {
            let n = rng.random_range(1..=6);
            let m = rng.random_range(1..=8);
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
            let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
            let rows: Vec<(Vec<f64>, f64)> = (0..m)
                .map(|_| {
                    let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let act: f64 = a.iter().zip(&x0).map(|(p, q)| p * q).sum();
                    (a, act - rng.random_range(0.0..0.5))
                })
                .collect();
            let p = lp(&c, &rows.iter().map(|(a, b)| (a.as_slice(), *b)).collect::<Vec<_>>());
            let s = solve(&p).unwrap();
            assert_eq!(s.status, LpStatus::Optimal);
            let oracle = vertex_optimum(&c, &rows).unwrap();
            assert!(
                (s.objective - oracle).abs() <= 1e-8 * (1.0 + oracle.abs()),
                "{} vs {oracle}",
                s.objective
            );
            for (r, (a, b)) in rows.iter().enumerate() {
                let act: f64 = a.iter().zip(&s.primal).map(|(p, q)| p * q).sum();
                assert!(s.duals[r] * (act - b) <= 1e-7);
            }
        }
    }

    #[test]
    fn warm_start_reaches_same_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = 5;
            let mut p = LinearProgram::new((0..n).map(|_| rng.random_range(0.5..1.5)).collect());
            for _ in 0..4 {
                let a: Vec<f64> = (0..n).map(|_| rng.random_range(-0.2..1.0)).collect();
                p.add_dense_row(&a, rng.random_range(0.0..1.0));
            }
            let first = solve(&p).unwrap();
            for _ in 0..3 {
                let a: Vec<f64> = (0..n).map(|_| rng.random_range(-0.2..1.0)).collect();
                p.add_dense_row(&a, rng.random_range(0.5..1.5));
            }
            let cold = solve(&p).unwrap();
            let warm = solve_warm(&p, &first.basis).unwrap();
            assert_eq!(cold.status, warm.status);
            assert!((cold.objective - warm.objective).abs() < 1e-9);
        }
    }

    #[test]
    fn dump_lists_every_row() {
        let p = lp(&[1.0, 2.0], &[(&[1.0, 0.0], 3.0)]);
        let d = p.dump();
        assert!(d.contains("min 1 2"));
        assert!(d.contains("r0 1 0 >= 3"));
    }
}

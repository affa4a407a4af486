//! The outer boosting loop: generate the most violated weak-learner column
//! from the current duals, add it, re-solve the master, and repeat until no
//! column has edge above `1 - eps_cg`.

use std::time::Instant;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::lp::LinearProgram;
use crate::master::{MSlackMaster, MasterSolution, OneSlackMaster};
use crate::model::{DualWeights, SolverKind, TrainParams, WeakColumn};
use crate::task::{decrease_lower_bound, objective, weak_edge, StructuredTask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Best edge at most `1 - eps_cg`.
    Converged,
    /// The subproblem returned columns already in the model.
    DuplicateColumn,
    /// No learner has a nonzero weighted edge.
    NoEdge,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Restricted-master LP objective.
    pub objective: f64,
    /// Primal objective `sum w + (C/m) sum_i hinge_i` of the current model.
    pub primal: f64,
    pub edge: f64,
    pub columns: usize,
    pub cp_rounds: usize,
    pub master_seconds: f64,
    pub total_seconds: f64,
}

/// Dual feasibility of one master solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualCheck {
    pub iteration: usize,
    /// `max_i sum_y mu_(i,y) - C/m`.
    pub max_mass_excess: f64,
    pub min_mass: f64,
    /// `sum lambda - C`.
    pub lambda_excess: f64,
    /// `max_j sum mu dpsi_j - 1` over model columns.
    pub max_edge_excess: f64,
    /// `max |sum mu dpsi_j - 1|` over columns with positive weight.
    pub max_tight_gap: f64,
}

/// Convergence diagnostics for one iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticRecord {
    pub iteration: usize,
    pub previous_objective: f64,
    pub objective: f64,
    /// `min over the alpha grid of (actual decrease - bound)`.
    pub min_bound_slack: f64,
    pub best_alpha: f64,
    pub best_bound: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput<L: Ord> {
    pub columns: Vec<WeakColumn>,
    pub weights: Vec<f64>,
    pub trace: Vec<IterationRecord>,
    pub stop: StopReason,
    pub mu: DualWeights<L>,
    pub diagnostics: Vec<DiagnosticRecord>,
    pub dual_checks: Vec<DualCheck>,
    pub last_lp: Option<LinearProgram>,
    /// Primal objective of the final model.
    pub final_objective: f64,
}

/// Smallest cutting-plane tolerance ever used when re-solving.
const EPS_FLOOR: f64 = 1e-9;

/// Allowed objective increase between iterations.
const MONOTONE_TOL: f64 = 1e-9;

enum Master<L> {
    One(OneSlackMaster<L>),
    M(MSlackMaster<L>),
}

/// Grid of step sizes used for the per-iteration decrease bound.
pub fn alpha_grid() -> Vec<f64> {
    (0..=200).map(|k| k as f64 / 100.0).collect()
}

pub fn train<T: StructuredTask>(task: &T, params: &TrainParams) -> Result<TrainOutput<T::Label>> {
    train_with(task, params, |_, _| {})
}

/// [`train`] calling `observe(columns, weights)` after every master solve.
pub fn train_with<T: StructuredTask>(
    task: &T,
    params: &TrainParams,
    mut observe: impl FnMut(&[WeakColumn], &[f64]),
) -> Result<TrainOutput<T::Label>> {
    params.validate()?;
    let m = task.num_examples();
    if m == 0 {
        return invalid("empty training set");
    }
    let c = params.c;
    let box_cap = c / m as f64;

    let mut mu = DualWeights::new();
    for i in 0..m {
        let y0 = task.initial_label(i);
        if task.loss(i, &y0) > 0.0 {
            mu.set(i, y0, box_cap);
        }
    }

    let mut master = match params.solver {
        SolverKind::OneSlack => Master::One(OneSlackMaster::new(c, params.eps_cp, params.max_cp_rounds)),
        SolverKind::MSlack => {
            if (0..m).any(|i| task.alternatives(i).is_none()) {
                return invalid("this task needs the 1-slack solver");
            }
            Master::M(MSlackMaster::new(c, params.mslack_cap))
        }
    };

    let start = Instant::now();
    let mut columns: Vec<WeakColumn> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut trace = Vec::new();
    let mut diagnostics = Vec::new();
    let mut dual_checks = Vec::new();
    let mut last_lp = None;
    let mut prev_objective = objective(task, &columns, &weights, c)?;
    let mut stop = StopReason::MaxIters;

    // once a duplicate column forced a tighter master, never loosen again
    let mut eps_cap = f64::INFINITY;
    let duplicate_floor = (params.eps_cp * 1e-3).max(EPS_FLOOR);
    for iteration in 1..=params.max_iters {
        let t0 = Instant::now();
        let next = loop {
            let Some(batch) = task.generate_columns(&mu, &params.weak)? else {
                break Err(StopReason::NoEdge);
            };
            let edge = batch.best_edge();
            if edge <= 1.0 - params.eps_cg {
                break Err(StopReason::Converged);
            }
            let selected = batch.columns[batch.selected].clone();
            let fresh: Vec<WeakColumn> = batch.columns.into_iter().filter(|col| !columns.contains(col)).collect();
            if !fresh.is_empty() {
                break Ok((edge, selected, fresh));
            }
            // an inexact master can leave a model column with edge above one
            match &mut master {
                Master::One(one) if one.eps() > duplicate_floor => {
                    eps_cap = (one.eps() / 10.0).max(duplicate_floor);
                    one.set_eps(eps_cap);
                    let sol = one.solve(task, &columns)?;
                    weights = sol.weights;
                    mu = sol.mu;
                    prev_objective = objective(task, &columns, &weights, c)?;
                }
                _ => break Err(StopReason::DuplicateColumn),
            }
        };
        let (edge, selected, fresh) = match next {
            Ok(found) => found,
            Err(reason) => {
                stop = reason;
                break;
            }
        };
        let prev_columns = columns.clone();
        let prev_weights = weights.clone();
        columns.extend(fresh);

        let sol: MasterSolution<T::Label> = match &mut master {
            Master::One(one) => {
                if params.adaptive_eps {
                    let loose = (0.5 * (edge - 1.0)).min(10.0 * params.eps_cp);
                    one.set_eps(params.eps_cp.max(loose).min(eps_cap));
                }
                one.solve(task, &columns)?
            }
            Master::M(ms) => ms.solve(task, &columns)?,
        };
        let mut cur = objective(task, &columns, &sol.weights, c)?;
        // an inexact master can lose ground; keep the incumbent weights then
        let mut new_weights = sol.weights.clone();
        if cur > prev_objective + MONOTONE_TOL {
            new_weights = prev_weights.clone();
            new_weights.resize(columns.len(), 0.0);
            cur = objective(task, &columns, &new_weights, c)?;
        }
        let master_seconds = t0.elapsed().as_secs_f64();
        weights = new_weights;
        mu = sol.mu.clone();
        observe(&columns, &weights);

        trace.push(IterationRecord {
            iteration,
            objective: sol.objective,
            primal: cur,
            edge,
            columns: columns.len(),
            cp_rounds: sol.rounds,
            master_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        });

        if params.track_diagnostics {
            dual_checks.push(dual_check(task, &sol, &columns, c, iteration));
            let prev = prev_objective;
            let actual = prev - cur;
            let mut rec = DiagnosticRecord {
                iteration,
                previous_objective: prev,
                objective: cur,
                min_bound_slack: f64::INFINITY,
                best_alpha: 0.0,
                best_bound: f64::NEG_INFINITY,
            };
            for alpha in alpha_grid() {
                let bound = decrease_lower_bound(task, &prev_columns, &prev_weights, &selected, alpha, c)?;
                rec.min_bound_slack = rec.min_bound_slack.min(actual - bound);
                if bound > rec.best_bound {
                    rec.best_bound = bound;
                    rec.best_alpha = alpha;
                }
            }
            diagnostics.push(rec);
        }
        prev_objective = cur;
        last_lp = Some(sol.lp);
    }

    let final_objective = prev_objective;
    Ok(TrainOutput {
        columns,
        weights,
        trace,
        stop,
        mu,
        diagnostics,
        dual_checks,
        last_lp,
        final_objective,
    })
}

fn dual_check<T: StructuredTask>(
    task: &T,
    sol: &MasterSolution<T::Label>,
    columns: &[WeakColumn],
    c: f64,
    iteration: usize,
) -> DualCheck {
    let m = task.num_examples();
    let mass = sol.mu.example_mass(m);
    let box_cap = c / m as f64;
    // both masters bound the total dual mass by C
    let lambda_excess = sol.lambdas.iter().sum::<f64>() - c;
    let mut max_edge_excess = f64::NEG_INFINITY;
    let mut max_tight_gap: f64 = 0.0;
    for (col, &w) in columns.iter().zip(&sol.weights) {
        let e = weak_edge(task, &sol.mu, col);
        max_edge_excess = max_edge_excess.max(e - 1.0);
        if w > 1e-9 {
            max_tight_gap = max_tight_gap.max((e - 1.0).abs());
        }
    }
    DualCheck {
        iteration,
        max_mass_excess: mass.iter().map(|v| v - box_cap).fold(f64::NEG_INFINITY, f64::max),
        min_mass: mass.iter().copied().fold(f64::INFINITY, f64::min),
        lambda_excess,
        max_edge_excess,
        max_tight_gap,
    }
}

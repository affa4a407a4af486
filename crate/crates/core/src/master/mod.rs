//! Restricted master problems over a fixed set of weak-learner columns.

pub mod m_slack;
pub mod one_slack;

use serde::Serialize;

use crate::lp::{BasisEntry, LinearProgram};
use crate::model::DualWeights;

pub use m_slack::{build_mslack_lp, MSlackMaster};
pub use one_slack::{find_violated, solve_restricted, OneSlackMaster, WorkingSet};

/// One cutting-plane round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpRound {
    pub round: usize,
    pub objective: f64,
    pub gap: f64,
    pub ws_size: usize,
}

#[derive(Debug, Clone)]
pub struct MasterSolution<L: Ord> {
    pub weights: Vec<f64>,
    /// LP objective `1.w + C * slack term`.
    pub objective: f64,
    /// One shared slack (1-slack) or one per example (m-slack).
    pub xi: Vec<f64>,
    pub mu: DualWeights<L>,
    /// Working-set duals (1-slack) or per-constraint duals (m-slack).
    pub lambdas: Vec<f64>,
    pub rounds: usize,
    /// Final most-violated-constraint gap (1-slack); zero for m-slack.
    pub gap: f64,
    pub trace: Vec<CpRound>,
    pub lp: LinearProgram,
}

/// Re-index a basis after the weight block grows from `old_n` to `new_n`
/// variables; slack variables sit after the weights.
pub(crate) fn shift_basis(basis: &[BasisEntry], old_n: usize, new_n: usize) -> Vec<BasisEntry> {
    basis
        .iter()
        .map(|e| match *e {
            BasisEntry::Structural(j) if j >= old_n => BasisEntry::Structural(j + new_n - old_n),
            other => other,
        })
        .collect()
}

//! Wall-time and AUC comparison of the two master formulations on a
//! ranking problem.

use std::fmt::Write as _;
use std::time::Instant;

use crate::colgen::IterationRecord;
use crate::error::{Error, Result};
use crate::fit::fit_ranking;
use crate::io::positives;
use crate::model::{score, Dataset, SolverKind, StrongModel, StructuredLabel, TrainParams};
use crate::tasks::ranking::auc;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub c: f64,
    pub method: SolverKind,
    /// `None` when the solver exceeded its capacity.
    pub result: Option<BenchResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub seconds: f64,
    pub train_auc: f64,
    pub test_auc: f64,
    pub columns: usize,
    pub trace: Vec<IterationRecord>,
}

pub fn method_name(kind: SolverKind) -> &'static str {
    match kind {
        SolverKind::OneSlack => "one-slack",
        SolverKind::MSlack => "m-slack",
    }
}

pub fn model_auc(model: &StrongModel, data: &Dataset) -> Result<f64> {
    let scores = data
        .samples
        .iter()
        .map(|s| score(model, &s.features, &StructuredLabel::OrdinalRank(0.0)))
        .collect::<Result<Vec<_>>>()?;
    auc(&scores, &positives(data)?)
}

/// Train one ranking model per `(C, solver)` on `train` and score both
/// splits. Capacity failures become empty rows.
pub fn bench_auc(
    train: &Dataset,
    test: &Dataset,
    c_grid: &[f64],
    params: &TrainParams,
    methods: &[SolverKind],
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &c in c_grid {
        for &method in methods {
            let p = TrainParams {
                c,
                solver: method,
                ..params.clone()
            };
            let start = Instant::now();
            let result = match fit_ranking(train, &p) {
                Ok((model, out)) => Some(BenchResult {
                    seconds: start.elapsed().as_secs_f64(),
                    train_auc: model_auc(&model, train)?,
                    test_auc: model_auc(&model, test)?,
                    columns: model.columns.len(),
                    trace: out.trace,
                }),
                Err(Error::Capacity { .. }) => None,
                Err(e) => return Err(e),
            };
            rows.push(BenchRow { c, method, result });
        }
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("c,method,seconds,train_auc,test_auc\n");
    for row in rows {
        let name = method_name(row.method);
        let _ = match &row.result {
            Some(r) => writeln!(s, "{},{name},{},{},{}", row.c, r.seconds, r.train_auc, r.test_auc),
            None => writeln!(s, "{},{name},-,-,-", row.c),
        };
    }
    s
}

/// Per-iteration primal objective and cumulative time of every run.
pub fn bench_trace_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("c,method,iteration,objective,seconds\n");
    for row in rows {
        if let Some(r) = &row.result {
            for t in &r.trace {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    row.c,
                    method_name(row.method),
                    t.iteration,
                    t.primal,
                    t.total_seconds
                );
            }
        }
    }
    s
}

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use structboost::colgen::IterationRecord;
use structboost::fit::{fit_binary, fit_crf, fit_multiclass, fit_ranking, fit_tree};
use structboost::io::bench::{bench_auc, bench_csv, bench_trace_csv};
use structboost::io::documents::{load_model, load_seg, model_to_string, save_seg};
use structboost::io::libsvm::{pad_to, parse_libsvm, write_libsvm};
use structboost::io::metrics::{evaluate, evaluate_seg, metrics_csv};
use structboost::io::split::split_dataset;
use structboost::io::synth::{crf_instances, gaussian_binary, imbalanced_ranking, taxonomy_multiclass};
use structboost::lp::LinearProgram;
use structboost::tasks::crf::predict_model;
use structboost::tasks::multiclass::Taxonomy;
use structboost::{
    predict as predict_label, Dataset, Error, Result, SolverKind, StrongModel, StructuredLabel, TaskDescriptor,
    TrainParams, WeakConfig,
};

use crate::{BenchArgs, PredictArgs, SolverArg, SolverArgs, SynthArgs, TaskKind, TrainArgs, WeakArg};

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Fail early with the offending path instead of a bare OS message.
fn readable(path: &Path) -> Result<&Path> {
    fs::metadata(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn solver_kind(s: SolverArg) -> SolverKind {
    match s {
        SolverArg::OneSlack => SolverKind::OneSlack,
        SolverArg::MSlack => SolverKind::MSlack,
    }
}

fn params(c: f64, eps_cp: f64, solver: SolverKind, seed: u64, a: &SolverArgs) -> TrainParams {
    let weak = match a.weak {
        WeakArg::Stump => WeakConfig::stumps(),
        WeakArg::Perceptron => WeakConfig::perceptrons(),
    };
    TrainParams {
        c,
        max_iters: a.iters,
        eps_cg: a.eps_cg,
        eps_cp,
        seed,
        solver,
        weak,
        adaptive_eps: !a.fixed_eps,
        mslack_cap: a.mslack_cap,
        ..TrainParams::default()
    }
}

fn trace_csv(trace: &[IterationRecord]) -> String {
    // wall times stay out so the file is reproducible
    let mut s = String::from("iteration,objective,master_objective,edge,columns,cp_rounds\n");
    for t in trace {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            t.iteration, t.primal, t.objective, t.edge, t.columns, t.cp_rounds
        );
    }
    s
}

struct Fitted {
    model: StrongModel,
    trace: Vec<IterationRecord>,
    lp: Option<LinearProgram>,
}

macro_rules! fitted {
    ($e:expr) => {{
        let (model, out) = $e?;
        Fitted {
            model,
            trace: out.trace,
            lp: out.last_lp,
        }
    }};
}

fn read_taxonomy(path: &Path) -> Result<Taxonomy> {
    Taxonomy::parse(&fs::read_to_string(readable(path)?)?)
}

pub fn train(a: TrainArgs) -> Result<()> {
    let p = params(a.c, a.eps_cp, solver_kind(a.solver), a.seed, &a.solver_args);
    p.validate()?;
    if a.unary_only && a.task != TaskKind::Crf {
        return Err(Error::InvalidInput("--unary-only applies to the crf task".into()));
    }
    let f = match a.task {
        TaskKind::Crf => fitted!(fit_crf(&load_seg(readable(&a.data)?)?, !a.unary_only, &p)),
        task => {
            let data = parse_libsvm(readable(&a.data)?)?;
            match task {
                TaskKind::Binary => fitted!(fit_binary(&data, &p)),
                TaskKind::Ranking => fitted!(fit_ranking(&data, &p)),
                TaskKind::Multiclass => {
                    let k = match a.classes {
                        Some(k) => k,
                        None => data.class_labels()?.into_iter().max().unwrap_or(0),
                    };
                    fitted!(fit_multiclass(&data, k, &p))
                }
                TaskKind::Tree => {
                    let path = a
                        .taxonomy
                        .as_deref()
                        .ok_or_else(|| Error::InvalidInput("the tree task needs --taxonomy".into()))?;
                    fitted!(fit_tree(&data, &read_taxonomy(path)?, &p))
                }
                TaskKind::Crf => unreachable!(),
            }
        }
    };
    emit(a.out.as_deref(), &model_to_string(&f.model)?)?;
    if let Some(path) = &a.trace {
        fs::write(path, trace_csv(&f.trace))?;
    }
    if let Some(path) = &a.dump_lp {
        let text =
            f.lp.as_ref()
                .map_or_else(|| "# no master was solved\n".to_string(), LinearProgram::dump);
        fs::write(path, text)?;
    }
    Ok(())
}

/// Feature data padded to the width the model reads.
fn load_features(model: &StrongModel, path: &Path) -> Result<Dataset> {
    let mut data = parse_libsvm(readable(path)?)?;
    let need = model.columns.iter().map(|c| c.learner.min_dim()).max().unwrap_or(0);
    if data.dim < need {
        pad_to(&mut data, need);
    }
    Ok(data)
}

pub fn predict(a: PredictArgs) -> Result<()> {
    let model = load_model(readable(&a.model)?)?;
    let mut s = String::new();
    if model.task == TaskDescriptor::Crf {
        s.push_str("instance,labeling\n");
        for (i, inst) in load_seg(readable(&a.data)?)?.iter().enumerate() {
            let y: String = predict_model(inst, &model)?
                .iter()
                .map(|l| char::from(b'0' + l))
                .collect();
            let _ = writeln!(s, "{i},{y}");
        }
    } else {
        let data = load_features(&model, &a.data)?;
        let ranking = model.task == TaskDescriptor::Ranking;
        s.push_str(if ranking { "id,score\n" } else { "id,label\n" });
        for sample in &data.samples {
            let _ = match predict_label(&model, &sample.features)? {
                StructuredLabel::Class(c) => writeln!(s, "{},{c}", sample.id),
                StructuredLabel::OrdinalRank(r) => writeln!(s, "{},{r}", sample.id),
                StructuredLabel::GridLabeling(_) => unreachable!("feature models predict scalars"),
            };
        }
    }
    emit(a.out.as_deref(), &s)
}

pub fn eval(a: PredictArgs) -> Result<()> {
    let model = load_model(readable(&a.model)?)?;
    let rows = if model.task == TaskDescriptor::Crf {
        evaluate_seg(&model, &load_seg(readable(&a.data)?)?)?
    } else {
        evaluate(&model, &load_features(&model, &a.data)?)?
    };
    emit(a.out.as_deref(), &metrics_csv(&rows))
}

pub fn bench(a: BenchArgs) -> Result<()> {
    if a.c_grid.is_empty() {
        return Err(Error::InvalidInput("empty C grid".into()));
    }
    if !(a.train_fraction > 0.0 && a.train_fraction < 1.0) {
        return Err(Error::InvalidInput("--train-fraction must lie in (0, 1)".into()));
    }
    let data = parse_libsvm(readable(&a.data)?)?;
    let (train, _, test) = split_dataset(&data, (a.train_fraction, 0.0, 1.0 - a.train_fraction), a.seed)?;
    let p = params(a.c_grid[0], a.eps_cp, SolverKind::OneSlack, a.seed, &a.solver_args);
    for &c in &a.c_grid {
        TrainParams { c, ..p.clone() }.validate()?;
    }
    let methods = match a.solver {
        Some(s) => vec![solver_kind(s)],
        None => vec![SolverKind::OneSlack, SolverKind::MSlack],
    };
    let rows = bench_auc(&train, &test, &a.c_grid, &p, &methods)?;
    emit(a.out.as_deref(), &bench_csv(&rows))?;
    if let Some(path) = &a.trace {
        fs::write(path, bench_trace_csv(&rows))?;
    }
    Ok(())
}

fn write_taxonomy(path: Option<&PathBuf>, tax: &Taxonomy) -> Result<()> {
    match path {
        Some(p) => Ok(fs::write(p, tax.to_text())?),
        None => Err(Error::InvalidInput("tree data needs --taxonomy-out".into())),
    }
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let text = match a.task {
        TaskKind::Crf => return save_seg(&crf_instances(a.n, a.grid, a.grid, a.noise, a.seed)?, &a.out),
        TaskKind::Binary => write_libsvm(&gaussian_binary(a.n, a.dim, 2.0, a.seed)?),
        TaskKind::Ranking => write_libsvm(&imbalanced_ranking(a.n, a.positive_fraction, a.dim, a.seed)?),
        TaskKind::Multiclass => write_libsvm(&taxonomy_multiclass(a.n, a.seed)?.0),
        TaskKind::Tree => {
            let (data, tax) = taxonomy_multiclass(a.n, a.seed)?;
            write_taxonomy(a.taxonomy_out.as_ref(), &tax)?;
            write_libsvm(&data)
        }
    };
    fs::write(&a.out, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_has_header_and_no_timings() {
        let rec = IterationRecord {
            iteration: 1,
            objective: 2.5,
            primal: 3.0,
            edge: 1.25,
            columns: 1,
            cp_rounds: 4,
            master_seconds: 0.123,
            total_seconds: 0.456,
        };
        assert_eq!(
            trace_csv(&[rec]),
            "iteration,objective,master_objective,edge,columns,cp_rounds\n1,3,2.5,1.25,1,4\n"
        );
    }
}

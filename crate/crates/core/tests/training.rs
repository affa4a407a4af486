use structboost::io::synth::{crf_instances, gaussian_binary, imbalanced_ranking, taxonomy_multiclass};
use structboost::tasks::crf::CrfTask;
use structboost::tasks::multiclass::{BinaryTask, MulticlassTask};
use structboost::tasks::ranking::RankingTask;
use structboost::{train, SolverKind, StopReason, StructuredTask, TrainParams};

fn tracked(solver: SolverKind) -> TrainParams {
    TrainParams {
        c: 10.0,
        max_iters: 15,
        eps_cp: 1e-10,
        adaptive_eps: false,
        solver,
        track_diagnostics: true,
        ..TrainParams::default()
    }
}

fn check_tracked<T: StructuredTask>(task: &T, params: &TrainParams) {
    let out = train(task, params).unwrap();
    assert!(!out.diagnostics.is_empty());
    for d in &out.diagnostics {
        assert!(d.objective <= d.previous_objective + 1e-9, "{d:?}");
        assert!(d.min_bound_slack >= -1e-9, "{d:?}");
    }
    let m = task.num_examples() as f64;
    for chk in &out.dual_checks {
        assert!(chk.max_mass_excess <= 1e-7, "{chk:?}");
        assert!(chk.lambda_excess <= 1e-7, "{chk:?}");
        assert!(chk.max_edge_excess <= 1e-7, "{chk:?}");
        assert!(chk.min_mass >= -1e-12 / m);
    }
}

#[test]
fn diagnostics_binary() {
    let d = gaussian_binary(40, 3, 1.5, 1).unwrap();
    let t = BinaryTask::new(d.rows(), d.class_labels().unwrap()).unwrap();
    check_tracked(&t, &tracked(SolverKind::MSlack));
    check_tracked(&t, &tracked(SolverKind::OneSlack));
}

#[test]
fn diagnostics_multiclass_and_ranking() {
    let (d, tax) = taxonomy_multiclass(36, 2).unwrap();
    let t = MulticlassTask::tree(d.rows(), d.class_labels().unwrap(), tax).unwrap();
    check_tracked(&t, &tracked(SolverKind::MSlack));
    let r = imbalanced_ranking(30, 0.3, 3, 3).unwrap();
    let t = RankingTask::new(r.rows(), &r.ranks().unwrap()).unwrap();
    check_tracked(&t, &tracked(SolverKind::OneSlack));
}

#[test]
fn diagnostics_crf() {
    let t = CrfTask::new(crf_instances(4, 4, 4, 0.8, 1).unwrap()).unwrap();
    check_tracked(
        &t,
        &TrainParams {
            max_iters: 8,
            ..tracked(SolverKind::OneSlack)
        },
    );
}

#[test]
fn separable_binary_converges_to_zero_error() {
    let d = gaussian_binary(60, 2, 8.0, 7).unwrap();
    let t = BinaryTask::new(d.rows(), d.class_labels().unwrap()).unwrap();
    let out = train(
        &t,
        &TrainParams {
            c: 100.0,
            ..TrainParams::default()
        },
    )
    .unwrap();
    assert_ne!(out.stop, StopReason::MaxIters);
    let viol = t.loss_augmented_all(&out.columns, &out.weights).unwrap();
    assert!(viol.iter().all(|(_, v)| *v <= 1e-6), "{:?}", out.stop);
}

#[test]
fn m_slack_rejects_crf() {
    let t = CrfTask::new(crf_instances(1, 2, 2, 0.5, 1).unwrap()).unwrap();
    assert!(train(&t, &tracked(SolverKind::MSlack)).is_err());
}

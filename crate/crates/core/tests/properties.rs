use proptest::prelude::*;

use structboost::graphcut::{minimize, BinaryEnergy};
use structboost::io::documents::{model_from_str, model_to_string, seg_from_str, seg_to_string};
use structboost::io::libsvm::{parse_libsvm_str, write_libsvm};
use structboost::lp::{solve, solve_warm, LinearProgram, LpStatus};
use structboost::model::WeakColumn;
use structboost::tasks::crf::synth_instance;
use structboost::tasks::multiclass::Taxonomy;
use structboost::weak::{
    train_perceptron, train_stump, weighted_edge, OutputRange, Perceptron, Stump, WeakConfig, WeakLearner,
};
use structboost::{predict, score, Dataset, StrongModel, StructuredLabel, TaskDescriptor, TrainParams};

/// Every candidate stump in tie-break order: feature, threshold, polarity +1 first.
fn oracle_stump(rows: &[Vec<f64>], d: &[f64], range: OutputRange) -> (Stump, f64) {
    let mut best: Option<(Stump, f64)> = None;
    for feature in 0..rows[0].len() {
        let mut values: Vec<f64> = rows.iter().map(|r| r[feature]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let mut thresholds = vec![f64::NEG_INFINITY];
        thresholds.extend(values.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        thresholds.push(f64::INFINITY);
        for &threshold in &thresholds {
            for polarity in [1i8, -1] {
                let s = Stump {
                    feature,
                    threshold,
                    polarity,
                    output_range: range,
                };
                let edge: f64 = rows.iter().zip(d).map(|(x, w)| s.eval(x) * w).sum();
                if best.as_ref().is_none_or(|(_, e)| edge > *e) {
                    best = Some((s, edge));
                }
            }
        }
    }
    best.unwrap()
}

/// Small integer features and weights keep every edge exact, so ties are real ties.
fn stump_problem() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..=25, 1usize..=5).prop_flat_map(|(m, d)| {
        (
            prop::collection::vec(prop::collection::vec(-3i32..=3, d), m),
            prop::collection::vec(-4i32..=4, m),
        )
            .prop_filter("some nonzero weight", |(_, w)| w.iter().any(|&v| v != 0))
            .prop_map(|(rows, w)| {
                (
                    rows.into_iter()
                        .map(|r| r.into_iter().map(f64::from).collect())
                        .collect(),
                    w.into_iter().map(f64::from).collect(),
                )
            })
    })
}

fn range() -> impl Strategy<Value = OutputRange> {
    prop_oneof![Just(OutputRange::PmOne), Just(OutputRange::ZeroOne)]
}

fn learner(dim: usize) -> impl Strategy<Value = WeakLearner> {
    prop_oneof![
        (0..dim, -2.0..2.0f64, prop::bool::ANY).prop_map(|(feature, threshold, up)| {
            WeakLearner::Stump(Stump {
                feature,
                threshold,
                polarity: if up { 1 } else { -1 },
                output_range: OutputRange::PmOne,
            })
        }),
        (prop::collection::vec(-1.0..1.0f64, dim), -1.0..1.0f64)
            .prop_map(|(v, b)| { WeakLearner::Perceptron(Perceptron { v, b, sharpness: 5.0 }) }),
    ]
}

const DIM: usize = 3;

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, DIM)
}
const CLASSES: usize = 4;

fn multiclass_columns() -> impl Strategy<Value = Vec<WeakColumn>> {
    prop::collection::vec((learner(DIM), 1..=CLASSES), 1..8)
        .prop_map(|v| v.into_iter().map(|(l, s)| WeakColumn::slot(l, s)).collect())
}

fn model(columns: Vec<WeakColumn>, weights: Vec<f64>) -> StrongModel {
    StrongModel {
        task: TaskDescriptor::Multiclass { classes: CLASSES },
        columns,
        weights,
        metadata: TrainParams::default(),
    }
}

proptest! {
    #[test]
    fn stump_search_matches_exhaustive_enumeration((rows, d) in stump_problem(), range in range()) {
        let (stump, edge) = train_stump(&rows, &d, range).unwrap();
        let (want, want_edge) = oracle_stump(&rows, &d, range);
        prop_assert_eq!(edge, want_edge);
        prop_assert_eq!(stump, want);
    }

    #[test]
    fn scaling_weights_keeps_the_stump((rows, d) in stump_problem(), lambda in 0.01..100.0f64) {
        let (stump, edge) = train_stump(&rows, &d, OutputRange::PmOne).unwrap();
        let scaled: Vec<f64> = d.iter().map(|v| v * lambda).collect();
        let (stump2, edge2) = train_stump(&rows, &scaled, OutputRange::PmOne).unwrap();
        prop_assert_eq!(stump2, stump);
        prop_assert!((edge2 - lambda * edge).abs() <= 1e-9 * (1.0 + lambda * edge.abs()));
    }

    #[test]
    fn perceptron_never_loses_to_its_stump((rows, d) in stump_problem()) {
        let (stump, stump_edge) = train_stump(&rows, &d, OutputRange::PmOne).unwrap();
        let (learner, edge) = train_perceptron(&rows, &d, Some(stump), &WeakConfig::perceptrons()).unwrap();
        prop_assert!(edge >= stump_edge);
        prop_assert_eq!(edge, weighted_edge(&learner, &rows, &d));
    }

    #[test]
    fn score_is_linear_in_weights(
        (cols, w1, w2) in multiclass_columns().prop_flat_map(|c| {
            let n = c.len();
            (Just(c), prop::collection::vec(0.0..5.0f64, n), prop::collection::vec(0.0..5.0f64, n))
        }),
        x in point(),
        class in 1..=CLASSES,
    ) {
        let sum: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a + b).collect();
        let y = StructuredLabel::Class(class);
        let s1 = score(&model(cols.clone(), w1), &x, &y).unwrap();
        let s2 = score(&model(cols.clone(), w2), &x, &y).unwrap();
        let s = score(&model(cols, sum), &x, &y).unwrap();
        prop_assert!((s - (s1 + s2)).abs() <= 1e-12 * (1.0 + s.abs()));
    }

    #[test]
    fn predict_ignores_positive_rescaling(
        (cols, w) in multiclass_columns().prop_flat_map(|c| {
            let n = c.len();
            (Just(c), prop::collection::vec(0.0..5.0f64, n))
        }),
        x in point(),
        lambda in 0.001..1000.0f64,
    ) {
        let base = model(cols.clone(), w.clone());
        let scaled = model(cols, w.iter().map(|v| v * lambda).collect());
        let a = predict(&base, &x).unwrap();
        let b = predict(&scaled, &x).unwrap();
        if a != b {
            // only a rounding-level tie may flip
            let sa = score(&base, &x, &a).unwrap();
            let sb = score(&base, &x, &b).unwrap();
            prop_assert!((sa - sb).abs() <= 1e-9 * (1.0 + sa.abs()));
        }
    }

    #[test]
    fn model_round_trip_preserves_scores(
        (cols, w) in multiclass_columns().prop_flat_map(|c| {
            let n = c.len();
            (Just(c), prop::collection::vec(0.0..5.0f64, n))
        }),
        x in point(),
    ) {
        let m = model(cols, w);
        let text = model_to_string(&m).unwrap();
        let back = model_from_str(&text).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(model_to_string(&back).unwrap(), text);
        for c in 1..=CLASSES {
            let y = StructuredLabel::Class(c);
            prop_assert_eq!(score(&back, &x, &y).unwrap(), score(&m, &x, &y).unwrap());
        }
    }

    #[test]
    fn libsvm_round_trip_is_a_fixpoint(
        rows in prop::collection::vec(prop::collection::vec(prop_oneof![Just(0.0), -1e6..1e6f64], 4), 1..20),
        labels in prop::collection::vec(-3i32..=3, 20),
    ) {
        let labels = labels[..rows.len()].iter().map(|&l| StructuredLabel::OrdinalRank(f64::from(l))).collect();
        let data = Dataset::from_rows(rows, labels).unwrap();
        let text = write_libsvm(&data);
        let parsed = parse_libsvm_str(&text).unwrap();
        prop_assert_eq!(write_libsvm(&parsed), text);
        for (a, b) in parsed.samples.iter().zip(&data.samples) {
            prop_assert_eq!(&a.label, &b.label);
            // trailing zero features are not written, so compare the stored prefix
            prop_assert_eq!(&a.features[..], &b.features[..a.features.len()]);
            prop_assert!(b.features[a.features.len()..].iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn taxonomy_text_round_trip(parents in prop::collection::vec(0usize..100, 1..12)) {
        // node v > 0 hangs under some earlier node; leaves are the classes
        let n = parents.len() + 1;
        let mut parent = vec![None];
        parent.extend(parents.iter().enumerate().map(|(i, p)| Some(p % (i + 1))));
        let mut has_child = vec![false; n];
        for p in parent.iter().flatten() {
            has_child[*p] = true;
        }
        let leaves: Vec<bool> = has_child.iter().map(|c| !c).collect();
        let tax = Taxonomy::new(parent, &leaves).unwrap();
        let text = tax.to_text();
        let back = Taxonomy::parse(&text).unwrap();
        prop_assert_eq!(&back, &tax);
        prop_assert_eq!(back.to_text(), text);
    }

    #[test]
    fn seg_round_trip(w in 1usize..5, h in 1usize..5, noise in 0.0..2.0f64, seed in 0u64..1000) {
        let inst = vec![synth_instance(w, h, noise, seed).unwrap()];
        let text = seg_to_string(&inst).unwrap();
        let back = seg_from_str(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(seg_to_string(&back).unwrap(), text);
    }

    #[test]
    fn lp_optimum_satisfies_duality(
        (n, rows) in (1usize..8, 1usize..10).prop_flat_map(|(n, r)| {
            (Just(n), prop::collection::vec((prop::collection::vec(-1.0..2.0f64, n), -1.0..1.0f64), r))
        }),
        cost in prop::collection::vec(0.1..2.0f64, 8),
    ) {
        let mut lp = LinearProgram::new(cost[..n].to_vec());
        for (a, b) in &rows {
            lp.add_dense_row(a, *b);
        }
        let sol = solve(&lp).unwrap();
        prop_assume!(sol.status == LpStatus::Optimal);
        let tol = 1e-7;
        prop_assert!(sol.primal.iter().all(|&x| x >= -tol));
        prop_assert!(sol.duals.iter().all(|&y| y >= -tol));
        let mut reduced = lp.objective.clone();
        for (r, row) in lp.rows.iter().enumerate() {
            let act = lp.row_activity(r, &sol.primal);
            prop_assert!(act >= row.rhs - tol);
            prop_assert!(sol.duals[r] * (act - row.rhs) <= tol);
            for (j, v) in &row.coeffs {
                reduced[*j] -= sol.duals[r] * v;
            }
        }
        prop_assert!(reduced.iter().all(|&d| d >= -tol));
        let primal: f64 = lp.objective.iter().zip(&sol.primal).map(|(c, x)| c * x).sum();
        let dual: f64 = lp.rows.iter().zip(&sol.duals).map(|(row, y)| row.rhs * y).sum();
        prop_assert!((primal - dual).abs() <= 1e-8 * (1.0 + primal.abs()));

        let again = solve(&lp).unwrap();
        prop_assert_eq!(&again, &sol);
        let warm = solve_warm(&lp, &sol.basis).unwrap();
        prop_assert!((warm.objective - sol.objective).abs() <= 1e-8 * (1.0 + sol.objective.abs()));
    }

    #[test]
    fn graph_cut_matches_exhaustive_minimum(
        (n, u0, u1, edges) in (1usize..=10).prop_flat_map(|n| (
            Just(n),
            prop::collection::vec(0i32..6, n),
            prop::collection::vec(0i32..6, n),
            prop::collection::vec((0..n, 0..n, 0i32..4, 0i32..4), 0..2 * n),
        )),
    ) {
        let edges: Vec<_> = edges.into_iter().filter(|(p, q, _, _)| p != q).collect();
        let energy = BinaryEnergy {
            unary0: u0.into_iter().map(f64::from).collect(),
            unary1: u1.into_iter().map(f64::from).collect(),
            edges: edges.iter().map(|e| (e.0, e.1)).collect(),
            theta01: edges.iter().map(|e| f64::from(e.2)).collect(),
            theta10: edges.iter().map(|e| f64::from(e.3)).collect(),
        };
        let (labels, value) = minimize(&energy).unwrap();
        prop_assert_eq!(value, energy.evaluate(&labels));
        // enumerate with node 0 most significant, so the first minimum is the lexicographic one
        let mut best: Option<(Vec<u8>, f64)> = None;
        for code in 0u32..(1 << n) {
            let y: Vec<u8> = (0..n).map(|p| ((code >> (n - 1 - p)) & 1) as u8).collect();
            let e = energy.evaluate(&y);
            if best.as_ref().is_none_or(|(_, b)| e < *b) {
                best = Some((y, e));
            }
        }
        let (want, want_value) = best.unwrap();
        prop_assert_eq!(value, want_value);
        prop_assert_eq!(labels, want);
    }
}

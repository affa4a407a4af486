//! Evaluation metrics and their CSV rendering.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::{binary_classes, positives};
use crate::error::{invalid, Result};
use crate::model::{predict, score, Dataset, StrongModel, StructuredLabel, TaskDescriptor};
use crate::tasks::crf::{predict_model, SegInstance};
use crate::tasks::multiclass::{tree_loss, Taxonomy};
use crate::tasks::ranking::auc;

pub fn error_rate(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return invalid("error rate needs equal, nonempty label lists");
    }
    let wrong = pred.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / pred.len() as f64)
}

pub fn mean_tree_loss(pred: &[usize], truth: &[usize], tax: &Taxonomy) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return invalid("tree loss needs equal, nonempty label lists");
    }
    let mut total = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        total += tree_loss(*t, *p, tax)?;
    }
    Ok(total / pred.len() as f64)
}

/// Pixel-level segmentation scores pooled over all instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegScores {
    pub hamming_rate: f64,
    pub fg_iu: f64,
    pub bg_iu: f64,
    pub pixel_accuracy: f64,
}

pub fn seg_scores(pred: &[Vec<u8>], truth: &[Vec<u8>]) -> Result<SegScores> {
    if pred.len() != truth.len() {
        return invalid("prediction and truth counts differ");
    }
    // [truth][pred] pixel counts
    let mut conf = [[0usize; 2]; 2];
    for (p, t) in pred.iter().zip(truth) {
        if p.len() != t.len() {
            return invalid("labeling lengths differ");
        }
        for (&a, &b) in p.iter().zip(t) {
            if a > 1 || b > 1 {
                return invalid("labels must be 0 or 1");
            }
            conf[usize::from(b)][usize::from(a)] += 1;
        }
    }
    let total: usize = conf.iter().flatten().sum();
    if total == 0 {
        return invalid("no pixels to score");
    }
    let iu = |l: usize| {
        let inter = conf[l][l];
        let union = conf[l][0] + conf[l][1] + conf[0][l] + conf[1][l] - inter;
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    };
    let correct = (conf[0][0] + conf[1][1]) as f64;
    Ok(SegScores {
        hamming_rate: 1.0 - correct / total as f64,
        fg_iu: iu(1),
        bg_iu: iu(0),
        pixel_accuracy: correct / total as f64,
    })
}

/// Named metric values in a fixed order.
pub type MetricRows = Vec<(&'static str, f64)>;

/// Metrics for a feature-vector model on a labelled dataset.
pub fn evaluate(model: &StrongModel, data: &Dataset) -> Result<MetricRows> {
    if data.is_empty() {
        return invalid("cannot evaluate on an empty dataset");
    }
    let rows: Vec<&[f64]> = data.samples.iter().map(|s| s.features.as_slice()).collect();
    match &model.task {
        TaskDescriptor::Ranking => {
            let scores = rows
                .par_iter()
                .map(|x| score(model, x, &StructuredLabel::OrdinalRank(0.0)))
                .collect::<Result<Vec<f64>>>()?;
            Ok(vec![("auc", auc(&scores, &positives(data)?)?)])
        }
        TaskDescriptor::Crf => invalid("crf models are evaluated on segmentation instances"),
        task => {
            let truth = if matches!(task, TaskDescriptor::Binary) {
                binary_classes(data)?
            } else {
                data.class_labels()?
            };
            let pred = rows
                .par_iter()
                .map(|x| {
                    let y = predict(model, x)?;
                    Ok(y.as_class().expect("class-valued task"))
                })
                .collect::<Result<Vec<usize>>>()?;
            let mut out = vec![("error", error_rate(&pred, &truth)?)];
            if let TaskDescriptor::Tree { taxonomy } = task {
                out.push(("tree_loss", mean_tree_loss(&pred, &truth, taxonomy)?));
            }
            Ok(out)
        }
    }
}

pub fn evaluate_seg(model: &StrongModel, instances: &[SegInstance]) -> Result<MetricRows> {
    let pred = instances
        .par_iter()
        .map(|inst| predict_model(inst, model))
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<Vec<u8>> = instances.iter().map(|i| i.truth.clone()).collect();
    let s = seg_scores(&pred, &truth)?;
    Ok(vec![
        ("hamming_rate", s.hamming_rate),
        ("fg_iu", s.fg_iu),
        ("bg_iu", s.bg_iu),
        ("pixel_accuracy", s.pixel_accuracy),
    ])
}

pub fn metrics_csv(rows: &MetricRows) -> String {
    let mut s = String::from("metric,value\n");
    for (name, v) in rows {
        let _ = writeln!(s, "{name},{v}");
    }
    s
}

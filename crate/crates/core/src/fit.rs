//! Dataset-level entry points that build a task, run column generation and
//! package the result as a [`StrongModel`].

use crate::colgen::{train, TrainOutput};
use crate::error::{invalid, Result};
use crate::io::binary_classes;
use crate::model::{Dataset, StrongModel, TaskDescriptor, TrainParams};
use crate::tasks::crf::{CrfTask, SegInstance};
use crate::tasks::multiclass::{BinaryTask, Coding, LossKind, MulticlassTask, Taxonomy};
use crate::tasks::ranking::RankingTask;

fn package<L: Ord>(task: TaskDescriptor, out: TrainOutput<L>, params: &TrainParams) -> (StrongModel, TrainOutput<L>) {
    let model = StrongModel {
        task,
        columns: out.columns.clone(),
        weights: out.weights.clone(),
        metadata: params.clone(),
    };
    (model, out)
}

pub fn fit_binary(data: &Dataset, params: &TrainParams) -> Result<(StrongModel, TrainOutput<usize>)> {
    let task = BinaryTask::new(data.rows(), binary_classes(data)?)?;
    Ok(package(TaskDescriptor::Binary, train(&task, params)?, params))
}

pub fn fit_multiclass(
    data: &Dataset,
    classes: usize,
    params: &TrainParams,
) -> Result<(StrongModel, TrainOutput<usize>)> {
    let task = MulticlassTask::flat(data.rows(), data.class_labels()?, classes)?;
    Ok(package(
        TaskDescriptor::Multiclass { classes },
        train(&task, params)?,
        params,
    ))
}

/// Taxonomy coding with the tree loss.
pub fn fit_tree(
    data: &Dataset,
    taxonomy: &Taxonomy,
    params: &TrainParams,
) -> Result<(StrongModel, TrainOutput<usize>)> {
    let task = MulticlassTask::new(
        data.rows(),
        data.class_labels()?,
        taxonomy.num_classes(),
        Coding::Tree(taxonomy.clone()),
        LossKind::Tree,
    )?;
    let desc = TaskDescriptor::Tree {
        taxonomy: taxonomy.clone(),
    };
    Ok(package(desc, train(&task, params)?, params))
}

pub fn fit_ranking(
    data: &Dataset,
    params: &TrainParams,
) -> Result<(StrongModel, TrainOutput<crate::tasks::ranking::PairOrder>)> {
    let task = RankingTask::new(data.rows(), &data.ranks()?)?;
    Ok(package(TaskDescriptor::Ranking, train(&task, params)?, params))
}

/// CRF training; `pairwise = false` gives the unary-only model.
pub fn fit_crf(
    instances: &[SegInstance],
    pairwise: bool,
    params: &TrainParams,
) -> Result<(StrongModel, TrainOutput<Vec<u8>>)> {
    if instances.is_empty() {
        return invalid("no training instances");
    }
    let mut task = CrfTask::new(instances.to_vec())?;
    if !pairwise {
        task = task.unary_only();
    }
    Ok(package(TaskDescriptor::Crf, train(&task, params)?, params))
}

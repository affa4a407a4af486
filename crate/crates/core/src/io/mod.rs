//! Dataset formats, model documents, metrics, synthetic data and the
//! solver benchmark.

pub mod bench;
pub mod documents;
pub mod libsvm;
pub mod metrics;
pub mod split;
pub mod synth;

/// Current version of every JSON document written by this crate.
pub const FORMAT_VERSION: u32 = 1;

use crate::error::Result;
use crate::model::Dataset;

/// Binary class ids (1 negative, 2 positive). Labels already in {1, 2} are
/// kept; otherwise positive values map to class 2.
pub fn binary_classes(data: &Dataset) -> Result<Vec<usize>> {
    let ranks = data.ranks()?;
    if ranks.iter().all(|&r| r == 1.0 || r == 2.0) {
        return Ok(ranks.iter().map(|&r| r as usize).collect());
    }
    Ok(ranks.iter().map(|&r| if r > 0.0 { 2 } else { 1 }).collect())
}

/// Relevance flags for AUC: a sample is positive iff it carries the
/// largest label in the set.
pub fn positives(data: &Dataset) -> Result<Vec<bool>> {
    let ranks = data.ranks()?;
    let top = ranks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ranks.iter().map(|&r| r == top).collect())
}

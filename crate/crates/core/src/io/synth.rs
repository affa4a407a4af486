//! Seeded synthetic datasets for every task family.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::model::{Dataset, StructuredLabel};
use crate::tasks::crf::{synth_instance, SegInstance};
use crate::tasks::multiclass::Taxonomy;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Two Gaussian classes whose means differ by `separation` along every
/// feature; classes 1 and 2 alternate.
pub fn gaussian_binary(n: usize, dim: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if dim == 0 {
        return invalid("dimension must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = 1 + i % 2;
        let shift = if class == 2 {
            0.5 * separation
        } else {
            -0.5 * separation
        };
        rows.push((0..dim).map(|_| shift + normal(&mut rng)).collect());
        labels.push(StructuredLabel::Class(class));
    }
    Dataset::from_rows(rows, labels)
}

/// Root with two super-classes of three leaf classes each.
pub fn two_level_taxonomy() -> Taxonomy {
    Taxonomy::parse("1 ROOT 0\n2 1 0\n3 1 0\n4 2 1\n5 2 1\n6 2 1\n7 3 1\n8 3 1\n9 3 1\n")
        .expect("fixed taxonomy is valid")
}

/// Six classes under [`two_level_taxonomy`]. Super-classes are well
/// separated along the first feature; siblings overlap along the second.
/// Two further features are pure noise.
pub fn taxonomy_multiclass(n: usize, seed: u64) -> Result<(Dataset, Taxonomy)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = 1 + i % 6;
        let group = (class - 1) / 3;
        let sibling = (class - 1) % 3;
        let centre = [if group == 0 { -1.0 } else { 1.0 }, sibling as f64 - 1.0];
        let mut x: Vec<f64> = centre.iter().map(|c| c + 0.7 * normal(&mut rng)).collect();
        x.extend((0..2).map(|_| normal(&mut rng)));
        rows.push(x);
        labels.push(StructuredLabel::Class(class));
    }
    Ok((Dataset::from_rows(rows, labels)?, two_level_taxonomy()))
}

/// Imbalanced relevance data: label 1 for positives, 0 for negatives.
/// Positives are shifted along the first half of the features.
pub fn imbalanced_ranking(n: usize, positive_fraction: f64, dim: usize, seed: u64) -> Result<Dataset> {
    if !(0.0 < positive_fraction && positive_fraction < 1.0) || dim == 0 {
        return invalid("positive fraction must lie in (0, 1) and dimension must be positive");
    }
    let n_pos = ((positive_fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let pos = i < n_pos;
        let x = (0..dim)
            .map(|j| {
                let shift = if pos && j < dim.div_ceil(2) { 1.0 } else { 0.0 };
                shift + normal(&mut rng)
            })
            .collect();
        rows.push(x);
        labels.push(StructuredLabel::OrdinalRank(if pos { 1.0 } else { 0.0 }));
    }
    Dataset::from_rows(rows, labels)
}

/// `count` noisy grid instances with per-instance seeds derived from `seed`.
pub fn crf_instances(count: usize, width: usize, height: usize, noise: f64, seed: u64) -> Result<Vec<SegInstance>> {
    (0..count)
        .map(|i| {
            synth_instance(
                width,
                height,
                noise,
                seed.wrapping_mul(1_000_003).wrapping_add(i as u64),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(
            gaussian_binary(20, 3, 2.0, 5).unwrap(),
            gaussian_binary(20, 3, 2.0, 5).unwrap()
        );
        let a = taxonomy_multiclass(30, 1).unwrap().0;
        assert_eq!(a, taxonomy_multiclass(30, 1).unwrap().0);
        assert_eq!(a.class_labels().unwrap()[..6], [1, 2, 3, 4, 5, 6]);
        assert_eq!(
            crf_instances(2, 3, 3, 0.5, 4).unwrap(),
            crf_instances(2, 3, 3, 0.5, 4).unwrap()
        );
    }

    #[test]
    fn ranking_balance() {
        let d = imbalanced_ranking(100, 0.1, 4, 2).unwrap();
        let pos = d.ranks().unwrap().iter().filter(|&&r| r == 1.0).count();
        assert_eq!(pos, 10);
    }

    #[test]
    fn taxonomy_shape() {
        let t = two_level_taxonomy();
        assert_eq!(t.num_classes(), 6);
        assert_eq!(crate::tasks::multiclass::tree_loss(1, 2, &t).unwrap(), 1.0);
        assert_eq!(crate::tasks::multiclass::tree_loss(1, 4, &t).unwrap(), 2.0);
    }
}

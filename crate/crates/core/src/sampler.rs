//! Batch construction: seeded uniform shuffling and the contrast sampler,
//! which places at least one positive of every occupied class in each batch.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SamplerStrategy {
    #[default]
    Random,
    Contrast,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPlan {
    pub batches: Vec<Vec<usize>>,
    pub batch_size: usize,
    pub seed: u64,
    pub strategy: SamplerStrategy,
    /// Classes without any positive in the pool; the coverage guarantee
    /// does not apply to them.
    pub exempt_classes: Vec<usize>,
}

impl BatchPlan {
    /// Drops batches that cannot form a pair.
    pub fn without_singletons(mut self) -> Self {
        self.batches.retain(|b| b.len() >= 2);
        self
    }

    pub fn num_batches(&self) -> usize {
        self.batches.len()
    }

    pub fn covered_indices(&self) -> HashSet<usize> {
        self.batches.iter().flatten().copied().collect()
    }
}

fn check_batch_size(batch_size: usize) -> Result<()> {
    if batch_size < 2 {
        return Err(Error::Config(format!(
            "batch size must be at least 2 for contrastive pairs, got {batch_size}"
        )));
    }
    Ok(())
}

/// Seeded permutation of the train split, chunked into batches.
pub fn random_batches(dataset: &Dataset, batch_size: usize, seed: u64) -> Result<BatchPlan> {
    random_batches_from(&dataset.indices(Split::Train, None), batch_size, seed)
}

pub fn random_batches_from(pool: &[usize], batch_size: usize, seed: u64) -> Result<BatchPlan> {
    check_batch_size(batch_size)?;
    let mut order = pool.to_vec();
    order.shuffle(&mut seed::rng(seed));
    Ok(BatchPlan {
        batches: order.chunks(batch_size).map(<[usize]>::to_vec).collect(),
        batch_size,
        seed,
        strategy: SamplerStrategy::Random,
        exempt_classes: Vec::new(),
    })
}

pub fn contrast_batches(dataset: &Dataset, batch_size: usize, seed: u64) -> Result<BatchPlan> {
    contrast_batches_from(dataset, &dataset.indices(Split::Train, None), batch_size, seed)
}

/// Coverage-first batching over `pool`.
///
/// Each batch first receives one positive for every occupied class, visiting
/// classes in a fresh seeded order and skipping classes already covered by
/// an earlier pick. Unused positives are preferred; a class whose positives
/// are all used draws a duplicate. Remaining slots are filled from the
/// shuffled pool of unused samples. Batches are emitted until every pool
/// member has appeared at least once.
pub fn contrast_batches_from(dataset: &Dataset, pool: &[usize], batch_size: usize, seed: u64) -> Result<BatchPlan> {
    check_batch_size(batch_size)?;
    let samples = dataset.samples();
    let num_classes = dataset.num_classes();
    if let Some(&i) = pool.iter().find(|&&i| samples[i].labels.count_ones() == 0) {
        return Err(Error::Config(format!(
            "sample '{}' has no labels and cannot be placed by the contrast sampler",
            samples[i].id
        )));
    }

    let positives: Vec<Vec<usize>> = (0..num_classes)
        .map(|c| pool.iter().copied().filter(|&i| samples[i].labels.has(c)).collect())
        .collect();
    let occupied: Vec<usize> = (0..num_classes).filter(|&c| !positives[c].is_empty()).collect();
    let exempt: Vec<usize> = (0..num_classes).filter(|&c| positives[c].is_empty()).collect();
    if !exempt.is_empty() {
        let names: Vec<&str> = exempt.iter().map(|&c| dataset.class_names()[c].as_str()).collect();
        log::warn!("classes without positives are exempt from batch coverage: {}", names.join(", "));
    }
    if batch_size < occupied.len() {
        return Err(Error::Config(format!(
            "batch size {batch_size} cannot cover {} occupied classes",
            occupied.len()
        )));
    }

    let mut rng = seed::rng(seed);
    let mut queue = pool.to_vec();
    queue.shuffle(&mut rng);
    let mut used: HashSet<usize> = HashSet::with_capacity(pool.len());
    let mut cursor = 0;
    let mut batches = Vec::new();

    while used.len() < pool.len() {
        let mut batch: Vec<usize> = Vec::with_capacity(batch_size);
        let mut in_batch: HashSet<usize> = HashSet::with_capacity(batch_size);
        let mut order = occupied.clone();
        order.shuffle(&mut rng);
        for c in order {
            if batch.iter().any(|&i| samples[i].labels.has(c)) {
                continue;
            }
            let fresh: Vec<usize> = positives[c]
                .iter()
                .copied()
                .filter(|i| !used.contains(i) && !in_batch.contains(i))
                .collect();
            let pick = match fresh.choose(&mut rng) {
                Some(&i) => i,
                None => {
                    let spare: Vec<usize> = positives[c]
                        .iter()
                        .copied()
                        .filter(|i| !in_batch.contains(i))
                        .collect();
                    *spare.choose(&mut rng).unwrap_or(&positives[c][0])
                }
            };
            batch.push(pick);
            in_batch.insert(pick);
            used.insert(pick);
        }
        while batch.len() < batch_size && cursor < queue.len() {
            let i = queue[cursor];
            cursor += 1;
            if used.contains(&i) {
                continue;
            }
            batch.push(i);
            in_batch.insert(i);
            used.insert(i);
        }
        batches.push(batch);
    }

    Ok(BatchPlan {
        batches,
        batch_size,
        seed,
        strategy: SamplerStrategy::Contrast,
        exempt_classes: exempt,
    })
}

pub fn plan_batches(
    strategy: SamplerStrategy,
    dataset: &Dataset,
    pool: &[usize],
    batch_size: usize,
    seed: u64,
) -> Result<BatchPlan> {
    match strategy {
        SamplerStrategy::Random => random_batches_from(pool, batch_size, seed),
        SamplerStrategy::Contrast => contrast_batches_from(dataset, pool, batch_size, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{default_class_names, LabelVector, Sample};
    use crate::synth::synth_generate;

    fn dataset_with_labels(labels: Vec<Vec<usize>>, num_classes: usize) -> Dataset {
        let samples = labels
            .into_iter()
            .enumerate()
            .map(|(i, active)| Sample {
                id: format!("x{i}"),
                lang: "en".into(),
                split: Split::Train,
                labels: LabelVector::from_active(num_classes, &active).unwrap(),
                embedding: vec![1.0, i as f64],
                text: None,
            })
            .collect();
        Dataset::new(samples, num_classes, 2, default_class_names(num_classes)).unwrap()
    }

    #[test]
    fn random_examples() {
        let pool: Vec<usize> = (0..52).collect();
        let plan = random_batches_from(&pool, 26, 1).unwrap();
        assert_eq!(plan.num_batches(), 2);
        assert_eq!(plan.covered_indices().len(), 52);
        assert_eq!(plan, random_batches_from(&pool, 26, 1).unwrap());

        let pool: Vec<usize> = (0..53).collect();
        let plan = random_batches_from(&pool, 26, 1).unwrap();
        let sizes: Vec<usize> = plan.batches.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![26, 26, 1]);
        let trimmed = plan.without_singletons();
        assert_eq!(trimmed.num_batches(), 2);

        assert!(matches!(random_batches_from(&pool, 1, 1), Err(Error::Config(_))));
    }

    #[test]
    fn contrast_covers_all_classes() {
        let langs = vec!["en".to_string()];
        let d = synth_generate(280, 14, 8, &langs, 0.3, 4).unwrap();
        let plan = contrast_batches(&d, 26, 9).unwrap();
        let pool = d.indices(Split::Train, None);
        assert_eq!(plan.covered_indices(), pool.iter().copied().collect());
        for b in &plan.batches {
            assert!(b.len() <= 26);
            for c in 0..14 {
                assert!(b.iter().any(|&i| d.samples()[i].labels.has(c)));
            }
        }
        assert_eq!(plan, contrast_batches(&d, 26, 9).unwrap());
    }

    #[test]
    fn empty_classes_are_exempt() {
        let labels: Vec<Vec<usize>> = (0..40).map(|i| vec![i % 10]).collect();
        let d = dataset_with_labels(labels, 14);
        let plan = contrast_batches(&d, 26, 3).unwrap();
        assert_eq!(plan.exempt_classes, vec![10, 11, 12, 13]);
        for b in &plan.batches {
            for c in 0..10 {
                assert!(b.iter().any(|&i| d.samples()[i].labels.has(c)));
            }
        }
    }

    #[test]
    fn infeasible_batch_size() {
        let labels: Vec<Vec<usize>> = (0..40).map(|i| vec![i % 14]).collect();
        let d = dataset_with_labels(labels, 14);
        let err = contrast_batches(&d, 8, 3).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("14")));
    }

    #[test]
    fn rejects_unlabelled_samples() {
        let d = dataset_with_labels(vec![vec![0], vec![], vec![1]], 2);
        assert!(matches!(contrast_batches(&d, 4, 0), Err(Error::Config(_))));
    }
}

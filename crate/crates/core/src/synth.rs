//! Synthetic multi-label embedding datasets for tests and demos.
//!
//! Each embedding is a sum of a component shared by every sample, a
//! per-language offset, a label signal (sum of class prototypes) and
//! isotropic noise. `label_correlation` sets the share of the non-shared
//! part carried by the label signal, so at small values samples with equal
//! labels are only weakly aligned.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{default_class_names, Dataset, LabelVector, Sample, Split};
use crate::error::{Error, Result};
use crate::seed;

const SHARED_SCALE: f64 = 1.5;
const LANGUAGE_SCALE: f64 = 0.6;
const DEV_FRACTION: f64 = 0.3;

fn gaussian_vec<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect::<Vec<f64>>()
}

fn unit_vec<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    let v = gaussian_vec(rng, dim, 1.0);
    let n = crate::matrix::norm(&v).max(f64::MIN_POSITIVE);
    v.into_iter().map(|x| x / n).collect()
}

pub fn synth_generate(
    num_samples: usize,
    num_classes: usize,
    embed_dim: usize,
    languages: &[String],
    label_correlation: f64,
    seed: u64,
) -> Result<Dataset> {
    if num_samples < 1 {
        return Err(Error::Argument("num_samples must be at least 1".into()));
    }
    if num_classes < 1 {
        return Err(Error::Argument("num_classes must be at least 1".into()));
    }
    if embed_dim < 2 {
        return Err(Error::Argument("embed_dim must be at least 2".into()));
    }
    if languages.is_empty() {
        return Err(Error::Argument("at least one language is required".into()));
    }
    if !(0.0..=1.0).contains(&label_correlation) {
        return Err(Error::Argument(format!(
            "label_correlation must lie in [0, 1], got {label_correlation}"
        )));
    }

    let mut rng = seed::rng(seed);
    let shared = unit_vec(&mut rng, embed_dim);
    let prototypes: Vec<Vec<f64>> = (0..num_classes).map(|_| unit_vec(&mut rng, embed_dim)).collect();
    let lang_offsets: Vec<Vec<f64>> = languages.iter().map(|_| unit_vec(&mut rng, embed_dim)).collect();

    // Zipf-like class frequencies so the label distribution is imbalanced.
    let raw: Vec<f64> = (0..num_classes).map(|c| 1.0 / (c as f64 + 1.0).powf(0.8)).collect();
    let raw_sum: f64 = raw.iter().sum();
    let expected_labels = 2.5_f64.min(num_classes as f64);
    let probs: Vec<f64> = raw
        .iter()
        .map(|w| (expected_labels * w / raw_sum).min(0.9))
        .collect();

    let signal = label_correlation.sqrt();
    let noise = (1.0 - label_correlation).sqrt();
    let noise_scale = noise / (embed_dim as f64).sqrt();

    let mut samples = Vec::with_capacity(num_samples);
    for i in 0..num_samples {
        let mut labels = LabelVector::zeros(num_classes);
        for (c, &p) in probs.iter().enumerate() {
            if rng.random::<f64>() < p {
                labels.set(c);
            }
        }
        let forced = i < num_classes;
        if forced {
            labels.set(i);
        }
        if labels.count_ones() == 0 {
            let mut u = rng.random::<f64>() * probs.iter().sum::<f64>();
            let mut pick = num_classes - 1;
            for (c, &p) in probs.iter().enumerate() {
                if u < p {
                    pick = c;
                    break;
                }
                u -= p;
            }
            labels.set(pick);
        }

        let lang_idx = i % languages.len();
        let split = if forced || rng.random::<f64>() >= DEV_FRACTION {
            Split::Train
        } else {
            Split::Dev
        };

        let k = labels.count_ones() as f64;
        let mut embedding = gaussian_vec(&mut rng, embed_dim, noise_scale);
        for (d, e) in embedding.iter_mut().enumerate() {
            *e += SHARED_SCALE * shared[d] + LANGUAGE_SCALE * lang_offsets[lang_idx][d];
            for c in labels.active() {
                *e += signal * prototypes[c][d] / k.sqrt();
            }
        }

        samples.push(Sample {
            id: format!("s{i:05}"),
            lang: languages[lang_idx].clone(),
            split,
            labels,
            embedding,
            text: None,
        });
    }

    Dataset::new(samples, num_classes, embed_dim, default_class_names(num_classes))
}

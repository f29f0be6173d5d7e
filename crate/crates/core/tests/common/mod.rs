#![allow(dead_code)]

use labelcon::data::{default_class_names, LabelVector, Sample, Split};
use labelcon::{Dataset, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Naive transcription of the contrastive objective, one loop per index.
pub fn contrastive_oracle(
    x: &[Vec<f64>],
    y: &[Vec<u8>],
    exp_temperature: Option<f64>,
    epsilon: f64,
    normalize_gamma: bool,
) -> f64 {
    let b = x.len();
    let c = y[0].len();
    let cos = |i: usize, j: usize| {
        let mut d = 0.0;
        let mut ni = 0.0;
        let mut nj = 0.0;
        for h in 0..x[i].len() {
            d += x[i][h] * x[j][h];
            ni += x[i][h] * x[i][h];
            nj += x[j][h] * x[j][h];
        }
        d / (ni.sqrt() * nj.sqrt())
    };
    let f = |i: usize, j: usize| match exp_temperature {
        Some(t) => (cos(i, j) / t).exp(),
        None => cos(i, j),
    };
    let hamming = |i: usize, j: usize| (0..c).filter(|&k| y[i][k] != y[j][k]).count() as f64;

    let mut total = 0.0;
    for class in 0..c {
        let positives: Vec<usize> = (0..b).filter(|&i| y[i][class] == 1).collect();
        let negatives: Vec<usize> = (0..b).filter(|&i| y[i][class] == 0).collect();
        if positives.len() < 2 {
            continue;
        }
        let mut sum = 0.0;
        let mut pairs = 0.0;
        for &i in &positives {
            for &j in &positives {
                if i == j {
                    continue;
                }
                let sigma = 1.0 - hamming(i, j) / c as f64;
                let s = sigma * f(i, j);
                let mut delta = s;
                for &k in &negatives {
                    let mut gamma = hamming(i, k);
                    if normalize_gamma {
                        gamma /= c as f64;
                    }
                    delta += gamma * f(i, k);
                }
                delta /= negatives.len() as f64 + 1.0;
                let arg = if s > 0.0 && delta > 0.0 { s / delta } else { 0.0 };
                sum += -arg.max(epsilon).ln();
                pairs += 1.0;
            }
        }
        total += sum / pairs;
    }
    total / c as f64
}

/// Pooled and per-class F1 from explicit (sample, class) counting.
pub fn f1_oracle(pred: &[Vec<u8>], gold: &[Vec<u8>]) -> (f64, f64) {
    let c = gold.first().map_or(0, |g| g.len());
    let f1 = |tp: f64, fp: f64, fn_: f64| {
        if tp + fp + fn_ == 0.0 {
            0.0
        } else {
            2.0 * tp / (2.0 * tp + fp + fn_)
        }
    };
    let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
    let mut macro_sum = 0.0;
    for k in 0..c {
        let (mut ctp, mut cfp, mut cfn) = (0.0, 0.0, 0.0);
        for (p, g) in pred.iter().zip(gold) {
            match (p[k], g[k]) {
                (1, 1) => ctp += 1.0,
                (1, 0) => cfp += 1.0,
                (0, 1) => cfn += 1.0,
                _ => {}
            }
        }
        tp += ctp;
        fp += cfp;
        fn_ += cfn;
        macro_sum += f1(ctp, cfp, cfn);
    }
    (f1(tp, fp, fn_), macro_sum / c as f64)
}

pub struct Instance {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<u8>>,
}

impl Instance {
    pub fn matrix(&self) -> Matrix {
        Matrix::from_rows(&self.x).unwrap()
    }

    pub fn labels(&self) -> Vec<LabelVector> {
        self.y.iter().map(|b| LabelVector::new(b.clone()).unwrap()).collect()
    }
}

pub fn random_instance(rng: &mut ChaCha8Rng, max_b: usize, max_c: usize, max_h: usize) -> Instance {
    let b = rng.random_range(2..=max_b);
    let c = rng.random_range(1..=max_c);
    let h = rng.random_range(2..=max_h);
    let x = (0..b)
        .map(|_| loop {
            let row: Vec<f64> = (0..h).map(|_| rng.random_range(-1.0..1.0)).collect();
            if row.iter().map(|v| v * v).sum::<f64>() > 1e-4 {
                break row;
            }
        })
        .collect();
    let y = (0..b)
        .map(|_| (0..c).map(|_| rng.random_bool(0.5) as u8).collect())
        .collect();
    Instance { x, y }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || a == b
}

/// Train-only dataset where class `c` is drawn with probability
/// `0.6 * 0.7^c`, so the last classes have only a handful of positives.
pub fn imbalanced_dataset(n: usize, num_classes: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let samples = (0..n)
        .map(|i| {
            let mut y = LabelVector::zeros(num_classes);
            for c in 0..num_classes {
                if r.random_bool(0.6 * 0.7f64.powi(c as i32)) {
                    y.set(c);
                }
            }
            if i < num_classes {
                y.set(i);
            }
            if y.count_ones() == 0 {
                y.set(0);
            }
            Sample {
                id: format!("im{i}"),
                lang: "en".into(),
                split: Split::Train,
                labels: y,
                embedding: vec![1.0, i as f64],
                text: None,
            }
        })
        .collect();
    Dataset::new(samples, num_classes, 2, default_class_names(num_classes)).unwrap()
}

/// Fraction of (batch, class) pairs with fewer than two positives, over
/// classes that have at least two positives in the whole pool.
pub fn thin_pair_fraction(ds: &Dataset, batches: &[Vec<usize>]) -> f64 {
    let c = ds.num_classes();
    let pool_counts: Vec<usize> = (0..c)
        .map(|k| ds.samples().iter().filter(|s| s.labels.has(k)).count())
        .collect();
    let (mut thin, mut total) = (0usize, 0usize);
    for b in batches {
        for k in (0..c).filter(|&k| pool_counts[k] >= 2) {
            total += 1;
            if b.iter().filter(|&&i| ds.samples()[i].labels.has(k)).count() < 2 {
                thin += 1;
            }
        }
    }
    thin as f64 / total as f64
}

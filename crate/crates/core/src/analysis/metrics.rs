use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabelVector};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{Model, ModelParams};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub probs: Matrix,
    pub predictions: Vec<LabelVector>,
    pub threshold: f64,
}

impl PredictionSet {
    /// A bit is set iff its probability is at least `threshold`.
    pub fn from_probs(probs: Matrix, threshold: f64) -> Self {
        let predictions = probs
            .iter_rows()
            .map(|row| LabelVector::new(row.iter().map(|&p| u8::from(p >= threshold)).collect()).expect("binary"))
            .collect();
        Self {
            probs,
            predictions,
            threshold,
        }
    }
}

pub fn predict_probs(params: &ModelParams, inputs: &Matrix, threshold: f64) -> Result<PredictionSet> {
    let out = Model::new(params.clone()).predict(inputs)?;
    Ok(PredictionSet::from_probs(out.probs, threshold))
}

/// Eval-mode predictions for the samples at `indices`.
pub fn predict(params: &ModelParams, dataset: &Dataset, indices: &[usize], threshold: f64) -> Result<PredictionSet> {
    if params.num_classes() != dataset.num_classes() {
        return Err(Error::Dimension(format!(
            "model predicts {} classes, dataset has {}",
            params.num_classes(),
            dataset.num_classes()
        )));
    }
    predict_probs(params, &dataset.embeddings(indices), threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct F1Options {
    /// Leave classes with no gold and no predicted positives out of the
    /// macro average instead of counting them as 0.
    pub skip_empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub micro: f64,
    pub macro_: f64,
    pub per_class: Vec<f64>,
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

pub fn f1_scores(predictions: &[LabelVector], gold: &[LabelVector], options: F1Options) -> Result<F1Scores> {
    if predictions.len() != gold.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} gold rows",
            predictions.len(),
            gold.len()
        )));
    }
    let num_classes = gold.first().map_or(0, LabelVector::len);
    if predictions.iter().chain(gold).any(|y| y.len() != num_classes) {
        return Err(Error::Dimension("label vectors must all have the same length".into()));
    }

    let mut counts = vec![(0usize, 0usize, 0usize); num_classes];
    for (p, g) in predictions.iter().zip(gold) {
        for (c, (&pb, &gb)) in p.bits().iter().zip(g.bits()).enumerate() {
            match (pb, gb) {
                (1, 1) => counts[c].0 += 1,
                (1, 0) => counts[c].1 += 1,
                (0, 1) => counts[c].2 += 1,
                _ => {}
            }
        }
    }
    let (tp, fp, fn_) = counts
        .iter()
        .fold((0, 0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2));
    let per_class: Vec<f64> = counts.iter().map(|&(t, p, n)| f1(t, p, n)).collect();
    let kept: Vec<f64> = counts
        .iter()
        .zip(&per_class)
        .filter(|((t, p, n), _)| !(options.skip_empty && t + p + n == 0))
        .map(|(_, &f)| f)
        .collect();
    let macro_ = if kept.is_empty() {
        0.0
    } else {
        kept.iter().sum::<f64>() / kept.len() as f64
    };
    Ok(F1Scores {
        micro: f1(tp, fp, fn_),
        macro_,
        per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(bits: &[u8]) -> LabelVector {
        LabelVector::new(bits.to_vec()).unwrap()
    }

    #[test]
    fn thresholding() {
        let probs = Matrix::from_rows(&[[0.6, 0.4], [0.0, 1.0]]).unwrap();
        let p = PredictionSet::from_probs(probs.clone(), 0.5);
        assert_eq!(p.predictions[0], lv(&[1, 0]));
        let all = PredictionSet::from_probs(probs.clone(), 0.0);
        assert!(all.predictions.iter().all(|y| y.count_ones() == 2));
        let none = PredictionSet::from_probs(probs, 1.0 + 1e-9);
        assert!(none.predictions.iter().all(|y| y.count_ones() == 0));
    }

    #[test]
    fn f1_examples() {
        let gold = vec![lv(&[1, 0, 1]), lv(&[0, 1, 0])];
        let s = f1_scores(&gold, &gold, F1Options::default()).unwrap();
        assert_eq!((s.micro, s.macro_), (1.0, 1.0));

        // TP=2, FP=1, FN=1
        let gold = vec![lv(&[1, 1, 0]), lv(&[0, 1, 0])];
        let pred = vec![lv(&[1, 0, 1]), lv(&[0, 1, 0])];
        let s = f1_scores(&pred, &gold, F1Options::default()).unwrap();
        assert!((s.micro - 2.0 / 3.0).abs() < 1e-15);

        let gold = vec![lv(&[1, 1])];
        let pred = vec![lv(&[1, 0])];
        let s = f1_scores(&pred, &gold, F1Options::default()).unwrap();
        assert_eq!(s.per_class, vec![1.0, 0.0]);
        assert_eq!(s.macro_, 0.5);
    }

    #[test]
    fn empty_class_handling() {
        let gold = vec![lv(&[1, 0])];
        let pred = vec![lv(&[1, 0])];
        assert_eq!(f1_scores(&pred, &gold, F1Options::default()).unwrap().macro_, 0.5);
        assert_eq!(f1_scores(&pred, &gold, F1Options { skip_empty: true }).unwrap().macro_, 1.0);
    }

    #[test]
    fn shape_mismatch() {
        assert!(f1_scores(&[lv(&[1])], &[], F1Options::default()).is_err());
        assert!(f1_scores(&[lv(&[1])], &[lv(&[1, 0])], F1Options::default()).is_err());
    }
}

//! Pairwise cosine similarity grouped by label Hamming distance, with an
//! ordinary least-squares fit of similarity on distance.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{hamming_distance, LabelVector};
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub pair_id: String,
    pub hamming_distance: usize,
    pub cosine_similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub rows: Vec<ReportRow>,
    /// Cosine similarities keyed by Hamming distance.
    pub groups: BTreeMap<usize, Vec<f64>>,
    pub beta: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_pairs: usize,
    /// Set when the fit is undefined (fewer than two pairs, or no variance
    /// in distance or similarity); `beta` and `r_squared` are then 0.
    pub degenerate: bool,
}

impl SimilarityReport {
    pub fn group_counts(&self) -> BTreeMap<usize, usize> {
        self.groups.iter().map(|(&d, v)| (d, v.len())).collect()
    }

    pub fn group_means(&self) -> BTreeMap<usize, f64> {
        self.groups
            .iter()
            .map(|(&d, v)| (d, v.iter().sum::<f64>() / v.len() as f64))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LineFit {
    pub beta: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub degenerate: bool,
}

pub(crate) fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let degenerate = LineFit {
        beta: 0.0,
        intercept: if ys.is_empty() { 0.0 } else { ys.iter().sum::<f64>() / n },
        r_squared: 0.0,
        degenerate: true,
    };
    if xs.len() < 2 {
        return degenerate;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return degenerate;
    }
    let beta = sxy / sxx;
    LineFit {
        beta,
        intercept: my - beta * mx,
        r_squared: ((sxy * sxy) / (sxx * syy)).clamp(0.0, 1.0),
        degenerate: false,
    }
}

/// All `n(n-1)/2` pairwise cosines, grouped by label distance, plus the
/// least-squares fit on the raw pairs.
pub fn similarity_by_distance(embeddings: &Matrix, labels: &[LabelVector]) -> Result<SimilarityReport> {
    let n = embeddings.rows();
    if labels.len() != n {
        return Err(Error::Dimension(format!("{n} embeddings but {} label vectors", labels.len())));
    }
    if n < 2 {
        return Err(Error::Argument("similarity analysis needs at least two samples".into()));
    }
    let sq: Vec<f64> = (0..n).map(|i| dot(embeddings.row(i), embeddings.row(i))).collect();
    let norms: Vec<f64> = sq.iter().map(|v| v.sqrt()).collect();
    if let Some(i) = norms.iter().position(|&v| v == 0.0 || !v.is_finite()) {
        return Err(Error::DegenerateInput(format!("embedding of sample {i} has norm {}", norms[i])));
    }

    let per_row: Vec<Result<Vec<ReportRow>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| {
                    // sqrt(a * a) == |a| in IEEE arithmetic, so identical rows give exactly 1.
                    let cos = (dot(embeddings.row(i), embeddings.row(j)) / (sq[i] * sq[j]).sqrt()).clamp(-1.0, 1.0);
                    Ok(ReportRow {
                        pair_id: format!("{i}-{j}"),
                        hamming_distance: hamming_distance(&labels[i], &labels[j])?,
                        cosine_similarity: cos,
                    })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(n * (n - 1) / 2);
    for r in per_row {
        rows.extend(r?);
    }

    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in &rows {
        groups.entry(r.hamming_distance).or_default().push(r.cosine_similarity);
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.hamming_distance as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.cosine_similarity).collect();
    let fit = fit_line(&xs, &ys);
    Ok(SimilarityReport {
        n_pairs: rows.len(),
        rows,
        groups,
        beta: fit.beta,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        degenerate: fit.degenerate,
    })
}

/// Writes one row per pair and a trailing
/// `summary,beta=<beta>,r_squared=<r2>` row.
pub fn export_report(report: &SimilarityReport, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["pair_id", "hamming_distance", "cosine_similarity"])?;
    for r in &report.rows {
        w.write_record([
            r.pair_id.clone(),
            r.hamming_distance.to_string(),
            r.cosine_similarity.to_string(),
        ])?;
    }
    w.write_record([
        "summary".to_string(),
        format!("beta={}", report.beta),
        format!("r_squared={}", report.r_squared),
    ])?;
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`export_report`]: pair rows and `(beta, r_squared)`.
pub fn read_report_csv(path: impl AsRef<Path>) -> Result<(Vec<ReportRow>, Option<(f64, f64)>)> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    let mut summary = None;
    let bad = |m: String| Error::Argument(format!("malformed report: {m}"));
    for rec in r.records() {
        let rec = rec?;
        if &rec[0] == "summary" {
            let value = |field: &str, key: &str| -> Result<f64> {
                field
                    .strip_prefix(key)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| bad(format!("summary field '{field}'")))
            };
            summary = Some((value(&rec[1], "beta=")?, value(&rec[2], "r_squared=")?));
            continue;
        }
        rows.push(ReportRow {
            pair_id: rec[0].to_string(),
            hamming_distance: rec[1].parse().map_err(|_| bad(format!("distance '{}'", &rec[1])))?,
            cosine_similarity: rec[2].parse().map_err(|_| bad(format!("cosine '{}'", &rec[2])))?,
        });
    }
    Ok((rows, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(bits: &[u8]) -> LabelVector {
        LabelVector::new(bits.to_vec()).unwrap()
    }

    #[test]
    fn identical_embeddings_are_degenerate() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
        let y = vec![lv(&[1, 0, 0]), lv(&[0, 1, 0]), lv(&[1, 1, 1])];
        let r = similarity_by_distance(&x, &y).unwrap();
        assert!(r.groups.values().flatten().all(|&c| c == 1.0));
        assert_eq!((r.beta, r.r_squared), (0.0, 0.0));
        assert!(r.degenerate);
    }

    #[test]
    fn single_pair_is_degenerate() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.2, (1.0f64 - 0.04).sqrt()]]).unwrap();
        let y = vec![lv(&[1, 1, 1, 0]), lv(&[0, 0, 0, 0])];
        let r = similarity_by_distance(&x, &y).unwrap();
        assert_eq!(r.n_pairs, 1);
        assert_eq!(r.groups[&3].len(), 1);
        assert!((r.groups[&3][0] - 0.2).abs() < 1e-12);
        assert_eq!((r.beta, r.r_squared), (0.0, 0.0));
        assert!(r.degenerate);
    }

    #[test]
    fn perfect_line() {
        let xs: Vec<f64> = (0..30).map(|k| (k % 8) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|d| 0.9 - 0.08 * d).collect();
        let fit = fit_line(&xs, &ys);
        assert!((fit.beta + 0.08).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(!fit.degenerate);
    }

    #[test]
    fn zero_norm_rejected() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        let r = similarity_by_distance(&x, &[lv(&[1]), lv(&[0])]);
        assert!(matches!(r, Err(Error::DegenerateInput(ref m)) if m.contains("sample 1")));
    }
}

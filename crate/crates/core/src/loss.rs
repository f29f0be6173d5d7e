//! Cosine similarity, binary cross-entropy and the label-aware contrastive
//! objective, each with a hand-derived gradient.
//!
//! For a batch with embeddings `X` and multi-hot labels `Y`, the
//! contrastive term is
//!
//! ```text
//! L_con = 1/|C| * sum_c  mean_{(i,j) in P(c), i != j}  -log( s_ij / delta_ij )
//! s_ij     = sigma_ij * f(X_i, X_j)
//! delta_ij = ( s_ij + sum_{k in N(c)} gamma_ik * f(X_i, X_k) ) / ( |N(c)| + 1 )
//! sigma_ij = 1 - d(Y_i, Y_j) / |C|,   gamma_ik = d(Y_i, Y_k)
//! ```
//!
//! where `P(c)` / `N(c)` are the batch rows that do / do not carry class `c`
//! and `d` is the Hamming distance. Pairs are ordered: `(i, j)` and `(j, i)`
//! are separate terms and `delta` is anchored on `i`. Classes with fewer
//! than two positives contribute zero but still count in `|C|`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{hamming_distance, LabelVector};
use crate::error::{Error, Result};
use crate::matrix::{dot, norm, Matrix};

/// Probability clamp applied before taking logs in the BCE term.
pub const BCE_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// `f(x, y) = cos(x, y)`; the log argument is clamped below at `epsilon`.
    RawCosine,
    /// `f(x, y) = exp(cos(x, y) / temperature)`, strictly positive.
    ExpCosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityKernel {
    pub kind: KernelKind,
    pub temperature: f64,
    pub epsilon: f64,
}

impl Default for SimilarityKernel {
    fn default() -> Self {
        Self {
            kind: KernelKind::RawCosine,
            temperature: 1.0,
            epsilon: 1e-6,
        }
    }
}

impl SimilarityKernel {
    pub fn raw_cosine() -> Self {
        Self::default()
    }

    pub fn exp_cosine(temperature: f64) -> Self {
        Self {
            kind: KernelKind::ExpCosine,
            temperature,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!(
                "kernel temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-2) {
            return Err(Error::Config(format!(
                "kernel epsilon must lie in (0, 1e-2], got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Kernel value and its derivative with respect to the cosine.
    #[inline]
    pub fn eval(&self, cos: f64) -> (f64, f64) {
        match self.kind {
            KernelKind::RawCosine => (cos, 1.0),
            KernelKind::ExpCosine => {
                let f = (cos / self.temperature).exp();
                (f, f / self.temperature)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub bce: f64,
    pub contrastive: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct BceOutput {
    pub loss: f64,
    /// Gradient with respect to the probabilities.
    pub grad: Matrix,
}

#[derive(Debug, Clone)]
pub struct ContrastiveOutput {
    pub loss: f64,
    /// Gradient with respect to the embedding rows.
    pub grad: Matrix,
    /// Set when no class had two or more positives in the batch.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct CombinedOutput {
    pub breakdown: LossBreakdown,
    pub grad_probs: Matrix,
    pub grad_embeddings: Matrix,
    pub contrastive_degenerate: bool,
}

pub fn cosine_similarity(x1: &[f64], x2: &[f64]) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(Error::Dimension(format!(
            "vectors have lengths {} and {}",
            x1.len(),
            x2.len()
        )));
    }
    let (n1, n2) = (norm(x1), norm(x2));
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::DegenerateInput("cosine similarity of a zero-norm vector".into()));
    }
    Ok((dot(x1, x2) / (n1 * n2)).clamp(-1.0, 1.0))
}

/// Mean binary cross-entropy over every (sample, class) entry.
pub fn bce_loss(probs: &Matrix, labels: &Matrix) -> Result<BceOutput> {
    probs.check_same_shape(labels)?;
    let count = (probs.rows() * probs.cols()) as f64;
    if count == 0.0 {
        return Err(Error::Dimension("empty probability matrix".into()));
    }
    let mut grad = Matrix::zeros(probs.rows(), probs.cols());
    let mut total = 0.0;
    for ((&p, &y), g) in probs
        .as_slice()
        .iter()
        .zip(labels.as_slice())
        .zip(grad.as_mut_slice())
    {
        let pc = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
        total -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
        if p == pc {
            *g = (-y / pc + (1.0 - y) / (1.0 - pc)) / count;
        }
    }
    Ok(BceOutput {
        loss: total / count,
        grad,
    })
}

/// Unit rows, row norms and the pairwise cosine matrix.
struct Geometry {
    units: Matrix,
    norms: Vec<f64>,
    cos: Matrix,
}

fn geometry(embeddings: &Matrix) -> Result<Geometry> {
    let b = embeddings.rows();
    let mut units = embeddings.clone();
    let mut norms = Vec::with_capacity(b);
    for i in 0..b {
        let n = norm(embeddings.row(i));
        if n == 0.0 || !n.is_finite() {
            return Err(Error::DegenerateInput(format!("embedding row {i} has norm {n}")));
        }
        units.row_mut(i).iter_mut().for_each(|v| *v /= n);
        norms.push(n);
    }
    let mut cos = Matrix::zeros(b, b);
    for i in 0..b {
        cos.set(i, i, 1.0);
        for j in (i + 1)..b {
            let c = dot(units.row(i), units.row(j)).clamp(-1.0, 1.0);
            cos.set(i, j, c);
            cos.set(j, i, c);
        }
    }
    Ok(Geometry { units, norms, cos })
}

/// Contribution of one class: its loss share and `dL/df` for every
/// ordered (anchor, other) pair, flattened row-major over the batch.
fn class_term(
    class: usize,
    labels: &[LabelVector],
    kernel_f: &Matrix,
    dist: &Matrix,
    num_classes: usize,
    gamma_scale: f64,
    epsilon: f64,
) -> Option<(f64, Vec<f64>)> {
    let b = labels.len();
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..b).partition(|&i| labels[i].has(class));
    let m = pos.len();
    if m < 2 {
        return None;
    }
    let weight = 1.0 / (num_classes as f64 * (m * (m - 1)) as f64);
    let norm_count = neg.len() as f64 + 1.0;

    // Repulsion mass of each anchor against this class's negatives.
    let repulsion: Vec<f64> = pos
        .iter()
        .map(|&i| {
            neg.iter()
                .map(|&k| gamma_scale * dist.get(i, k) * kernel_f.get(i, k))
                .sum()
        })
        .collect();

    let mut loss = 0.0;
    let mut coef = vec![0.0; b * b];
    let clamped_term = -epsilon.ln();
    for (pi, &i) in pos.iter().enumerate() {
        for &j in &pos {
            if i == j {
                continue;
            }
            let sigma = 1.0 - dist.get(i, j) / num_classes as f64;
            let s = sigma * kernel_f.get(i, j);
            let denom = s + repulsion[pi];
            let arg = norm_count * s / denom;
            if !(s > 0.0 && denom > 0.0 && arg >= epsilon) {
                loss += weight * clamped_term;
                continue;
            }
            loss -= weight * arg.ln();
            // -log(arg) = -log(n+1) - log(s) + log(denom)
            coef[i * b + j] += weight * sigma * (1.0 / denom - 1.0 / s);
            for &k in &neg {
                coef[i * b + k] += weight * gamma_scale * dist.get(i, k) / denom;
            }
        }
    }
    Some((loss, coef))
}

pub fn contrastive_loss(
    embeddings: &Matrix,
    labels: &[LabelVector],
    kernel: &SimilarityKernel,
    normalize_gamma: bool,
) -> Result<ContrastiveOutput> {
    kernel.validate()?;
    let b = embeddings.rows();
    if labels.len() != b {
        return Err(Error::Dimension(format!(
            "{b} embedding rows but {} label vectors",
            labels.len()
        )));
    }
    if b < 2 {
        return Err(Error::BatchTooSmall(b));
    }
    let num_classes = labels[0].len();
    if num_classes == 0 || labels.iter().any(|y| y.len() != num_classes) {
        return Err(Error::Dimension("label vectors must share one non-zero length".into()));
    }

    let geo = geometry(embeddings)?;
    let mut kernel_f = Matrix::zeros(b, b);
    let mut kernel_df = Matrix::zeros(b, b);
    let mut dist = Matrix::zeros(b, b);
    for i in 0..b {
        for j in 0..b {
            let (f, df) = kernel.eval(geo.cos.get(i, j));
            kernel_f.set(i, j, f);
            kernel_df.set(i, j, df);
            if j > i {
                let d = hamming_distance(&labels[i], &labels[j])? as f64;
                dist.set(i, j, d);
                dist.set(j, i, d);
            }
        }
    }
    let gamma_scale = if normalize_gamma {
        1.0 / num_classes as f64
    } else {
        1.0
    };

    // Per-class terms may run in parallel; they are reduced in class order.
    let terms: Vec<Option<(f64, Vec<f64>)>> = (0..num_classes)
        .into_par_iter()
        .map(|c| class_term(c, labels, &kernel_f, &dist, num_classes, gamma_scale, kernel.epsilon))
        .collect();

    let mut grad = Matrix::zeros(b, embeddings.cols());
    if terms.iter().all(Option::is_none) {
        log::warn!("no class has two or more positives in this batch; contrastive term is zero");
        return Ok(ContrastiveOutput {
            loss: 0.0,
            grad,
            degenerate: true,
        });
    }

    let mut loss = 0.0;
    let mut coef = vec![0.0; b * b];
    for (l, c) in terms.into_iter().flatten() {
        loss += l;
        coef.iter_mut().zip(&c).for_each(|(a, v)| *a += v);
    }

    // dL/dcos_ab, symmetrised because cos_ab depends on both rows.
    for a in 0..b {
        for bb in 0..b {
            if a == bb {
                continue;
            }
            let g = (coef[a * b + bb] + coef[bb * b + a]) * kernel_df.get(a, bb);
            if g == 0.0 {
                continue;
            }
            let c = geo.cos.get(a, bb);
            let scale = g / geo.norms[a];
            let ua = geo.units.row(a).to_vec();
            let ub = geo.units.row(bb);
            for (d, out) in grad.row_mut(a).iter_mut().enumerate() {
                *out += scale * (ub[d] - c * ua[d]);
            }
        }
    }

    Ok(ContrastiveOutput {
        loss,
        grad,
        degenerate: false,
    })
}

/// `bce + alpha * contrastive` with gradients for both the probabilities and
/// the embeddings.
pub fn combined_loss(
    probs: &Matrix,
    labels: &[LabelVector],
    embeddings: &Matrix,
    alpha: f64,
    kernel: &SimilarityKernel,
    normalize_gamma: bool,
) -> Result<CombinedOutput> {
    let label_matrix = Matrix::from_rows(&labels.iter().map(LabelVector::as_f64).collect::<Vec<_>>())?;
    let bce = bce_loss(probs, &label_matrix)?;
    let con = contrastive_loss(embeddings, labels, kernel, normalize_gamma)?;
    let mut grad_embeddings = con.grad;
    grad_embeddings.scale(alpha);
    Ok(CombinedOutput {
        breakdown: LossBreakdown {
            total: bce.loss + alpha * con.loss,
            bce: bce.loss,
            contrastive: con.loss,
            alpha,
        },
        grad_probs: bce.grad,
        grad_embeddings,
        contrastive_degenerate: con.degenerate,
    })
}
